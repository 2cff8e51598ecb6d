// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/inference.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "support/fixtures.hpp"

using namespace sotapipe;
using testing::TempDir;

namespace {

constexpr const char* kQuadContent =
    "[{\"Task\":\"T\",\"Dataset\":\"D\",\"Metric\":\"M\",\"Score\":\"1\"}]";

std::string completion_body(const std::string& content) {
  nlohmann::json body;
  body["choices"] = nlohmann::json::array();
  body["choices"].push_back({{"message", {{"role", "assistant"}, {"content", content}}}});
  return body.dump();
}

// In-process chat-completions endpoint with scriptable behavior.
struct MockEndpoint {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  std::atomic<int> requests{0};
  std::atomic<int> active{0};
  std::atomic<int> max_active{0};
  std::mutex capture_mutex;
  std::string last_body;
  std::string last_auth;
  std::function<void(int, httplib::Response&)> behavior;  // (request ordinal, response)

  MockEndpoint() {
    server.Post("/v1/chat/completions",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const int ordinal = ++requests;
                  const int now = ++active;
                  int seen = max_active.load();
                  while (now > seen && !max_active.compare_exchange_weak(seen, now)) {
                  }
                  {
                    std::lock_guard<std::mutex> lock(capture_mutex);
                    last_body = req.body;
                    last_auth = req.get_header_value("Authorization");
                  }
                  if (behavior) {
                    behavior(ordinal, res);
                  } else {
                    res.set_content(completion_body(kQuadContent), "application/json");
                  }
                  --active;
                });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockEndpoint() {
    server.stop();
    if (thread.joinable()) thread.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  }

  inference::InferenceConfig config() const {
    inference::InferenceConfig cfg;
    cfg.endpoint_url = url();
    cfg.model_name = "test-model";
    cfg.max_in_flight = 1;
    cfg.retry.max_attempts = 3;
    cfg.retry.base_backoff = std::chrono::milliseconds(5);
    return cfg;
  }
};

promptgen::PromptInstance instance_for(const std::string& paper_id, int template_id) {
  promptgen::PromptInstance inst;
  inst.paper_id = paper_id;
  inst.template_id = template_id;
  inst.context_kind = context::ContextKind::DocTAET;
  inst.split = corpus::SplitLabel::TestFewShot;
  inst.prompt = "prompt for " + paper_id;
  inst.target = "unanswerable";
  return inst;
}

std::size_t line_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("complete_one sends a chat request and returns the content") {
  MockEndpoint mock;
  auto cfg = mock.config();
  cfg.temperature = 0.25;
  cfg.max_output_tokens = 77;

  SUBCASE("without auth") {
    const auto content = inference::complete_one("hello", cfg);
    CHECK(content == kQuadContent);
    std::lock_guard<std::mutex> lock(mock.capture_mutex);
    const auto body = nlohmann::json::parse(mock.last_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"] == 0.25);
    CHECK(body["max_tokens"] == 77);
    REQUIRE(body["messages"].size() == 1);
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "hello");
    CHECK(mock.last_auth.empty());
  }

  SUBCASE("with auth from the environment") {
    setenv("SOTAPIPE_TEST_KEY", "sk-test-123", 1);
    cfg.auth_env_var = "SOTAPIPE_TEST_KEY";
    inference::complete_one("hello", cfg);
    std::lock_guard<std::mutex> lock(mock.capture_mutex);
    CHECK(mock.last_auth == "Bearer sk-test-123");
  }

  SUBCASE("a named but unset variable is fatal") {
    unsetenv("SOTAPIPE_TEST_MISSING");
    cfg.auth_env_var = "SOTAPIPE_TEST_MISSING";
    try {
      inference::complete_one("hello", cfg);
      FAIL("expected an exception");
    } catch (const inference::TransportError& e) {
      CHECK(std::string(e.what()).find("SOTAPIPE_TEST_MISSING is not set") != std::string::npos);
    }
    CHECK(mock.requests.load() == 0);
  }
}

TEST_CASE("complete_one retries retryable statuses") {
  MockEndpoint mock;
  auto cfg = mock.config();

  SUBCASE("429 then success") {
    mock.behavior = [](int ordinal, httplib::Response& res) {
      if (ordinal == 1) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
      } else {
        res.set_content(completion_body("ok"), "application/json");
      }
    };
    CHECK(inference::complete_one("p", cfg) == "ok");
    CHECK(mock.requests.load() == 2);
  }

  SUBCASE("persistent 500 exhausts attempts") {
    mock.behavior = [](int, httplib::Response& res) { res.status = 500; };
    try {
      inference::complete_one("p", cfg);
      FAIL("expected an exception");
    } catch (const inference::TransportError& e) {
      const std::string what = e.what();
      CHECK(what.find("HTTP 500") != std::string::npos);
      CHECK(what.find("after 3 attempts") != std::string::npos);
    }
    CHECK(mock.requests.load() == 3);
  }

  SUBCASE("client errors fail immediately") {
    mock.behavior = [](int, httplib::Response& res) { res.status = 404; };
    CHECK_THROWS_AS(inference::complete_one("p", cfg), inference::TransportError);
    CHECK(mock.requests.load() == 1);
  }

  SUBCASE("malformed completion payload is fatal without retry") {
    mock.behavior = [](int, httplib::Response& res) {
      res.set_content("{\"choices\":[]}", "application/json");
    };
    try {
      inference::complete_one("p", cfg);
      FAIL("expected an exception");
    } catch (const inference::TransportError& e) {
      CHECK(std::string(e.what()).find("malformed completion response") != std::string::npos);
    }
    CHECK(mock.requests.load() == 1);
  }
}

TEST_CASE("parse_prediction handles the tolerant grammar") {
  using Kind = inference::ParsedPrediction::Kind;

  SUBCASE("plain array") {
    const auto p = inference::parse_prediction(kQuadContent);
    REQUIRE(p.kind == Kind::Answerable);
    REQUIRE(p.quadruples.size() == 1);
    CHECK(p.quadruples[0] == corpus::make_quadruple("T", "D", "M", "1"));
  }

  SUBCASE("fenced and prose-wrapped array with odd keys") {
    const std::string raw =
        "Sure! Here is the leaderboard:\n```json\n"
        "[{\"task\": \"QA\", \"DATASET\": \"SQuAD\", \"Metric\": \"EM\", \"score\": 91.2}]\n"
        "```\nHope that helps.";
    const auto p = inference::parse_prediction(raw);
    REQUIRE(p.kind == Kind::Answerable);
    REQUIRE(p.quadruples.size() == 1);
    CHECK(p.quadruples[0].task == "QA");
    CHECK(p.quadruples[0].dataset == "SQuAD");
    CHECK(p.quadruples[0].score == "91.2");
  }

  SUBCASE("refusals") {
    CHECK(inference::parse_prediction("unanswerable").kind == Kind::Unanswerable);
    CHECK(inference::parse_prediction("Unanswerable.").kind == Kind::Unanswerable);
    CHECK(inference::parse_prediction("The question is unanswerable from this text.").kind ==
          Kind::Unanswerable);
    // "unanswerable" must stand alone as a word.
    CHECK(inference::parse_prediction("xunanswerabley").kind == Kind::ParseFailure);
  }

  SUBCASE("arrays with no valid quadruples") {
    const auto p = inference::parse_prediction("[{\"Task\":\"only task\"}]");
    REQUIRE(p.kind == Kind::ParseFailure);
    CHECK(p.failure_reason.find("array contains no valid quadruples") != std::string::npos);
    CHECK(inference::parse_prediction("[[]]").kind == Kind::ParseFailure);
    // An array beats the refusal word when both appear.
    CHECK(inference::parse_prediction("unanswerable [1, 2]").kind == Kind::ParseFailure);
  }

  SUBCASE("partial objects are skipped, valid ones kept") {
    const auto p = inference::parse_prediction(
        "[{\"Task\":\"A\"},{\"Task\":\"A\",\"Dataset\":\"B\",\"Metric\":\"C\",\"Score\":\"2\"}]");
    REQUIRE(p.kind == Kind::Answerable);
    REQUIRE(p.quadruples.size() == 1);
    CHECK(p.quadruples[0].dataset == "B");
  }

  SUBCASE("garbage") {
    const auto p = inference::parse_prediction("I could not find [anything useful");
    REQUIRE(p.kind == Kind::ParseFailure);
    CHECK(p.failure_reason.find("no JSON array found") != std::string::npos);
    CHECK(inference::parse_prediction("").kind == Kind::ParseFailure);
  }
}

TEST_CASE("run_batch checkpoints, resumes, and bounds concurrency") {
  TempDir dir;

  SUBCASE("fresh run writes one checkpoint line per instance") {
    MockEndpoint mock;
    std::vector<promptgen::PromptInstance> instances;
    for (int i = 0; i < 4; ++i) instances.push_back(instance_for("p" + std::to_string(i), 3));
    const auto ck = dir / "ck.jsonl";
    const auto out = inference::run_batch(instances, mock.config(), ck);
    REQUIRE(out.size() == 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].paper_id == instances[i].paper_id);
      CHECK(out[i].parsed.kind == inference::ParsedPrediction::Kind::Answerable);
    }
    CHECK(line_count(ck) == 4);
    CHECK(mock.requests.load() == 4);

    // Resuming the identical batch issues zero requests.
    const auto resumed = inference::run_batch(instances, mock.config(), ck);
    REQUIRE(resumed.size() == 4);
    CHECK(mock.requests.load() == 4);
    CHECK(resumed[2].raw == out[2].raw);
  }

  SUBCASE("partial checkpoints only re-run the gap") {
    MockEndpoint mock;
    std::vector<promptgen::PromptInstance> instances;
    for (int i = 0; i < 4; ++i) instances.push_back(instance_for("p" + std::to_string(i), 3));
    const auto ck = dir / "partial.jsonl";
    {
      inference::ModelPrediction done;
      done.paper_id = "p1";
      done.template_id = 3;
      done.raw = "unanswerable";
      done.parsed = inference::ParsedPrediction::make_unanswerable();
      inference::ModelPrediction done2 = done;
      done2.paper_id = "p3";
      std::ofstream out(ck);
      out << inference::to_jsonl_line(done) << "\n" << inference::to_jsonl_line(done2) << "\n";
    }
    const auto out = inference::run_batch(instances, mock.config(), ck);
    REQUIRE(out.size() == 4);
    CHECK(mock.requests.load() == 2);  // p0 and p2 only
    CHECK(out[1].raw == "unanswerable");
    CHECK(out[1].parsed.kind == inference::ParsedPrediction::Kind::Unanswerable);
    CHECK(out[3].raw == "unanswerable");
    CHECK(out[0].parsed.kind == inference::ParsedPrediction::Kind::Answerable);
    CHECK(out[2].parsed.kind == inference::ParsedPrediction::Kind::Answerable);
    CHECK(line_count(ck) == 4);
  }

  SUBCASE("in-flight requests respect the bound") {
    MockEndpoint mock;
    mock.behavior = [](int, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
      res.set_content(completion_body(kQuadContent), "application/json");
    };
    auto cfg = mock.config();
    cfg.max_in_flight = 2;
    std::vector<promptgen::PromptInstance> instances;
    for (int i = 0; i < 8; ++i) instances.push_back(instance_for("p" + std::to_string(i), 1));
    const auto out = inference::run_batch(instances, cfg, dir / "bound.jsonl");
    CHECK(out.size() == 8);
    CHECK(mock.max_active.load() <= 2);
    CHECK(mock.requests.load() == 8);
  }

  SUBCASE("transport failures degrade to parse failures") {
    MockEndpoint mock;
    mock.behavior = [](int, httplib::Response& res) { res.status = 500; };
    auto cfg = mock.config();
    cfg.retry.max_attempts = 1;
    std::vector<promptgen::PromptInstance> instances = {instance_for("a", 1),
                                                        instance_for("b", 1)};
    const auto out = inference::run_batch(instances, cfg, dir / "fail.jsonl");
    REQUIRE(out.size() == 2);
    for (const auto& pred : out) {
      CHECK(pred.parsed.kind == inference::ParsedPrediction::Kind::ParseFailure);
      CHECK(pred.parsed.failure_reason.find("transport:") == 0);
      CHECK(pred.raw.empty());
    }
  }
}

TEST_CASE("prediction JSONL round-trips") {
  TempDir dir;
  inference::ModelPrediction pred;
  pred.paper_id = "p9";
  pred.template_id = 12;
  pred.raw = "some\nmultiline output";
  pred.parsed = inference::ParsedPrediction::failure("no JSON array found");
  const auto line = inference::to_jsonl_line(pred);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = inference::from_jsonl_line(line);
  CHECK(back.paper_id == pred.paper_id);
  CHECK(back.template_id == pred.template_id);
  CHECK(back.raw == pred.raw);
  CHECK(back.parsed.kind == inference::ParsedPrediction::Kind::ParseFailure);
  CHECK(back.parsed.failure_reason == "no JSON array found");

  inference::ModelPrediction ok;
  ok.paper_id = "p1";
  ok.template_id = 3;
  ok.raw = kQuadContent;
  ok.parsed = inference::ParsedPrediction::answerable({corpus::make_quadruple("T", "D", "M", "1")});
  const auto path = dir / "preds.jsonl";
  {
    std::ofstream out(path);
    out << inference::to_jsonl_line(ok) << "\n" << line << "\n";
  }
  const auto loaded = inference::load_predictions(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].parsed.kind == inference::ParsedPrediction::Kind::Answerable);
  REQUIRE(loaded[0].parsed.quadruples.size() == 1);
  CHECK(loaded[0].parsed.quadruples[0].metric == "M");
  CHECK(loaded[1].parsed.failure_reason == "no JSON array found");
}
