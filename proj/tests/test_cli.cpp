// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "sotapipe/corpus.hpp"
#include "sotapipe/inference.hpp"
#include "sotapipe/promptgen.hpp"
#include "support/fixtures.hpp"

using namespace sotapipe;
using testing::TempDir;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  static std::atomic<unsigned> counter{0};
  const auto tag = std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
  const auto out_path = std::filesystem::temp_directory_path() / ("cli-out-" + tag);
  const auto err_path = std::filesystem::temp_directory_path() / ("cli-err-" + tag);
  const std::string cmd = std::string("'") + SOTAPIPE_CLI_PATH + "' " + args + " > '" +
                          out_path.string() + "' 2> '" + err_path.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = testing::read_file(out_path);
  result.err = testing::read_file(err_path);
  std::filesystem::remove(out_path);
  std::filesystem::remove(err_path);
  return result;
}

std::vector<testing::PaperSpec> fixture_specs() {
  std::vector<testing::PaperSpec> specs;
  for (int i = 0; i < 3; ++i) {
    testing::PaperSpec spec;
    spec.id = "few" + std::to_string(i);
    spec.dataset = "Set" + std::to_string(i);
    spec.score = "9" + std::to_string(i) + ".5";
    specs.push_back(spec);
  }
  testing::PaperSpec zero;
  zero.id = "zero0";
  zero.with_leaderboard = false;
  zero.split = "zero_shot";
  specs.push_back(zero);
  return specs;
}

std::size_t count_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

std::string q(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

}  // namespace

TEST_CASE("cli requires a subcommand and offers help") {
  CHECK(run_cli("").exit_code != 0);
  const auto help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* name : {"flatten", "context", "stats", "dataset", "infer", "eval", "report"}) {
    CHECK(help.out.find(name) != std::string::npos);
  }
}

TEST_CASE("cli stats renders the corpus table") {
  TempDir dir;
  const auto manifest = testing::make_corpus_fixture(dir.path(), fixture_specs());
  const auto res = run_cli("stats --manifest " + q(manifest));
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("| Statistic | Train | Few-shot | Zero-shot |") != std::string::npos);
  CHECK(res.out.find("| Papers with leaderboards | 0 | 3 | 0 |") != std::string::npos);
  CHECK(res.out.find("| Papers without leaderboards | 0 | 0 | 1 |") != std::string::npos);

  const auto csv = run_cli("stats --manifest " + q(manifest) + " --format csv --out " +
                           q(dir / "stats.csv"));
  REQUIRE(csv.exit_code == 0);
  CHECK(testing::read_file(dir / "stats.csv").rfind("statistic,", 0) == 0);
}

TEST_CASE("cli flatten writes merged sources and metadata") {
  TempDir dir;
  const auto manifest = testing::make_corpus_fixture(dir.path(), fixture_specs());
  const auto out = dir / "out";
  const auto res =
      run_cli("--outdir " + q(out) + " flatten --manifest " + q(manifest) + " --paper few0");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("flattened few0") != std::string::npos);
  const auto tex = testing::read_file(out / "flat" / "few0.tex");
  CHECK(tex.find("\\documentclass") != std::string::npos);
  const auto meta = nlohmann::json::parse(testing::read_file(out / "flat" / "few0.meta.json"));
  CHECK(meta["paper_id"] == "few0");
  CHECK(meta["inclusion_log"].is_array());
}

TEST_CASE("cli context extracts and datasets sample") {
  TempDir dir;
  const auto manifest = testing::make_corpus_fixture(dir.path(), fixture_specs());
  const auto out = dir / "out";

  const auto ctx = run_cli("--outdir " + q(out) + " context --manifest " + q(manifest) +
                           " --kind DocTAET --converter builtin");
  REQUIRE(ctx.exit_code == 0);
  const auto ctx_path = out / "contexts" / "DocTAET.jsonl";
  CHECK(ctx.out.find("wrote 4 contexts") != std::string::npos);
  REQUIRE(count_lines(ctx_path) == 4);
  {
    std::ifstream in(ctx_path);
    std::string line;
    REQUIRE(std::getline(in, line));
    const auto obj = nlohmann::json::parse(line);
    CHECK(obj["kind"] == "DocTAET");
    CHECK(obj["paper_id"] == "few0");
  }

  const auto ds = run_cli("--outdir " + q(out) + " dataset --manifest " + q(manifest) +
                          " --contexts " + q(ctx_path) + " --templates 3 --fraction 1.0");
  REQUIRE(ds.exit_code == 0);
  CHECK(ds.out.find("wrote 4 prompts") != std::string::npos);
  const auto first = promptgen::load_dataset(out / "dataset.jsonl");
  REQUIRE(first.size() == 4);
  CHECK(first[0].template_id == 3);

  // Same seed twice: byte-identical dataset.
  const auto bytes = testing::read_file(out / "dataset.jsonl");
  run_cli("--outdir " + q(out) + " dataset --manifest " + q(manifest) + " --contexts " +
          q(ctx_path) + " --templates 3 --fraction 1.0");
  CHECK(testing::read_file(out / "dataset.jsonl") == bytes);
}

TEST_CASE("cli infer talks to a chat endpoint") {
  TempDir dir;
  const auto manifest = testing::make_corpus_fixture(dir.path(), fixture_specs());
  const auto out = dir / "out";
  REQUIRE(run_cli("--outdir " + q(out) + " context --manifest " + q(manifest) +
                  " --kind DocTAET --converter builtin")
              .exit_code == 0);
  REQUIRE(run_cli("--outdir " + q(out) + " dataset --manifest " + q(manifest) + " --contexts " +
                  q(out / "contexts" / "DocTAET.jsonl") + " --templates 3")
              .exit_code == 0);

  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    nlohmann::json body;
    body["choices"] = {{{"message", {{"content", "unanswerable"}}}}};
    res.set_content(body.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string endpoint =
      "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";

  SUBCASE("an unset auth variable aborts before any request") {
    unsetenv("SOTAPIPE_CLI_MISSING_KEY");
    const auto res = run_cli("--outdir " + q(out) + " infer --dataset " +
                             q(out / "dataset.jsonl") + " --endpoint '" + endpoint +
                             "' --model test-model --auth-env SOTAPIPE_CLI_MISSING_KEY");
    CHECK(res.exit_code == 1);
    CHECK(res.err.find("error: environment variable SOTAPIPE_CLI_MISSING_KEY is not set") !=
          std::string::npos);
    CHECK(hits.load() == 0);
  }

  SUBCASE("predictions land in the output JSONL") {
    const auto res =
        run_cli("--outdir " + q(out) + " infer --dataset " + q(out / "dataset.jsonl") +
                " --endpoint '" + endpoint + "' --model test-model");
    REQUIRE(res.exit_code == 0);
    CHECK(res.out.find("4 predictions (0 parse failures)") != std::string::npos);
    CHECK(hits.load() == 4);
    const auto preds = inference::load_predictions(out / "predictions.jsonl");
    REQUIRE(preds.size() == 4);
    CHECK(preds[0].parsed.kind == inference::ParsedPrediction::Kind::Unanswerable);
    CHECK(count_lines(out / "checkpoint.jsonl") == 4);

    // Re-running resumes from the checkpoint without new requests.
    const auto again =
        run_cli("--outdir " + q(out) + " infer --dataset " + q(out / "dataset.jsonl") +
                " --endpoint '" + endpoint + "' --model test-model");
    REQUIRE(again.exit_code == 0);
    CHECK(hits.load() == 4);
  }

  server.stop();
  listener.join();
}

TEST_CASE("cli eval and report complete the loop") {
  TempDir dir;
  const auto specs = fixture_specs();
  const auto manifest = testing::make_corpus_fixture(dir.path(), specs);
  const auto out = dir / "out";

  // Gold echoes, serialized the same way the pipeline would.
  const auto corpus_obj = corpus::load_manifest(manifest);
  std::vector<std::string> lines;
  for (const auto& rec : corpus_obj.records()) {
    inference::ModelPrediction pred;
    pred.paper_id = rec.paper_id;
    pred.template_id = 3;
    pred.raw = promptgen::serialize_target(rec.annotations);
    pred.parsed = inference::parse_prediction(pred.raw);
    lines.push_back(inference::to_jsonl_line(pred));
  }
  const auto preds_path = dir / "preds.jsonl";
  {
    std::ofstream f(preds_path);
    for (const auto& line : lines) f << line << "\n";
  }

  const auto ev = run_cli("--outdir " + q(out) + " eval --manifest " + q(manifest) +
                          " --predictions " + q(preds_path));
  REQUIRE(ev.exit_code == 0);
  const auto report_text = testing::read_file(out / "report.json");
  const auto report_obj = nlohmann::json::parse(report_text);
  CHECK(report_obj["meta"]["template_filter"] == 3);
  CHECK(report_obj["meta"]["partial_threshold"] == 50.0);
  CHECK(report_obj["meta"]["config_digest"].get<std::string>().size() == 16);
  REQUIRE(report_obj["cells"].size() == 2);
  CHECK(report_obj["cells"][0]["metrics"]["rouge"]["rouge1"] == 100.0);
  CHECK(report_obj["cells"][0]["metrics"]["general_accuracy"]["value"] == 100.0);

  const auto rp = run_cli("--outdir " + q(out) + " report --report " + q(out / "report.json"));
  REQUIRE(rp.exit_code == 0);
  const std::string digest = report_obj["meta"]["config_digest"].get<std::string>();
  const auto run_dir = out / digest;
  CHECK(rp.out.find(run_dir.string()) != std::string::npos);
  CHECK(testing::read_file(run_dir / "report.md").find("# Evaluation report") !=
        std::string::npos);
  CHECK(testing::read_file(run_dir / "report.csv").rfind("split,", 0) == 0);
  CHECK(testing::read_file(run_dir / "report.json") == report_text);

  SUBCASE("config keys feed defaults and flags beat them") {
    testing::write_file(dir / "cfg.json", "{\"template_filter\": 1, \"partial_threshold\": 60}\n");
    const auto from_cfg =
        run_cli("--config " + q(dir / "cfg.json") + " --outdir " + q(out) + " eval --manifest " +
                q(manifest) + " --predictions " + q(preds_path) + " --out " + q(dir / "r1.json"));
    REQUIRE(from_cfg.exit_code == 0);
    const auto r1 = nlohmann::json::parse(testing::read_file(dir / "r1.json"));
    CHECK(r1["meta"]["template_filter"] == 1);
    CHECK(r1["meta"]["partial_threshold"] == 60.0);

    const auto with_flag = run_cli("--config " + q(dir / "cfg.json") + " --outdir " + q(out) +
                                   " eval --manifest " + q(manifest) + " --predictions " +
                                   q(preds_path) + " --template-filter 3 --out " +
                                   q(dir / "r2.json"));
    REQUIRE(with_flag.exit_code == 0);
    const auto r2 = nlohmann::json::parse(testing::read_file(dir / "r2.json"));
    CHECK(r2["meta"]["template_filter"] == 3);
    CHECK(r2["meta"]["partial_threshold"] == 60.0);
  }
}

TEST_CASE("cli reports failures with a nonzero exit") {
  const auto res = run_cli("eval --manifest /nonexistent/manifest.jsonl --predictions /x.jsonl");
  CHECK(res.exit_code == 1);
  CHECK(res.err.find("error:") != std::string::npos);
}
