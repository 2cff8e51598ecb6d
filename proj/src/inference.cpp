// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/inference.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "sotapipe/jsonl.hpp"
#include "sotapipe/strutil.hpp"

namespace sotapipe::inference {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw TransportError("invalid endpoint URL: " + url);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return SplitUrl{url, "/"};
  return SplitUrl{url.substr(0, path_start), url.substr(path_start)};
}

// Removes fence lines (``` or ```lang) so fenced JSON bodies stay parseable.
std::string drop_code_fences(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t eol = raw.find('\n', pos);
    const std::string_view line = eol == std::string::npos
                                      ? std::string_view(raw).substr(pos)
                                      : std::string_view(raw).substr(pos, eol - pos);
    if (strutil::trim(line).rfind("```", 0) != 0) {
      out.append(line);
      out.push_back('\n');
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return out;
}

std::optional<json> first_json_array(const std::string& text) {
  std::size_t start = 0;
  while ((start = text.find('[', start)) != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char ch = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (ch == '\\') {
          escaped = true;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '[') {
        ++depth;
      } else if (ch == ']') {
        --depth;
        if (depth == 0) {
          json parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_array()) return parsed;
          break;
        }
      }
    }
    ++start;
  }
  return std::nullopt;
}

std::optional<std::string> ci_field(const json& obj, const std::string& lower_key) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (strutil::to_lower(it.key()) != lower_key) continue;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    return std::nullopt;
  }
  return std::nullopt;
}

bool has_standalone_unanswerable(const std::string& raw) {
  const std::string lower = strutil::to_lower(raw);
  const std::string word = "unanswerable";
  std::size_t pos = 0;
  while ((pos = lower.find(word, pos)) != std::string::npos) {
    const bool left_ok =
        pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
    const std::size_t end = pos + word.size();
    const bool right_ok =
        end >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[end]));
    if (left_ok && right_ok) return true;
    pos += 1;
  }
  return false;
}

ParsedPrediction::Kind kind_from_name(const std::string& name) {
  if (name == "answerable") return ParsedPrediction::Kind::Answerable;
  if (name == "unanswerable") return ParsedPrediction::Kind::Unanswerable;
  if (name == "parse_failure") return ParsedPrediction::Kind::ParseFailure;
  throw std::runtime_error("unknown parsed kind '" + name + "'");
}

}  // namespace

ParsedPrediction ParsedPrediction::answerable(std::vector<corpus::TdmsQuadruple> quads) {
  ParsedPrediction out;
  out.kind = Kind::Answerable;
  out.quadruples = std::move(quads);
  return out;
}

ParsedPrediction ParsedPrediction::make_unanswerable() {
  ParsedPrediction out;
  out.kind = Kind::Unanswerable;
  return out;
}

ParsedPrediction ParsedPrediction::failure(std::string reason) {
  ParsedPrediction out;
  out.kind = Kind::ParseFailure;
  out.failure_reason = std::move(reason);
  return out;
}

std::string parsed_kind_name(ParsedPrediction::Kind kind) {
  switch (kind) {
    case ParsedPrediction::Kind::Answerable:
      return "answerable";
    case ParsedPrediction::Kind::Unanswerable:
      return "unanswerable";
    case ParsedPrediction::Kind::ParseFailure:
      return "parse_failure";
  }
  return "";
}

std::string complete_one(const std::string& prompt, const InferenceConfig& config) {
  const SplitUrl url = split_url(config.endpoint_url);
  httplib::Client client(url.base);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(120, 0);
  client.set_write_timeout(120, 0);

  httplib::Headers headers;
  if (!config.auth_env_var.empty()) {
    const char* token = std::getenv(config.auth_env_var.c_str());
    if (token == nullptr || *token == '\0') {
      throw TransportError("environment variable " + config.auth_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  json body;
  body["model"] = config.model_name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_output_tokens;
  const std::string payload = body.dump();

  const int max_attempts = std::max(1, config.retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    std::string error;
    httplib::Result res = client.Post(url.path, headers, payload, "application/json");
    if (res) {
      if (res->status == 200) {
        json parsed = json::parse(res->body, nullptr, false);
        if (!parsed.is_discarded() && parsed.contains("choices") &&
            parsed["choices"].is_array() && !parsed["choices"].empty()) {
          const json& choice = parsed["choices"][0];
          if (choice.contains("message") && choice["message"].contains("content") &&
              choice["message"]["content"].is_string()) {
            return choice["message"]["content"].get<std::string>();
          }
        }
        throw TransportError("malformed completion response: missing choices[0].message.content");
      }
      if (res->status != 429 && res->status < 500) {
        throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                             config.endpoint_url);
      }
      error = "HTTP " + std::to_string(res->status);
    } else {
      error = "connection error: " + httplib::to_string(res.error());
    }
    if (attempt >= max_attempts) {
      throw TransportError(error + " after " + std::to_string(attempt) + " attempts");
    }
    std::this_thread::sleep_for(config.retry.base_backoff * (1LL << (attempt - 1)));
  }
}

ParsedPrediction parse_prediction(const std::string& raw) {
  const std::string text = drop_code_fences(raw);
  const std::optional<json> array = first_json_array(text);
  if (!array) {
    if (has_standalone_unanswerable(raw)) return ParsedPrediction::make_unanswerable();
    return ParsedPrediction::failure("no JSON array found");
  }
  std::vector<corpus::TdmsQuadruple> quads;
  for (const json& entry : *array) {
    if (!entry.is_object()) continue;
    const auto task = ci_field(entry, "task");
    const auto dataset = ci_field(entry, "dataset");
    const auto metric = ci_field(entry, "metric");
    const auto score = ci_field(entry, "score");
    if (!task || !dataset || !metric || !score) continue;
    try {
      quads.push_back(corpus::make_quadruple(*task, *dataset, *metric, *score));
    } catch (const std::invalid_argument&) {
      continue;
    }
  }
  if (quads.empty()) return ParsedPrediction::failure("array contains no valid quadruples");
  return ParsedPrediction::answerable(std::move(quads));
}

std::vector<ModelPrediction> run_batch(const std::vector<promptgen::PromptInstance>& instances,
                                       const InferenceConfig& config,
                                       const std::filesystem::path& checkpoint) {
  std::map<std::pair<std::string, int>, ModelPrediction> done;
  if (std::filesystem::exists(checkpoint)) {
    for (ModelPrediction& p : load_predictions(checkpoint)) {
      done[{p.paper_id, p.template_id}] = std::move(p);
    }
  }
  std::vector<std::optional<ModelPrediction>> slots(instances.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto it = done.find({instances[i].paper_id, instances[i].template_id});
    if (it != done.end()) {
      slots[i] = it->second;
    } else {
      pending.push_back(i);
    }
  }

  if (!pending.empty()) {
    if (checkpoint.has_parent_path()) {
      std::filesystem::create_directories(checkpoint.parent_path());
    }
    std::ofstream ck(checkpoint, std::ios::binary | std::ios::app);
    if (!ck) throw std::runtime_error("cannot open checkpoint: " + checkpoint.string());

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t wi = next.fetch_add(1);
        if (wi >= pending.size()) return;
        const std::size_t idx = pending[wi];
        const promptgen::PromptInstance& inst = instances[idx];
        ModelPrediction pred;
        pred.paper_id = inst.paper_id;
        pred.template_id = inst.template_id;
        try {
          pred.raw = complete_one(inst.prompt, config);
          pred.parsed = parse_prediction(pred.raw);
        } catch (const TransportError& e) {
          pred.parsed = ParsedPrediction::failure(std::string("transport: ") + e.what());
        }
        {
          // Durable before counted as done: append and flush under the lock.
          std::lock_guard<std::mutex> lock(mu);
          ck << to_jsonl_line(pred) << '\n';
          ck.flush();
          slots[idx] = std::move(pred);
        }
      }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config.max_in_flight)),
                              pending.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<ModelPrediction> out;
  out.reserve(instances.size());
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

std::string to_jsonl_line(const ModelPrediction& prediction) {
  ordered_json obj;
  obj["paper_id"] = prediction.paper_id;
  obj["template_id"] = prediction.template_id;
  obj["raw"] = prediction.raw;
  obj["parsed_kind"] = parsed_kind_name(prediction.parsed.kind);
  ordered_json quads = ordered_json::array();
  for (const auto& q : prediction.parsed.quadruples) {
    ordered_json e;
    e["Task"] = q.task;
    e["Dataset"] = q.dataset;
    e["Metric"] = q.metric;
    e["Score"] = q.score;
    quads.push_back(std::move(e));
  }
  obj["quadruples"] = std::move(quads);
  if (prediction.parsed.kind == ParsedPrediction::Kind::ParseFailure) {
    obj["reason"] = prediction.parsed.failure_reason;
  }
  return obj.dump();
}

ModelPrediction from_jsonl_line(const std::string& line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("invalid prediction line: ") + e.what());
  }
  if (!obj.is_object()) throw std::runtime_error("invalid prediction line: expected an object");
  ModelPrediction pred;
  pred.paper_id = obj.at("paper_id").get<std::string>();
  pred.template_id = obj.at("template_id").get<int>();
  pred.raw = obj.at("raw").get<std::string>();
  pred.parsed.kind = kind_from_name(obj.at("parsed_kind").get<std::string>());
  for (const auto& e : obj.at("quadruples")) {
    pred.parsed.quadruples.push_back(
        corpus::make_quadruple(e.at("Task").get<std::string>(), e.at("Dataset").get<std::string>(),
                               e.at("Metric").get<std::string>(),
                               e.at("Score").get<std::string>()));
  }
  if (auto it = obj.find("reason"); it != obj.end()) {
    pred.parsed.failure_reason = it->get<std::string>();
  }
  return pred;
}

std::vector<ModelPrediction> load_predictions(const std::filesystem::path& path) {
  const auto lines = jsonl::read_lines(path);
  std::vector<ModelPrediction> out;
  out.reserve(lines.text.size());
  for (std::size_t i = 0; i < lines.text.size(); ++i) {
    try {
      out.push_back(from_jsonl_line(lines.text[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("predictions " + path.string() + " line " +
                               std::to_string(lines.line_numbers[i]) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sotapipe::inference
