// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sotapipe/corpus.hpp"
#include "sotapipe/promptgen.hpp"

namespace sotapipe::inference {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
};

struct InferenceConfig {
  std::string endpoint_url;  // e.g. http://localhost:8080/v1/chat/completions
  std::string model_name;
  std::string auth_env_var;  // empty -> no auth header
  double temperature = 0.0;
  int max_output_tokens = 512;
  int max_in_flight = 1;
  RetryPolicy retry;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedPrediction {
  enum class Kind { Answerable, Unanswerable, ParseFailure };
  Kind kind = Kind::ParseFailure;
  std::vector<corpus::TdmsQuadruple> quadruples;  // non-empty iff Answerable
  std::string failure_reason;                     // set iff ParseFailure

  static ParsedPrediction answerable(std::vector<corpus::TdmsQuadruple> quads);
  static ParsedPrediction make_unanswerable();
  static ParsedPrediction failure(std::string reason);
};

std::string parsed_kind_name(ParsedPrediction::Kind kind);

struct ModelPrediction {
  std::string paper_id;
  int template_id = 0;
  std::string raw;  // byte-exact model output
  ParsedPrediction parsed;
};

// One chat request (single user message); retries 429/5xx with exponential
// backoff, surfaces other 4xx immediately. Throws TransportError.
std::string complete_one(const std::string& prompt, const InferenceConfig& config);

// Tolerant three-stage parse: standalone "unanswerable" with no JSON array;
// first well-formed JSON array (code fences stripped, keys case-insensitive,
// numeric scores coerced to text); otherwise ParseFailure.
ParsedPrediction parse_prediction(const std::string& raw);

// Bounded-parallel batch with durable append-only checkpoint; resume skips
// (paper_id, template_id) pairs already present. Output order matches input.
std::vector<ModelPrediction> run_batch(const std::vector<promptgen::PromptInstance>& instances,
                                       const InferenceConfig& config,
                                       const std::filesystem::path& checkpoint);

// Prediction line: paper_id, template_id, raw, parsed_kind, quadruples.
std::string to_jsonl_line(const ModelPrediction& prediction);
ModelPrediction from_jsonl_line(const std::string& line);
std::vector<ModelPrediction> load_predictions(const std::filesystem::path& path);

}  // namespace sotapipe::inference
