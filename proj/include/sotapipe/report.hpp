// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sotapipe/corpus.hpp"
#include "sotapipe/inference.hpp"
#include "sotapipe/metrics.hpp"

namespace sotapipe::report {

struct CellKey {
  std::string split;         // "few_shot" | "zero_shot"
  std::string context_kind;  // "DocTAET" | "DocREC" | "DocFULL"

  bool operator==(const CellKey&) const = default;
};

struct CellMetrics {
  std::optional<metrics::RougeScores> rouge;
  std::optional<metrics::GeneralAccuracy> general_accuracy;
  std::optional<metrics::FieldScores> exact;
  std::optional<metrics::FieldScores> partial;
  std::size_t n_papers = 0;
};

struct RunMetadata {
  std::string timestamp;  // wall clock; not part of the digest
  std::string config_digest;
  int template_filter = 0;  // 0 -> all templates
  double partial_threshold = 50.0;
  std::string overall_mode = "macro";  // "macro" | "micro"
  std::vector<std::string> doctaet_patterns;
  std::vector<std::string> docrec_patterns;
};

struct EvaluationReport {
  RunMetadata meta;
  // Planned cells in plan order; nullopt marks a planned-but-missing cell.
  std::vector<std::pair<CellKey, std::optional<CellMetrics>>> cells;
  std::vector<std::string> warnings;
};

// Validates completeness against the plan; missing cells become explicit
// nulls with a warning, never silently absent.
EvaluationReport build_report(const std::vector<std::pair<CellKey, CellMetrics>>& results,
                              const std::vector<CellKey>& plan, RunMetadata meta);

struct EvalSettings {
  double threshold = 50.0;
  int template_filter = 3;  // 0 = all templates pooled
  metrics::OverallMode overall = metrics::OverallMode::MacroOverFields;
  std::string context_kind = "DocTAET";  // labels the report cells
};

// Full evaluation battery over (prediction, gold) pairs, one cell per test
// split present in the corpus.
EvaluationReport evaluate(const std::vector<inference::ModelPrediction>& predictions,
                          const corpus::Corpus& corpus, const EvalSettings& settings,
                          RunMetadata meta);

std::string to_json(const EvaluationReport& report);
EvaluationReport from_json(const std::string& text);
std::string to_markdown(const EvaluationReport& report);
std::string to_csv(const EvaluationReport& report);

enum class ReportFormat { Markdown, Csv, Json };

std::optional<ReportFormat> report_format_from_name(const std::string& name);

void emit(const EvaluationReport& report, ReportFormat format,
          const std::filesystem::path& path);

// FNV-1a 64-bit digest of the canonical configuration serialization.
std::string config_digest(const std::string& canonical_config_json);

}  // namespace sotapipe::report
