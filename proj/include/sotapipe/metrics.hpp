// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "sotapipe/corpus.hpp"
#include "sotapipe/inference.hpp"

namespace sotapipe::metrics {

// Lowercases and splits on maximal runs of non-alphanumeric characters.
std::vector<std::string> tokenize(const std::string& text);

// Trim, lowercase, collapse internal whitespace runs to single spaces.
std::string normalize_string(const std::string& text);

// All scores are on a 0..100 scale.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf prf_from_counts(double matched, double n_pred, double n_gold);

Prf rouge_n(const std::vector<std::string>& pred_tokens,
            const std::vector<std::string>& ref_tokens, int n);

Prf rouge_l(const std::vector<std::string>& pred_tokens,
            const std::vector<std::string>& ref_tokens);

// Union-LCS over sentence splits (newline, or period followed by whitespace).
Prf rouge_lsum(const std::string& pred_text, const std::string& ref_text);

// 200 * LCS_chars(a, b) / (|a| + |b|) after normalize_string; 100 when both
// normalized strings are empty.
double fuzzy_ratio(const std::string& a, const std::string& b);

enum class MatchModeKind { Exact, Partial };

struct MatchMode {
  MatchModeKind kind = MatchModeKind::Exact;
  double threshold = 50.0;  // used by Partial only
};

// Size of a maximum-cardinality bipartite matching between predicted and gold
// values under the mode's compatibility relation.
std::size_t match_field(const std::vector<std::string>& pred_values,
                        const std::vector<std::string>& gold_values, const MatchMode& mode);

enum class Field { Task = 0, Dataset = 1, Metric = 2, Score = 3 };

constexpr std::array<Field, 4> kAllFields = {Field::Task, Field::Dataset, Field::Metric,
                                             Field::Score};

std::string field_name(Field field);

struct FieldCounts {
  std::size_t matched = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;
};

using PaperFieldCounts = std::array<FieldCounts, 4>;

PaperFieldCounts score_paper(const inference::ParsedPrediction& pred,
                             const corpus::AnnotationSet& gold, const MatchMode& mode);

enum class OverallMode { MacroOverFields, MicroPooled };

struct FieldScores {
  MatchMode mode;
  std::array<Prf, 4> fields;
  Prf overall;
};

FieldScores aggregate(const std::vector<PaperFieldCounts>& per_paper, const MatchMode& mode,
                      OverallMode overall_mode = OverallMode::MacroOverFields);

struct GeneralAccuracy {
  double value = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
};

// Correct iff (gold unanswerable and parsed Unanswerable) or (gold leaderboard
// and parsed Answerable). ParseFailure is always incorrect.
GeneralAccuracy general_accuracy(const std::vector<inference::ParsedPrediction::Kind>& preds,
                                 const std::vector<bool>& gold_has_leaderboard);

struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double rougeLsum = 0.0;
};

// Corpus score = mean of per-paper F-measures. pred_texts are raw model
// outputs; ref_texts are serialized gold targets.
RougeScores rouge_eval(const std::vector<std::string>& pred_texts,
                       const std::vector<std::string>& ref_texts);

}  // namespace sotapipe::metrics
