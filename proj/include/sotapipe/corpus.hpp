// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sotapipe::corpus {

enum class SplitLabel { Train, TestFewShot, TestZeroShot };

std::string split_label_name(SplitLabel split);  // "train" | "few_shot" | "zero_shot"
std::optional<SplitLabel> split_label_from_name(const std::string& name);

// One (Task, Dataset, Metric, Score) tuple. Scores stay verbatim text; "76.5"
// and "76.5%" are different values on purpose.
struct TdmsQuadruple {
  std::string task;
  std::string dataset;
  std::string metric;
  std::string score;

  bool operator==(const TdmsQuadruple&) const = default;
  bool operator<(const TdmsQuadruple& other) const;
};

// Validates and trims fields; throws std::invalid_argument on violation.
TdmsQuadruple make_quadruple(std::string task, std::string dataset, std::string metric,
                             std::string score);

struct AnnotationSet {
  bool unanswerable = true;
  std::vector<TdmsQuadruple> quadruples;  // non-empty, deduplicated iff !unanswerable

  static AnnotationSet make_unanswerable();
  // Deduplicates on the exact 4-tuple, preserving first-seen order.
  static AnnotationSet leaderboard(std::vector<TdmsQuadruple> quads);
};

struct PaperRecord {
  std::string paper_id;  // arXiv-style identifier, unique within a corpus
  std::string title;
  std::filesystem::path latex_root;  // project directory or single .tex file
  SplitLabel split = SplitLabel::Train;
  AnnotationSet annotations;
  std::vector<std::string> categories;  // optional arXiv category tags
};

// Immutable after construction; safe to share across threads.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<PaperRecord> records);  // enforces paper_id uniqueness

  const std::vector<PaperRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const PaperRecord* find(const std::string& paper_id) const;

 private:
  std::vector<PaperRecord> records_;
};

struct CorpusStats {
  std::size_t papers_with_leaderboards = 0;
  std::size_t papers_without = 0;
  std::size_t total_tdm_triples = 0;     // TDM projection occurrences, one per quadruple
  std::size_t distinct_tdm_triples = 0;  // global over the split
  std::size_t distinct_tasks = 0;
  std::size_t distinct_datasets = 0;
  std::size_t distinct_metrics = 0;
  double avg_tdm_per_paper = 0.0;   // over papers with leaderboards only
  double avg_tdms_per_paper = 0.0;  // over papers with leaderboards only
};

// Manifest: UTF-8, one JSON object per line with keys paper_id, title, split,
// latex_root, annotations ("unanswerable" or an array of
// {Task, Dataset, Metric, Score}), and optional categories.
Corpus load_manifest(const std::filesystem::path& path);
void save_manifest(const Corpus& corpus, const std::filesystem::path& path);

CorpusStats compute_stats(const Corpus& corpus, SplitLabel split);
CorpusStats compute_stats(const Corpus& corpus);  // all splits pooled

// Stats rendered in the per-split row layout (rows = stat names, columns =
// train / few-shot / zero-shot).
std::string stats_markdown(const CorpusStats& train, const CorpusStats& few_shot,
                           const CorpusStats& zero_shot);
std::string stats_csv(const CorpusStats& train, const CorpusStats& few_shot,
                      const CorpusStats& zero_shot);

struct CategoryFilter {
  std::vector<std::string> include_prefixes;  // empty -> no include constraint
  std::vector<std::string> exclude_prefixes;

  bool matches(const PaperRecord& record) const;
};

// Deterministic seeded sample of n category-matching papers, independent of
// input iteration order; returned records are re-annotated Unanswerable.
std::vector<PaperRecord> select_unanswerable_pool(const std::vector<PaperRecord>& records,
                                                  const CategoryFilter& filter,
                                                  std::uint64_t seed, std::size_t n);

}  // namespace sotapipe::corpus
