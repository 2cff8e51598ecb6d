// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sotapipe/context.hpp"
#include "sotapipe/corpus.hpp"

namespace sotapipe::promptgen {

enum class TemplateFamily { SQuAD_v2, DROP };

std::string family_name(TemplateFamily family);

struct InstructionTemplate {
  int id = 0;  // 1..15 in the builtin set
  TemplateFamily family = TemplateFamily::DROP;
  std::string pattern;  // contains {Context} and {Question}
  bool has_unanswerable_clause = false;
};

// The 15 builtin instruction templates: ids 1-7 DROP, ids 8-15 SQuAD_v2.
const std::vector<InstructionTemplate>& builtin_templates();
const InstructionTemplate& builtin_template(int id);

struct SotaQuestion {
  std::string text;
};

// The fixed extraction question.
SotaQuestion sota_question();

// Unanswerable -> "unanswerable"; leaderboard -> canonical single-line JSON
// array with key order Task, Dataset, Metric, Score.
std::string serialize_target(const corpus::AnnotationSet& annotations);

// Placeholder substitution only; throws std::invalid_argument when either
// placeholder is missing from the pattern.
std::string render(const InstructionTemplate& tmpl, const context::ContextDocument& context,
                   const SotaQuestion& question);

struct PromptInstance {
  std::string paper_id;
  int template_id = 0;
  context::ContextKind context_kind = context::ContextKind::DocFULL;
  corpus::SplitLabel split = corpus::SplitLabel::Train;
  std::string prompt;
  std::string target;
};

// Per template: an independent seeded sample of floor(fraction * N) papers,
// with-leaderboard and without sampled separately at the same fraction.
// Output sorted by (template_id, paper_id).
std::vector<PromptInstance> build_dataset(
    const corpus::Corpus& corpus,
    const std::map<std::string, context::ContextDocument>& contexts,
    const std::vector<InstructionTemplate>& templates, double sample_fraction,
    std::uint64_t seed);

std::string to_jsonl_line(const PromptInstance& instance);
PromptInstance from_jsonl_line(const std::string& line);
void save_dataset(const std::vector<PromptInstance>& instances,
                  const std::filesystem::path& path);
std::vector<PromptInstance> load_dataset(const std::filesystem::path& path);

}  // namespace sotapipe::promptgen
