// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/promptgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "sotapipe/jsonl.hpp"
#include "sotapipe/rng.hpp"
#include "sotapipe/strutil.hpp"

namespace sotapipe::promptgen {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kContextSlot = "{Context}";
constexpr const char* kQuestionSlot = "{Question}";

InstructionTemplate compose(int id, TemplateFamily family, std::string row,
                            bool has_unanswerable_clause) {
  std::string pattern = std::move(row);
  if (pattern.find(kContextSlot) == std::string::npos) {
    pattern = std::string(kContextSlot) + "\n\n" + pattern;
  }
  if (pattern.find(kQuestionSlot) == std::string::npos) {
    pattern += std::string("\n") + kQuestionSlot;
  }
  return InstructionTemplate{id, family, std::move(pattern), has_unanswerable_clause};
}

}  // namespace

std::string family_name(TemplateFamily family) {
  return family == TemplateFamily::SQuAD_v2 ? "SQuAD_v2" : "DROP";
}

const std::vector<InstructionTemplate>& builtin_templates() {
  static const std::vector<InstructionTemplate> templates = [] {
    std::vector<InstructionTemplate> out;
    out.push_back(compose(1, TemplateFamily::DROP, "Answer based on context.", false));
    out.push_back(compose(2, TemplateFamily::DROP,
                          "Answer this question based on the article.", false));
    out.push_back(compose(3, TemplateFamily::DROP, "{Context} {Question}", false));
    out.push_back(compose(4, TemplateFamily::DROP, "Answer this question: {Question}", false));
    out.push_back(compose(5, TemplateFamily::DROP,
                          "Read this article and answer this question.", false));
    out.push_back(compose(6, TemplateFamily::DROP,
                          "Based on the above article, answer a question.", false));
    out.push_back(compose(7, TemplateFamily::DROP,
                          "Context: {Context} Question: {Question} Answer:", false));
    out.push_back(compose(
        8, TemplateFamily::SQuAD_v2,
        "Please answer a question about this article. If unanswerable, say \"unanswerable\".",
        true));
    out.push_back(compose(9, TemplateFamily::SQuAD_v2,
                          "{Context} {Question} If unanswerable, say \"unanswerable\".", true));
    out.push_back(compose(
        10, TemplateFamily::SQuAD_v2,
        "Try to answer this question if possible (otherwise reply \"unanswerable\").", true));
    out.push_back(compose(
        11, TemplateFamily::SQuAD_v2,
        "Please answer a question about this article, or say \"unanswerable\" if not possible.",
        true));
    out.push_back(compose(
        12, TemplateFamily::SQuAD_v2,
        "If possible to answer this question, do so (else, reply \"unanswerable\").", true));
    out.push_back(compose(
        13, TemplateFamily::SQuAD_v2,
        "Answer this question, if possible (if impossible, reply \"unanswerable\").", true));
    out.push_back(compose(
        14, TemplateFamily::SQuAD_v2,
        "What is the answer? (If it cannot be answered, return \"unanswerable\").", true));
    out.push_back(compose(
        15, TemplateFamily::SQuAD_v2,
        "Now answer this question, if there is an answer (else, \"unanswerable\").", true));
    return out;
  }();
  return templates;
}

const InstructionTemplate& builtin_template(int id) {
  for (const auto& tmpl : builtin_templates()) {
    if (tmpl.id == id) return tmpl;
  }
  throw std::out_of_range("no builtin template with id " + std::to_string(id));
}

SotaQuestion sota_question() {
  return SotaQuestion{
      "What are the values for the following properties to construct a Leaderboard for the "
      "model introduced in this article: task, dataset, metric, and score?"};
}

std::string serialize_target(const corpus::AnnotationSet& annotations) {
  if (annotations.unanswerable) return "unanswerable";
  ordered_json arr = ordered_json::array();
  for (const auto& q : annotations.quadruples) {
    ordered_json e;
    e["Task"] = q.task;
    e["Dataset"] = q.dataset;
    e["Metric"] = q.metric;
    e["Score"] = q.score;
    arr.push_back(std::move(e));
  }
  return arr.dump();
}

std::string render(const InstructionTemplate& tmpl, const context::ContextDocument& context,
                   const SotaQuestion& question) {
  if (tmpl.pattern.find(kContextSlot) == std::string::npos) {
    throw std::invalid_argument("template pattern missing {Context}");
  }
  if (tmpl.pattern.find(kQuestionSlot) == std::string::npos) {
    throw std::invalid_argument("template pattern missing {Question}");
  }
  std::string out = tmpl.pattern;
  strutil::replace_all(out, kContextSlot, context.text);
  strutil::replace_all(out, kQuestionSlot, question.text);
  return out;
}

std::vector<PromptInstance> build_dataset(
    const corpus::Corpus& corpus,
    const std::map<std::string, context::ContextDocument>& contexts,
    const std::vector<InstructionTemplate>& templates, double sample_fraction,
    std::uint64_t seed) {
  if (!(sample_fraction >= 0.0 && sample_fraction <= 1.0)) {
    throw std::invalid_argument("sample_fraction must be in [0, 1]");
  }
  std::vector<const corpus::PaperRecord*> with_leaderboard;
  std::vector<const corpus::PaperRecord*> without_leaderboard;
  for (const auto& rec : corpus.records()) {
    if (contexts.find(rec.paper_id) == contexts.end()) continue;
    (rec.annotations.unanswerable ? without_leaderboard : with_leaderboard).push_back(&rec);
  }
  auto by_id = [](const corpus::PaperRecord* a, const corpus::PaperRecord* b) {
    return a->paper_id < b->paper_id;
  };
  std::sort(with_leaderboard.begin(), with_leaderboard.end(), by_id);
  std::sort(without_leaderboard.begin(), without_leaderboard.end(), by_id);

  const SotaQuestion question = sota_question();
  std::vector<PromptInstance> out;
  for (const auto& tmpl : templates) {
    std::mt19937_64 gen(rng::mix(seed ^ rng::mix(static_cast<std::uint64_t>(tmpl.id))));
    auto sample = [&](const std::vector<const corpus::PaperRecord*>& pool) {
      const auto take = static_cast<std::size_t>(
          std::floor(sample_fraction * static_cast<double>(pool.size())));
      std::vector<const corpus::PaperRecord*> shuffled = pool;
      rng::shuffle(shuffled, gen);
      shuffled.resize(take);
      return shuffled;
    };
    std::vector<const corpus::PaperRecord*> selected = sample(with_leaderboard);
    for (const corpus::PaperRecord* rec : sample(without_leaderboard)) {
      selected.push_back(rec);
    }
    for (const corpus::PaperRecord* rec : selected) {
      const context::ContextDocument& ctx = contexts.at(rec->paper_id);
      PromptInstance inst;
      inst.paper_id = rec->paper_id;
      inst.template_id = tmpl.id;
      inst.context_kind = ctx.kind;
      inst.split = rec->split;
      inst.prompt = render(tmpl, ctx, question);
      inst.target = serialize_target(rec->annotations);
      out.push_back(std::move(inst));
    }
  }
  std::sort(out.begin(), out.end(), [](const PromptInstance& a, const PromptInstance& b) {
    if (a.template_id != b.template_id) return a.template_id < b.template_id;
    return a.paper_id < b.paper_id;
  });
  return out;
}

std::string to_jsonl_line(const PromptInstance& instance) {
  ordered_json obj;
  obj["paper_id"] = instance.paper_id;
  obj["template_id"] = instance.template_id;
  obj["context_kind"] = context::context_kind_name(instance.context_kind);
  obj["split"] = corpus::split_label_name(instance.split);
  obj["prompt"] = instance.prompt;
  obj["target"] = instance.target;
  return obj.dump();
}

PromptInstance from_jsonl_line(const std::string& line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("invalid dataset line: ") + e.what());
  }
  if (!obj.is_object()) throw std::runtime_error("invalid dataset line: expected an object");
  PromptInstance inst;
  inst.paper_id = obj.at("paper_id").get<std::string>();
  inst.template_id = obj.at("template_id").get<int>();
  const std::string kind_name = obj.at("context_kind").get<std::string>();
  auto kind = context::context_kind_from_name(kind_name);
  if (!kind) throw std::runtime_error("unknown context kind '" + kind_name + "'");
  inst.context_kind = *kind;
  const std::string split_name = obj.at("split").get<std::string>();
  auto split = corpus::split_label_from_name(split_name);
  if (!split) throw std::runtime_error("unknown split '" + split_name + "'");
  inst.split = *split;
  inst.prompt = obj.at("prompt").get<std::string>();
  inst.target = obj.at("target").get<std::string>();
  return inst;
}

void save_dataset(const std::vector<PromptInstance>& instances,
                  const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(instances.size());
  for (const auto& inst : instances) lines.push_back(to_jsonl_line(inst));
  jsonl::write_lines(lines, path);
}

std::vector<PromptInstance> load_dataset(const std::filesystem::path& path) {
  const auto lines = jsonl::read_lines(path);
  std::vector<PromptInstance> out;
  out.reserve(lines.text.size());
  for (std::size_t i = 0; i < lines.text.size(); ++i) {
    try {
      out.push_back(from_jsonl_line(lines.text[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset " + path.string() + " line " +
                               std::to_string(lines.line_numbers[i]) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sotapipe::promptgen
