// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/report.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sotapipe/jsonl.hpp"
#include "sotapipe/promptgen.hpp"
#include "sotapipe/strutil.hpp"

namespace sotapipe::report {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

ordered_json prf_json(const metrics::Prf& p) {
  ordered_json obj;
  obj["precision"] = p.precision;
  obj["recall"] = p.recall;
  obj["f1"] = p.f1;
  return obj;
}

metrics::Prf prf_from_json(const ordered_json& obj) {
  metrics::Prf p;
  p.precision = obj.at("precision").get<double>();
  p.recall = obj.at("recall").get<double>();
  p.f1 = obj.at("f1").get<double>();
  return p;
}

ordered_json field_scores_json(const metrics::FieldScores& fs) {
  ordered_json obj;
  obj["match"] = fs.mode.kind == metrics::MatchModeKind::Exact ? "exact" : "partial";
  obj["threshold"] = fs.mode.threshold;
  for (metrics::Field f : metrics::kAllFields) {
    obj[strutil::to_lower(metrics::field_name(f))] =
        prf_json(fs.fields[static_cast<std::size_t>(f)]);
  }
  obj["overall"] = prf_json(fs.overall);
  return obj;
}

metrics::FieldScores field_scores_from_json(const ordered_json& obj) {
  metrics::FieldScores fs;
  fs.mode.kind = obj.at("match").get<std::string>() == "exact" ? metrics::MatchModeKind::Exact
                                                               : metrics::MatchModeKind::Partial;
  fs.mode.threshold = obj.at("threshold").get<double>();
  for (metrics::Field f : metrics::kAllFields) {
    fs.fields[static_cast<std::size_t>(f)] =
        prf_from_json(obj.at(strutil::to_lower(metrics::field_name(f))));
  }
  fs.overall = prf_from_json(obj.at("overall"));
  return fs;
}

const std::vector<std::string>& cell_metric_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out = {"rouge1", "rouge2", "rougeL", "rougeLsum",
                                    "general_accuracy"};
    for (const char* mode : {"exact", "partial"}) {
      for (const char* field : {"task", "dataset", "metric", "score", "overall"}) {
        for (const char* comp : {"precision", "recall", "f1"}) {
          out.push_back(std::string(mode) + "_" + field + "_" + comp);
        }
      }
    }
    return out;
  }();
  return keys;
}

std::optional<double> cell_metric_value(const CellMetrics& m, const std::string& key) {
  if (key == "rouge1") return m.rouge ? std::optional<double>(m.rouge->rouge1) : std::nullopt;
  if (key == "rouge2") return m.rouge ? std::optional<double>(m.rouge->rouge2) : std::nullopt;
  if (key == "rougeL") return m.rouge ? std::optional<double>(m.rouge->rougeL) : std::nullopt;
  if (key == "rougeLsum") {
    return m.rouge ? std::optional<double>(m.rouge->rougeLsum) : std::nullopt;
  }
  if (key == "general_accuracy") {
    return m.general_accuracy ? std::optional<double>(m.general_accuracy->value) : std::nullopt;
  }
  const bool exact = key.rfind("exact_", 0) == 0;
  const std::optional<metrics::FieldScores>& fs = exact ? m.exact : m.partial;
  if (!fs) return std::nullopt;
  const std::string rest = key.substr(exact ? 6 : 8);
  const std::size_t sep = rest.rfind('_');
  const std::string field = rest.substr(0, sep);
  const std::string comp = rest.substr(sep + 1);
  const metrics::Prf* p = nullptr;
  if (field == "task") p = &fs->fields[0];
  else if (field == "dataset") p = &fs->fields[1];
  else if (field == "metric") p = &fs->fields[2];
  else if (field == "score") p = &fs->fields[3];
  else p = &fs->overall;
  if (comp == "precision") return p->precision;
  if (comp == "recall") return p->recall;
  return p->f1;
}

}  // namespace

EvaluationReport build_report(const std::vector<std::pair<CellKey, CellMetrics>>& results,
                              const std::vector<CellKey>& plan, RunMetadata meta) {
  EvaluationReport report;
  report.meta = std::move(meta);
  for (const CellKey& key : plan) {
    auto it = std::find_if(results.begin(), results.end(),
                           [&](const auto& r) { return r.first == key; });
    if (it == results.end()) {
      report.cells.emplace_back(key, std::nullopt);
      report.warnings.push_back("missing cell: split=" + key.split +
                                " context=" + key.context_kind);
    } else {
      report.cells.emplace_back(key, it->second);
    }
  }
  for (const auto& [key, value] : results) {
    if (std::find(plan.begin(), plan.end(), key) == plan.end()) {
      report.cells.emplace_back(key, value);
      report.warnings.push_back("unplanned cell: split=" + key.split +
                                " context=" + key.context_kind);
    }
  }
  return report;
}

EvaluationReport evaluate(const std::vector<inference::ModelPrediction>& predictions,
                          const corpus::Corpus& corpus, const EvalSettings& settings,
                          RunMetadata meta) {
  meta.template_filter = settings.template_filter;
  meta.partial_threshold = settings.threshold;
  meta.overall_mode =
      settings.overall == metrics::OverallMode::MacroOverFields ? "macro" : "micro";

  const metrics::MatchMode exact_mode{metrics::MatchModeKind::Exact, settings.threshold};
  const metrics::MatchMode partial_mode{metrics::MatchModeKind::Partial, settings.threshold};

  struct Row {
    const inference::ModelPrediction* pred;
    const corpus::PaperRecord* rec;
  };
  std::vector<Row> few_rows;
  std::vector<Row> zero_rows;
  std::vector<std::string> warnings;
  std::size_t train_ignored = 0;
  for (const auto& pred : predictions) {
    if (settings.template_filter != 0 && pred.template_id != settings.template_filter) continue;
    const corpus::PaperRecord* rec = corpus.find(pred.paper_id);
    if (rec == nullptr) {
      warnings.push_back("prediction for unknown paper_id '" + pred.paper_id + "' ignored");
      continue;
    }
    switch (rec->split) {
      case corpus::SplitLabel::Train:
        ++train_ignored;
        break;
      case corpus::SplitLabel::TestFewShot:
        few_rows.push_back(Row{&pred, rec});
        break;
      case corpus::SplitLabel::TestZeroShot:
        zero_rows.push_back(Row{&pred, rec});
        break;
    }
  }
  if (train_ignored > 0) {
    warnings.push_back(std::to_string(train_ignored) +
                       " predictions for train-split papers ignored");
  }

  std::vector<CellKey> plan;
  for (corpus::SplitLabel split :
       {corpus::SplitLabel::TestFewShot, corpus::SplitLabel::TestZeroShot}) {
    const bool present = std::any_of(corpus.records().begin(), corpus.records().end(),
                                     [&](const auto& r) { return r.split == split; });
    if (present) plan.push_back(CellKey{corpus::split_label_name(split), settings.context_kind});
  }

  std::vector<std::pair<CellKey, CellMetrics>> results;
  auto score_cell = [&](const std::vector<Row>& rows, corpus::SplitLabel split) {
    if (rows.empty()) return;
    std::vector<std::string> pred_texts;
    std::vector<std::string> ref_texts;
    std::vector<inference::ParsedPrediction::Kind> kinds;
    std::vector<bool> gold_flags;
    std::vector<metrics::PaperFieldCounts> exact_counts;
    std::vector<metrics::PaperFieldCounts> partial_counts;
    std::set<std::string> papers;
    for (const Row& row : rows) {
      pred_texts.push_back(row.pred->raw);
      ref_texts.push_back(promptgen::serialize_target(row.rec->annotations));
      kinds.push_back(row.pred->parsed.kind);
      gold_flags.push_back(!row.rec->annotations.unanswerable);
      exact_counts.push_back(
          metrics::score_paper(row.pred->parsed, row.rec->annotations, exact_mode));
      partial_counts.push_back(
          metrics::score_paper(row.pred->parsed, row.rec->annotations, partial_mode));
      papers.insert(row.rec->paper_id);
    }
    CellMetrics m;
    m.rouge = metrics::rouge_eval(pred_texts, ref_texts);
    m.general_accuracy = metrics::general_accuracy(kinds, gold_flags);
    m.exact = metrics::aggregate(exact_counts, exact_mode, settings.overall);
    m.partial = metrics::aggregate(partial_counts, partial_mode, settings.overall);
    m.n_papers = papers.size();
    results.emplace_back(CellKey{corpus::split_label_name(split), settings.context_kind}, m);
  };
  score_cell(few_rows, corpus::SplitLabel::TestFewShot);
  score_cell(zero_rows, corpus::SplitLabel::TestZeroShot);

  EvaluationReport report = build_report(results, plan, std::move(meta));
  report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
  return report;
}

std::string to_json(const EvaluationReport& report) {
  ordered_json obj;
  ordered_json meta;
  meta["timestamp"] = report.meta.timestamp;
  meta["config_digest"] = report.meta.config_digest;
  meta["template_filter"] = report.meta.template_filter;
  meta["partial_threshold"] = report.meta.partial_threshold;
  meta["overall_mode"] = report.meta.overall_mode;
  meta["doctaet_patterns"] = report.meta.doctaet_patterns;
  meta["docrec_patterns"] = report.meta.docrec_patterns;
  obj["meta"] = std::move(meta);

  ordered_json cells = ordered_json::array();
  for (const auto& [key, value] : report.cells) {
    ordered_json cell;
    cell["split"] = key.split;
    cell["context_kind"] = key.context_kind;
    if (!value) {
      cell["metrics"] = nullptr;
    } else {
      ordered_json m;
      m["n_papers"] = value->n_papers;
      if (value->rouge) {
        ordered_json r;
        r["rouge1"] = value->rouge->rouge1;
        r["rouge2"] = value->rouge->rouge2;
        r["rougeL"] = value->rouge->rougeL;
        r["rougeLsum"] = value->rouge->rougeLsum;
        m["rouge"] = std::move(r);
      } else {
        m["rouge"] = nullptr;
      }
      if (value->general_accuracy) {
        ordered_json g;
        g["value"] = value->general_accuracy->value;
        g["n_correct"] = value->general_accuracy->n_correct;
        g["n_total"] = value->general_accuracy->n_total;
        m["general_accuracy"] = std::move(g);
      } else {
        m["general_accuracy"] = nullptr;
      }
      m["exact"] = value->exact ? field_scores_json(*value->exact) : ordered_json(nullptr);
      m["partial"] = value->partial ? field_scores_json(*value->partial) : ordered_json(nullptr);
      cell["metrics"] = std::move(m);
    }
    cells.push_back(std::move(cell));
  }
  obj["cells"] = std::move(cells);
  obj["warnings"] = report.warnings;
  return obj.dump(2) + "\n";
}

EvaluationReport from_json(const std::string& text) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("invalid report JSON: ") + e.what());
  }
  EvaluationReport report;
  const ordered_json& meta = obj.at("meta");
  report.meta.timestamp = meta.at("timestamp").get<std::string>();
  report.meta.config_digest = meta.at("config_digest").get<std::string>();
  report.meta.template_filter = meta.at("template_filter").get<int>();
  report.meta.partial_threshold = meta.at("partial_threshold").get<double>();
  report.meta.overall_mode = meta.at("overall_mode").get<std::string>();
  for (const auto& p : meta.at("doctaet_patterns")) {
    report.meta.doctaet_patterns.push_back(p.get<std::string>());
  }
  for (const auto& p : meta.at("docrec_patterns")) {
    report.meta.docrec_patterns.push_back(p.get<std::string>());
  }
  for (const auto& cell : obj.at("cells")) {
    CellKey key;
    key.split = cell.at("split").get<std::string>();
    key.context_kind = cell.at("context_kind").get<std::string>();
    const ordered_json& m = cell.at("metrics");
    if (m.is_null()) {
      report.cells.emplace_back(key, std::nullopt);
      continue;
    }
    CellMetrics metrics_out;
    metrics_out.n_papers = m.at("n_papers").get<std::size_t>();
    if (!m.at("rouge").is_null()) {
      const ordered_json& r = m.at("rouge");
      metrics::RougeScores rouge;
      rouge.rouge1 = r.at("rouge1").get<double>();
      rouge.rouge2 = r.at("rouge2").get<double>();
      rouge.rougeL = r.at("rougeL").get<double>();
      rouge.rougeLsum = r.at("rougeLsum").get<double>();
      metrics_out.rouge = rouge;
    }
    if (!m.at("general_accuracy").is_null()) {
      const ordered_json& g = m.at("general_accuracy");
      metrics::GeneralAccuracy ga;
      ga.value = g.at("value").get<double>();
      ga.n_correct = g.at("n_correct").get<std::size_t>();
      ga.n_total = g.at("n_total").get<std::size_t>();
      metrics_out.general_accuracy = ga;
    }
    if (!m.at("exact").is_null()) metrics_out.exact = field_scores_from_json(m.at("exact"));
    if (!m.at("partial").is_null()) {
      metrics_out.partial = field_scores_from_json(m.at("partial"));
    }
    report.cells.emplace_back(key, std::move(metrics_out));
  }
  for (const auto& w : obj.at("warnings")) report.warnings.push_back(w.get<std::string>());
  return report;
}

std::string to_markdown(const EvaluationReport& report) {
  std::ostringstream out;
  out << "# Evaluation report\n\n";
  if (!report.meta.timestamp.empty()) out << "- Timestamp: " << report.meta.timestamp << "\n";
  if (!report.meta.config_digest.empty()) {
    out << "- Config digest: " << report.meta.config_digest << "\n";
  }
  out << "- Template filter: "
      << (report.meta.template_filter == 0 ? std::string("all")
                                           : std::to_string(report.meta.template_filter))
      << "\n";
  out << "- Partial threshold: " << fmt2(report.meta.partial_threshold) << "\n";
  out << "- Overall mode: " << report.meta.overall_mode << "\n\n";

  // Answer-quality table: rows are context kinds, column groups are splits.
  std::vector<std::string> contexts;
  for (const auto& [key, value] : report.cells) {
    if (std::find(contexts.begin(), contexts.end(), key.context_kind) == contexts.end()) {
      contexts.push_back(key.context_kind);
    }
  }
  auto find_cell = [&](const std::string& split,
                       const std::string& ctx) -> const std::optional<CellMetrics>* {
    for (const auto& [key, value] : report.cells) {
      if (key.split == split && key.context_kind == ctx) return &value;
    }
    return nullptr;
  };
  const std::vector<std::pair<std::string, std::string>> groups = {{"few_shot", "Few-shot"},
                                                                   {"zero_shot", "Zero-shot"}};
  out << "## Answer quality\n\n";
  out << "| Context |";
  for (const auto& [split, label] : groups) {
    for (const char* col : {"Rouge1", "Rouge2", "RougeL", "RougeLsum", "General-Accuracy"}) {
      out << ' ' << label << ' ' << col << " |";
    }
  }
  out << "\n| --- |";
  for (std::size_t i = 0; i < groups.size() * 5; ++i) out << " ---: |";
  out << "\n";
  for (const std::string& ctx : contexts) {
    out << "| " << ctx << " |";
    for (const auto& [split, label] : groups) {
      const std::optional<CellMetrics>* cell = find_cell(split, ctx);
      const bool have = cell != nullptr && cell->has_value() && (*cell)->rouge.has_value();
      if (have) {
        const metrics::RougeScores& r = *(**cell).rouge;
        out << ' ' << fmt2(r.rouge1) << " | " << fmt2(r.rouge2) << " | " << fmt2(r.rougeL)
            << " | " << fmt2(r.rougeLsum) << " |";
      } else {
        out << " n/a | n/a | n/a | n/a |";
      }
      const bool have_ga =
          cell != nullptr && cell->has_value() && (*cell)->general_accuracy.has_value();
      if (have_ga) {
        out << ' ' << fmt2((**cell).general_accuracy->value) << " |";
      } else {
        out << " n/a |";
      }
    }
    out << "\n";
  }

  for (const auto& [mode_label, selector] :
       std::vector<std::pair<std::string, const std::optional<metrics::FieldScores> CellMetrics::*>>{
           {"exact", &CellMetrics::exact}, {"partial", &CellMetrics::partial}}) {
    out << "\n## Extraction (" << mode_label << ")\n\n";
    out << "| Split | Context | Field | Precision | Recall | F1 |\n";
    out << "| --- | --- | --- | ---: | ---: | ---: |\n";
    for (const auto& [key, value] : report.cells) {
      if (!value.has_value() || !((*value).*selector).has_value()) {
        out << "| " << key.split << " | " << key.context_kind
            << " | all | n/a | n/a | n/a |\n";
        continue;
      }
      const metrics::FieldScores& fs = *((*value).*selector);
      auto row = [&](const std::string& field, const metrics::Prf& p) {
        out << "| " << key.split << " | " << key.context_kind << " | " << field << " | "
            << fmt2(p.precision) << " | " << fmt2(p.recall) << " | " << fmt2(p.f1) << " |\n";
      };
      for (metrics::Field f : metrics::kAllFields) {
        row(metrics::field_name(f), fs.fields[static_cast<std::size_t>(f)]);
      }
      row("Overall", fs.overall);
    }
  }

  if (!report.warnings.empty()) {
    out << "\n## Warnings\n\n";
    for (const auto& w : report.warnings) out << "- " << w << "\n";
  }
  return out.str();
}

std::string to_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "split,context_kind,metric,value\n";
  for (const auto& [key, value] : report.cells) {
    for (const std::string& metric_key : cell_metric_keys()) {
      out << key.split << ',' << key.context_kind << ',' << metric_key << ',';
      if (value.has_value()) {
        if (auto v = cell_metric_value(*value, metric_key)) out << fmt2(*v);
      }
      out << '\n';
    }
  }
  return out.str();
}

std::optional<ReportFormat> report_format_from_name(const std::string& name) {
  const std::string lower = strutil::to_lower(name);
  if (lower == "md" || lower == "markdown") return ReportFormat::Markdown;
  if (lower == "csv") return ReportFormat::Csv;
  if (lower == "json") return ReportFormat::Json;
  return std::nullopt;
}

void emit(const EvaluationReport& report, ReportFormat format,
          const std::filesystem::path& path) {
  std::string rendered;
  switch (format) {
    case ReportFormat::Markdown:
      rendered = to_markdown(report);
      break;
    case ReportFormat::Csv:
      rendered = to_csv(report);
      break;
    case ReportFormat::Json:
      rendered = to_json(report);
      break;
  }
  jsonl::write_file(rendered, path);
}

std::string config_digest(const std::string& canonical_config_json) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical_config_json) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sotapipe::report
