// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include <json.hpp>

#include "sotapipe/jsonl.hpp"
#include "sotapipe/rng.hpp"
#include "sotapipe/strutil.hpp"

namespace sotapipe::corpus {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_avg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string checked_field(std::string value, const char* name) {
  std::string trimmed = strutil::trim(value);
  if (trimmed.empty()) {
    throw std::invalid_argument(std::string("quadruple field '") + name + "' is empty");
  }
  if (strutil::has_control_chars(trimmed)) {
    throw std::invalid_argument(std::string("quadruple field '") + name +
                                "' contains control characters");
  }
  return trimmed;
}

std::string json_string_field(const ordered_json& obj, const char* key,
                              const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::runtime_error(where + ": missing key '" + key + "'");
  if (!it->is_string()) throw std::runtime_error(where + ": key '" + key + "' must be a string");
  return it->get<std::string>();
}

// Accepts string or number; numbers keep their canonical text form.
std::string annotation_value(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::runtime_error(where + ": missing key '" + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number()) return it->dump();
  throw std::runtime_error(where + ": key '" + key + "' must be a string or number");
}

}  // namespace

std::string split_label_name(SplitLabel split) {
  switch (split) {
    case SplitLabel::Train:
      return "train";
    case SplitLabel::TestFewShot:
      return "few_shot";
    case SplitLabel::TestZeroShot:
      return "zero_shot";
  }
  return "";
}

std::optional<SplitLabel> split_label_from_name(const std::string& name) {
  if (name == "train") return SplitLabel::Train;
  if (name == "few_shot") return SplitLabel::TestFewShot;
  if (name == "zero_shot") return SplitLabel::TestZeroShot;
  return std::nullopt;
}

bool TdmsQuadruple::operator<(const TdmsQuadruple& other) const {
  return std::tie(task, dataset, metric, score) <
         std::tie(other.task, other.dataset, other.metric, other.score);
}

TdmsQuadruple make_quadruple(std::string task, std::string dataset, std::string metric,
                             std::string score) {
  TdmsQuadruple q;
  q.task = checked_field(std::move(task), "Task");
  q.dataset = checked_field(std::move(dataset), "Dataset");
  q.metric = checked_field(std::move(metric), "Metric");
  q.score = checked_field(std::move(score), "Score");
  return q;
}

AnnotationSet AnnotationSet::make_unanswerable() { return AnnotationSet{true, {}}; }

AnnotationSet AnnotationSet::leaderboard(std::vector<TdmsQuadruple> quads) {
  if (quads.empty()) {
    throw std::invalid_argument("leaderboard annotations need at least one quadruple");
  }
  AnnotationSet out;
  out.unanswerable = false;
  for (auto& q : quads) {
    if (std::find(out.quadruples.begin(), out.quadruples.end(), q) == out.quadruples.end()) {
      out.quadruples.push_back(std::move(q));
    }
  }
  return out;
}

Corpus::Corpus(std::vector<PaperRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.paper_id).second) {
      throw std::invalid_argument("duplicate paper_id: " + r.paper_id);
    }
  }
}

const PaperRecord* Corpus::find(const std::string& paper_id) const {
  for (const auto& r : records_) {
    if (r.paper_id == paper_id) return &r;
  }
  return nullptr;
}

Corpus load_manifest(const std::filesystem::path& path) {
  const auto lines = jsonl::read_lines(path);
  const auto base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::vector<PaperRecord> records;
  records.reserve(lines.text.size());
  for (std::size_t i = 0; i < lines.text.size(); ++i) {
    const std::string where = "manifest " + path.string() + " line " +
                              std::to_string(lines.line_numbers[i]);
    ordered_json obj;
    try {
      obj = ordered_json::parse(lines.text[i]);
    } catch (const ordered_json::parse_error& e) {
      throw std::runtime_error(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw std::runtime_error(where + ": expected a JSON object");

    PaperRecord rec;
    rec.paper_id = strutil::trim(json_string_field(obj, "paper_id", where));
    if (rec.paper_id.empty()) throw std::runtime_error(where + ": paper_id is empty");
    rec.title = json_string_field(obj, "title", where);

    const std::string split_name = json_string_field(obj, "split", where);
    auto split = split_label_from_name(split_name);
    if (!split) throw std::runtime_error(where + ": unknown split '" + split_name + "'");
    rec.split = *split;

    std::filesystem::path latex_root = json_string_field(obj, "latex_root", where);
    rec.latex_root = latex_root.is_absolute() ? latex_root : base_dir / latex_root;

    auto ann_it = obj.find("annotations");
    if (ann_it == obj.end()) throw std::runtime_error(where + ": missing key 'annotations'");
    if (ann_it->is_string()) {
      if (strutil::to_lower(ann_it->get<std::string>()) != "unanswerable") {
        throw std::runtime_error(where + ": annotations string must be \"unanswerable\"");
      }
      rec.annotations = AnnotationSet::make_unanswerable();
    } else if (ann_it->is_array()) {
      if (ann_it->empty()) {
        throw std::runtime_error(where + ": annotations array must be non-empty");
      }
      std::vector<TdmsQuadruple> quads;
      for (const auto& entry : *ann_it) {
        if (!entry.is_object()) {
          throw std::runtime_error(where + ": annotations entries must be objects");
        }
        try {
          quads.push_back(make_quadruple(
              annotation_value(entry, "Task", where), annotation_value(entry, "Dataset", where),
              annotation_value(entry, "Metric", where), annotation_value(entry, "Score", where)));
        } catch (const std::invalid_argument& e) {
          throw std::runtime_error(where + ": " + e.what());
        }
      }
      rec.annotations = AnnotationSet::leaderboard(std::move(quads));
    } else {
      throw std::runtime_error(where + ": annotations must be \"unanswerable\" or an array");
    }

    if (auto cat_it = obj.find("categories"); cat_it != obj.end()) {
      if (!cat_it->is_array()) throw std::runtime_error(where + ": categories must be an array");
      for (const auto& c : *cat_it) {
        if (!c.is_string()) {
          throw std::runtime_error(where + ": categories entries must be strings");
        }
        rec.categories.push_back(c.get<std::string>());
      }
    }
    records.push_back(std::move(rec));
  }
  try {
    return Corpus(std::move(records));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
}

void save_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(corpus.size());
  for (const auto& rec : corpus.records()) {
    ordered_json obj;
    obj["paper_id"] = rec.paper_id;
    obj["title"] = rec.title;
    obj["split"] = split_label_name(rec.split);
    obj["latex_root"] = rec.latex_root.generic_string();
    if (rec.annotations.unanswerable) {
      obj["annotations"] = "unanswerable";
    } else {
      ordered_json arr = ordered_json::array();
      for (const auto& q : rec.annotations.quadruples) {
        ordered_json e;
        e["Task"] = q.task;
        e["Dataset"] = q.dataset;
        e["Metric"] = q.metric;
        e["Score"] = q.score;
        arr.push_back(std::move(e));
      }
      obj["annotations"] = std::move(arr);
    }
    if (!rec.categories.empty()) obj["categories"] = rec.categories;
    lines.push_back(obj.dump());
  }
  jsonl::write_lines(lines, path);
}

namespace {

CorpusStats stats_over(const std::vector<const PaperRecord*>& records) {
  CorpusStats stats;
  std::set<std::tuple<std::string, std::string, std::string>> tdm;
  std::set<std::string> tasks;
  std::set<std::string> datasets;
  std::set<std::string> metrics;
  for (const PaperRecord* rec : records) {
    if (rec->annotations.unanswerable) {
      ++stats.papers_without;
      continue;
    }
    ++stats.papers_with_leaderboards;
    for (const auto& q : rec->annotations.quadruples) {
      ++stats.total_tdm_triples;
      tdm.emplace(q.task, q.dataset, q.metric);
      tasks.insert(q.task);
      datasets.insert(q.dataset);
      metrics.insert(q.metric);
    }
  }
  stats.distinct_tdm_triples = tdm.size();
  stats.distinct_tasks = tasks.size();
  stats.distinct_datasets = datasets.size();
  stats.distinct_metrics = metrics.size();
  if (stats.papers_with_leaderboards > 0) {
    stats.avg_tdm_per_paper = static_cast<double>(stats.total_tdm_triples) /
                              static_cast<double>(stats.papers_with_leaderboards);
    stats.avg_tdms_per_paper = stats.avg_tdm_per_paper;
  }
  return stats;
}

}  // namespace

CorpusStats compute_stats(const Corpus& corpus, SplitLabel split) {
  std::vector<const PaperRecord*> selected;
  for (const auto& rec : corpus.records()) {
    if (rec.split == split) selected.push_back(&rec);
  }
  return stats_over(selected);
}

CorpusStats compute_stats(const Corpus& corpus) {
  std::vector<const PaperRecord*> selected;
  for (const auto& rec : corpus.records()) selected.push_back(&rec);
  return stats_over(selected);
}

namespace {

struct StatRow {
  const char* label;
  const char* key;
  std::string train;
  std::string few;
  std::string zero;
};

std::vector<StatRow> stat_rows(const CorpusStats& train, const CorpusStats& few_shot,
                               const CorpusStats& zero_shot) {
  auto n = [](std::size_t v) { return std::to_string(v); };
  return {
      {"Papers with leaderboards", "papers_with_leaderboards",
       n(train.papers_with_leaderboards), n(few_shot.papers_with_leaderboards),
       n(zero_shot.papers_with_leaderboards)},
      {"Papers without leaderboards", "papers_without", n(train.papers_without),
       n(few_shot.papers_without), n(zero_shot.papers_without)},
      {"Total TDM triples", "total_tdm_triples", n(train.total_tdm_triples),
       n(few_shot.total_tdm_triples), n(zero_shot.total_tdm_triples)},
      {"Distinct TDM triples", "distinct_tdm_triples", n(train.distinct_tdm_triples),
       n(few_shot.distinct_tdm_triples), n(zero_shot.distinct_tdm_triples)},
      {"Distinct tasks", "distinct_tasks", n(train.distinct_tasks), n(few_shot.distinct_tasks),
       n(zero_shot.distinct_tasks)},
      {"Distinct datasets", "distinct_datasets", n(train.distinct_datasets),
       n(few_shot.distinct_datasets), n(zero_shot.distinct_datasets)},
      {"Distinct metrics", "distinct_metrics", n(train.distinct_metrics),
       n(few_shot.distinct_metrics), n(zero_shot.distinct_metrics)},
      {"Avg TDM per paper", "avg_tdm_per_paper", format_avg(train.avg_tdm_per_paper),
       format_avg(few_shot.avg_tdm_per_paper), format_avg(zero_shot.avg_tdm_per_paper)},
      {"Avg TDMS per paper", "avg_tdms_per_paper", format_avg(train.avg_tdms_per_paper),
       format_avg(few_shot.avg_tdms_per_paper), format_avg(zero_shot.avg_tdms_per_paper)},
  };
}

}  // namespace

std::string stats_markdown(const CorpusStats& train, const CorpusStats& few_shot,
                           const CorpusStats& zero_shot) {
  std::ostringstream out;
  out << "| Statistic | Train | Few-shot | Zero-shot |\n";
  out << "| --- | ---: | ---: | ---: |\n";
  for (const auto& row : stat_rows(train, few_shot, zero_shot)) {
    out << "| " << row.label << " | " << row.train << " | " << row.few << " | " << row.zero
        << " |\n";
  }
  return out.str();
}

std::string stats_csv(const CorpusStats& train, const CorpusStats& few_shot,
                      const CorpusStats& zero_shot) {
  std::ostringstream out;
  out << "statistic,train,few_shot,zero_shot\n";
  for (const auto& row : stat_rows(train, few_shot, zero_shot)) {
    out << row.key << ',' << row.train << ',' << row.few << ',' << row.zero << '\n';
  }
  return out.str();
}

bool CategoryFilter::matches(const PaperRecord& record) const {
  for (const auto& category : record.categories) {
    for (const auto& prefix : exclude_prefixes) {
      if (category.rfind(prefix, 0) == 0) return false;
    }
  }
  if (include_prefixes.empty()) return true;
  for (const auto& category : record.categories) {
    for (const auto& prefix : include_prefixes) {
      if (category.rfind(prefix, 0) == 0) return true;
    }
  }
  return false;
}

std::vector<PaperRecord> select_unanswerable_pool(const std::vector<PaperRecord>& records,
                                                  const CategoryFilter& filter,
                                                  std::uint64_t seed, std::size_t n) {
  std::vector<PaperRecord> pool;
  for (const auto& rec : records) {
    if (filter.matches(rec)) pool.push_back(rec);
  }
  if (pool.size() < n) {
    throw std::runtime_error("pool size " + std::to_string(pool.size()) + " < requested " +
                             std::to_string(n));
  }
  // Canonical order first so selection does not depend on input order.
  std::sort(pool.begin(), pool.end(),
            [](const PaperRecord& a, const PaperRecord& b) { return a.paper_id < b.paper_id; });
  std::mt19937_64 gen(rng::mix(seed));
  rng::shuffle(pool, gen);
  pool.resize(n);
  std::sort(pool.begin(), pool.end(),
            [](const PaperRecord& a, const PaperRecord& b) { return a.paper_id < b.paper_id; });
  for (auto& rec : pool) rec.annotations = AnnotationSet::make_unanswerable();
  return pool;
}

}  // namespace sotapipe::corpus
