// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <stdexcept>
#include <unordered_map>

#include "sotapipe/strutil.hpp"

namespace sotapipe::metrics {

namespace {

// n-gram key with a separator that cannot occur inside a token.
std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                          int n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Positions in `ref` matched by one canonical LCS against `pred`.
std::vector<std::size_t> lcs_ref_positions(const std::vector<std::string>& ref,
                                           const std::vector<std::string>& pred) {
  if (ref.empty() || pred.empty()) return {};
  const std::size_t n = ref.size();
  const std::size_t m = pred.size();
  std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (ref[i - 1] == pred[j - 1]) {
        dp[i][j] = dp[i - 1][j - 1] + 1;
      } else {
        dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
      }
    }
  }
  std::vector<std::size_t> positions;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 && j > 0) {
    if (ref[i - 1] == pred[j - 1] && dp[i][j] == dp[i - 1][j - 1] + 1) {
      positions.push_back(i - 1);
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(positions.begin(), positions.end());
  return positions;
}

// Sentence boundaries: newline, or period followed by whitespace.
std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\n') {
      if (!current.empty()) sentences.push_back(current);
      current.clear();
      continue;
    }
    current.push_back(c);
    if (c == '.' && i + 1 < text.size() &&
        std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      sentences.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(current);
  return sentences;
}

std::size_t checked_sizes(const std::vector<std::vector<std::string>>& sentences) {
  std::size_t total = 0;
  for (const auto& s : sentences) total += s.size();
  return total;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string normalize_string(const std::string& text) {
  return strutil::collapse_whitespace(strutil::to_lower(text));
}

Prf prf_from_counts(double matched, double n_pred, double n_gold) {
  Prf out;
  out.precision = n_pred > 0 ? 100.0 * matched / n_pred : 0.0;
  out.recall = n_gold > 0 ? 100.0 * matched / n_gold : 0.0;
  out.f1 = (out.precision + out.recall) > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

Prf rouge_n(const std::vector<std::string>& pred_tokens,
            const std::vector<std::string>& ref_tokens, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n in {1, 2}");
  const std::size_t np =
      pred_tokens.size() >= static_cast<std::size_t>(n) ? pred_tokens.size() - n + 1 : 0;
  const std::size_t nr =
      ref_tokens.size() >= static_cast<std::size_t>(n) ? ref_tokens.size() - n + 1 : 0;
  if (np == 0 && nr == 0) {
    // No n-grams on either side; identical token sequences still score 100.
    double v = pred_tokens == ref_tokens ? 100.0 : 0.0;
    return Prf{v, v, v};
  }
  if (np == 0 || nr == 0) return Prf{};
  auto pred_grams = ngram_counts(pred_tokens, n);
  auto ref_grams = ngram_counts(ref_tokens, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : ref_grams) {
    auto it = pred_grams.find(gram);
    if (it != pred_grams.end()) overlap += std::min(count, it->second);
  }
  return prf_from_counts(static_cast<double>(overlap), static_cast<double>(np),
                         static_cast<double>(nr));
}

Prf rouge_l(const std::vector<std::string>& pred_tokens,
            const std::vector<std::string>& ref_tokens) {
  if (pred_tokens.empty() && ref_tokens.empty()) return Prf{100.0, 100.0, 100.0};
  if (pred_tokens.empty() || ref_tokens.empty()) return Prf{};
  std::size_t lcs = lcs_length(pred_tokens, ref_tokens);
  return prf_from_counts(static_cast<double>(lcs), static_cast<double>(pred_tokens.size()),
                         static_cast<double>(ref_tokens.size()));
}

Prf rouge_lsum(const std::string& pred_text, const std::string& ref_text) {
  std::vector<std::vector<std::string>> pred_sents;
  for (const auto& s : split_sentences(pred_text)) {
    auto tokens = tokenize(s);
    if (!tokens.empty()) pred_sents.push_back(std::move(tokens));
  }
  std::vector<std::vector<std::string>> ref_sents;
  for (const auto& s : split_sentences(ref_text)) {
    auto tokens = tokenize(s);
    if (!tokens.empty()) ref_sents.push_back(std::move(tokens));
  }
  const std::size_t total_pred = checked_sizes(pred_sents);
  const std::size_t total_ref = checked_sizes(ref_sents);
  if (total_pred == 0 && total_ref == 0) {
    double v = tokenize(pred_text) == tokenize(ref_text) ? 100.0 : 0.0;
    return Prf{v, v, v};
  }
  if (total_pred == 0 || total_ref == 0) return Prf{};

  // Remaining per-token budgets keep a token from being credited more often
  // than it occurs on either side.
  std::unordered_map<std::string, std::size_t> pred_budget;
  for (const auto& s : pred_sents)
    for (const auto& t : s) ++pred_budget[t];
  std::unordered_map<std::string, std::size_t> ref_budget;
  for (const auto& s : ref_sents)
    for (const auto& t : s) ++ref_budget[t];

  std::size_t hits = 0;
  for (const auto& ref_sent : ref_sents) {
    std::vector<bool> in_union(ref_sent.size(), false);
    for (const auto& pred_sent : pred_sents) {
      for (std::size_t pos : lcs_ref_positions(ref_sent, pred_sent)) in_union[pos] = true;
    }
    for (std::size_t pos = 0; pos < ref_sent.size(); ++pos) {
      if (!in_union[pos]) continue;
      const std::string& token = ref_sent[pos];
      auto pit = pred_budget.find(token);
      auto rit = ref_budget.find(token);
      if (pit != pred_budget.end() && pit->second > 0 && rit != ref_budget.end() &&
          rit->second > 0) {
        ++hits;
        --pit->second;
        --rit->second;
      }
    }
  }
  return prf_from_counts(static_cast<double>(hits), static_cast<double>(total_pred),
                         static_cast<double>(total_ref));
}

double fuzzy_ratio(const std::string& a, const std::string& b) {
  const std::string na = normalize_string(a);
  const std::string nb = normalize_string(b);
  if (na.empty() && nb.empty()) return 100.0;
  if (na.empty() || nb.empty()) return 0.0;
  // Character-level LCS, two-row DP.
  std::vector<std::size_t> prev(nb.size() + 1, 0);
  std::vector<std::size_t> cur(nb.size() + 1, 0);
  for (std::size_t i = 1; i <= na.size(); ++i) {
    for (std::size_t j = 1; j <= nb.size(); ++j) {
      if (na[i - 1] == nb[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[nb.size()]);
  return 200.0 * lcs / static_cast<double>(na.size() + nb.size());
}

std::size_t match_field(const std::vector<std::string>& pred_values,
                        const std::vector<std::string>& gold_values, const MatchMode& mode) {
  if (pred_values.empty() || gold_values.empty()) return 0;
  std::vector<std::vector<bool>> compatible(pred_values.size(),
                                            std::vector<bool>(gold_values.size(), false));
  for (std::size_t i = 0; i < pred_values.size(); ++i) {
    for (std::size_t j = 0; j < gold_values.size(); ++j) {
      if (mode.kind == MatchModeKind::Exact) {
        compatible[i][j] = normalize_string(pred_values[i]) == normalize_string(gold_values[j]);
      } else {
        compatible[i][j] = fuzzy_ratio(pred_values[i], gold_values[j]) >= mode.threshold;
      }
    }
  }
  // Kuhn's augmenting paths; exact maximum cardinality on these small graphs.
  std::vector<int> gold_match(gold_values.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> try_augment =
      [&](std::size_t i, std::vector<bool>& visited) -> bool {
    for (std::size_t j = 0; j < gold_values.size(); ++j) {
      if (!compatible[i][j] || visited[j]) continue;
      visited[j] = true;
      if (gold_match[j] < 0 ||
          try_augment(static_cast<std::size_t>(gold_match[j]), visited)) {
        gold_match[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  std::size_t matched = 0;
  for (std::size_t i = 0; i < pred_values.size(); ++i) {
    std::vector<bool> visited(gold_values.size(), false);
    if (try_augment(i, visited)) ++matched;
  }
  return matched;
}

std::string field_name(Field field) {
  switch (field) {
    case Field::Task:
      return "Task";
    case Field::Dataset:
      return "Dataset";
    case Field::Metric:
      return "Metric";
    case Field::Score:
      return "Score";
  }
  return "";
}

PaperFieldCounts score_paper(const inference::ParsedPrediction& pred,
                             const corpus::AnnotationSet& gold, const MatchMode& mode) {
  PaperFieldCounts out{};
  const std::size_t n_gold = gold.unanswerable ? 0 : gold.quadruples.size();
  for (auto& counts : out) counts.n_gold = n_gold;
  if (pred.kind != inference::ParsedPrediction::Kind::Answerable) return out;

  const std::size_t n_pred = pred.quadruples.size();
  std::array<std::vector<std::string>, 4> pred_values;
  std::array<std::vector<std::string>, 4> gold_values;
  auto project = [](const corpus::TdmsQuadruple& q, Field f) -> const std::string& {
    switch (f) {
      case Field::Task:
        return q.task;
      case Field::Dataset:
        return q.dataset;
      case Field::Metric:
        return q.metric;
      default:
        return q.score;
    }
  };
  for (Field f : kAllFields) {
    auto idx = static_cast<std::size_t>(f);
    for (const auto& q : pred.quadruples) pred_values[idx].push_back(project(q, f));
    if (!gold.unanswerable) {
      for (const auto& q : gold.quadruples) gold_values[idx].push_back(project(q, f));
    }
    out[idx].n_pred = n_pred;
    out[idx].matched = match_field(pred_values[idx], gold_values[idx], mode);
  }
  return out;
}

FieldScores aggregate(const std::vector<PaperFieldCounts>& per_paper, const MatchMode& mode,
                      OverallMode overall_mode) {
  FieldScores out;
  out.mode = mode;
  std::array<FieldCounts, 4> pooled{};
  for (const auto& paper : per_paper) {
    for (std::size_t f = 0; f < 4; ++f) {
      pooled[f].matched += paper[f].matched;
      pooled[f].n_pred += paper[f].n_pred;
      pooled[f].n_gold += paper[f].n_gold;
    }
  }
  for (std::size_t f = 0; f < 4; ++f) {
    out.fields[f] = prf_from_counts(static_cast<double>(pooled[f].matched),
                                    static_cast<double>(pooled[f].n_pred),
                                    static_cast<double>(pooled[f].n_gold));
  }
  if (overall_mode == OverallMode::MacroOverFields) {
    for (const Prf& p : out.fields) {
      out.overall.precision += p.precision / 4.0;
      out.overall.recall += p.recall / 4.0;
      out.overall.f1 += p.f1 / 4.0;
    }
  } else {
    FieldCounts total{};
    for (const auto& c : pooled) {
      total.matched += c.matched;
      total.n_pred += c.n_pred;
      total.n_gold += c.n_gold;
    }
    out.overall = prf_from_counts(static_cast<double>(total.matched),
                                  static_cast<double>(total.n_pred),
                                  static_cast<double>(total.n_gold));
  }
  return out;
}

GeneralAccuracy general_accuracy(const std::vector<inference::ParsedPrediction::Kind>& preds,
                                 const std::vector<bool>& gold_has_leaderboard) {
  if (preds.size() != gold_has_leaderboard.size()) {
    throw std::invalid_argument("general_accuracy: prediction/gold size mismatch");
  }
  GeneralAccuracy out;
  out.n_total = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool correct =
        gold_has_leaderboard[i]
            ? preds[i] == inference::ParsedPrediction::Kind::Answerable
            : preds[i] == inference::ParsedPrediction::Kind::Unanswerable;
    if (correct) ++out.n_correct;
  }
  out.value = out.n_total > 0
                  ? 100.0 * static_cast<double>(out.n_correct) / static_cast<double>(out.n_total)
                  : 0.0;
  return out;
}

RougeScores rouge_eval(const std::vector<std::string>& pred_texts,
                       const std::vector<std::string>& ref_texts) {
  if (pred_texts.size() != ref_texts.size()) {
    throw std::invalid_argument("rouge_eval: prediction/reference size mismatch");
  }
  RougeScores out;
  if (pred_texts.empty()) return out;
  for (std::size_t i = 0; i < pred_texts.size(); ++i) {
    const auto pred_tokens = tokenize(pred_texts[i]);
    const auto ref_tokens = tokenize(ref_texts[i]);
    out.rouge1 += rouge_n(pred_tokens, ref_tokens, 1).f1;
    out.rouge2 += rouge_n(pred_tokens, ref_tokens, 2).f1;
    out.rougeL += rouge_l(pred_tokens, ref_tokens).f1;
    out.rougeLsum += rouge_lsum(pred_texts[i], ref_texts[i]).f1;
  }
  const double n = static_cast<double>(pred_texts.size());
  out.rouge1 /= n;
  out.rouge2 /= n;
  out.rougeL /= n;
  out.rougeLsum /= n;
  return out;
}

}  // namespace sotapipe::metrics
