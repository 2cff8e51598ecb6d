// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/context.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "sotapipe/strutil.hpp"
#include "tex_scan.hpp"

namespace sotapipe::context {

namespace {

using ordered_json = nlohmann::ordered_json;

struct SectionInfo {
  std::string heading_plain;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;
  std::size_t cmd_pos = 0;
  int level = 1;
};

struct DocModel {
  std::string decommented;
  std::string title_latex;
  std::vector<std::string> abstracts;  // environment bodies, LaTeX
  std::vector<SectionInfo> sections;
  std::size_t doc_end = 0;  // position of \end{document}, or text size
};

std::vector<std::string> abstract_bodies(const std::string& src) {
  std::vector<std::string> out;
  const std::string begin_token = "\\begin{abstract}";
  const std::string end_token = "\\end{abstract}";
  std::size_t i = 0;
  while ((i = src.find(begin_token, i)) != std::string::npos) {
    const std::size_t body_start = i + begin_token.size();
    const std::size_t end_pos = src.find(end_token, body_start);
    if (end_pos == std::string::npos) {
      out.push_back(src.substr(body_start));
      break;
    }
    out.push_back(src.substr(body_start, end_pos - body_start));
    i = end_pos + end_token.size();
  }
  return out;
}

DocModel build_model(const texflat::FlatTex& flat) {
  DocModel model;
  model.decommented = texscan::remove_comments(flat.source);
  const std::string& src = model.decommented;

  const std::size_t begin_doc = src.find("\\begin{document}");
  model.title_latex = texscan::find_braced_arg(
      begin_doc == std::string::npos ? std::string_view(src)
                                     : std::string_view(src).substr(0, begin_doc),
      "title");
  if (model.title_latex.empty() && begin_doc != std::string::npos) {
    model.title_latex = texscan::find_braced_arg(src, "title");
  }
  model.abstracts = abstract_bodies(src);

  const std::size_t end_doc = src.find("\\end{document}");
  model.doc_end = end_doc == std::string::npos ? src.size() : end_doc;

  auto cmds = texscan::find_sections(src);
  for (std::size_t k = 0; k < cmds.size(); ++k) {
    if (cmds[k].cmd_pos >= model.doc_end) continue;
    SectionInfo info;
    info.cmd_pos = cmds[k].cmd_pos;
    info.level = cmds[k].level;
    info.body_begin = cmds[k].body_start;
    info.body_end = model.doc_end;
    for (std::size_t j = k + 1; j < cmds.size(); ++j) {
      if (cmds[j].level <= cmds[k].level) {
        info.body_end = std::min(cmds[j].cmd_pos, model.doc_end);
        break;
      }
    }
    info.heading_plain =
        strutil::collapse_whitespace(texflat::strip_latex(cmds[k].heading));
    model.sections.push_back(std::move(info));
  }
  return model;
}

// Removes the given [begin, end) ranges from text.
std::string erase_ranges(std::string_view text,
                         const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (const auto& [begin, end] : ranges) {
    if (begin > pos) out.append(text.substr(pos, begin - pos));
    pos = std::max(pos, end);
  }
  if (pos < text.size()) out.append(text.substr(pos));
  return out;
}

std::string join_pieces(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& piece : pieces) {
    std::string trimmed = strutil::trim(piece);
    if (trimmed.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += trimmed;
  }
  return out;
}

// Matched sections with nested-duplicate suppression: a matched section whose
// command lies inside an already-included body is skipped.
std::vector<const SectionInfo*> matched_sections(const DocModel& model,
                                                 const HeadingPatternSet& patterns) {
  std::vector<const SectionInfo*> out;
  std::size_t covered_until = 0;
  for (const auto& sec : model.sections) {
    if (!match_section_heading(sec.heading_plain, patterns)) continue;
    if (sec.cmd_pos < covered_until) continue;
    out.push_back(&sec);
    covered_until = sec.body_end;
  }
  return out;
}

ContextDocument convert_assembled(const texflat::FlatTex& flat, ContextKind kind,
                                  const std::string& assembled,
                                  const texflat::ConverterSpec& converter) {
  texflat::FlatTex fragment;
  fragment.paper_id = flat.paper_id;
  fragment.source = assembled;
  const texflat::PlainText plain = texflat::to_plain(fragment, converter);
  ContextDocument doc;
  doc.paper_id = flat.paper_id;
  doc.kind = kind;
  doc.text = plain.text;
  doc.word_count = plain.word_count;
  return doc;
}

}  // namespace

std::string context_kind_name(ContextKind kind) {
  switch (kind) {
    case ContextKind::DocTAET:
      return "DocTAET";
    case ContextKind::DocREC:
      return "DocREC";
    case ContextKind::DocFULL:
      return "DocFULL";
  }
  return "";
}

std::optional<ContextKind> context_kind_from_name(const std::string& name) {
  const std::string lower = strutil::to_lower(name);
  if (lower == "doctaet") return ContextKind::DocTAET;
  if (lower == "docrec") return ContextKind::DocREC;
  if (lower == "docfull") return ContextKind::DocFULL;
  return std::nullopt;
}

HeadingPatternSet default_doctaet_patterns() {
  return HeadingPatternSet{
      ContextKind::DocTAET,
      {"experiment", "setup", "implementation detail", "training detail", "evaluation"}};
}

HeadingPatternSet default_docrec_patterns() {
  return HeadingPatternSet{ContextKind::DocREC, {"result", "experiment", "conclusion"}};
}

bool match_section_heading(const std::string& heading, const HeadingPatternSet& patterns) {
  const std::string norm = strutil::collapse_whitespace(strutil::to_lower(heading));
  for (const auto& pattern : patterns.patterns) {
    if (norm.find(pattern) != std::string::npos) return true;
  }
  return false;
}

ContextDocument extract_doctaet(const texflat::FlatTex& flat, const ExtractOptions& options) {
  const DocModel model = build_model(flat);
  std::vector<std::string> warnings;
  std::vector<std::string> pieces;

  if (model.title_latex.empty()) {
    warnings.push_back("no title found");
  } else {
    pieces.push_back(model.title_latex);
  }
  if (model.abstracts.empty()) {
    warnings.push_back("no abstract found");
  } else {
    for (const auto& a : model.abstracts) pieces.push_back(a);
  }

  const auto matched = matched_sections(model, options.doctaet_patterns);
  std::vector<std::string> sections_used;
  for (const SectionInfo* sec : matched) {
    std::string_view body = std::string_view(model.decommented)
                                .substr(sec->body_begin, sec->body_end - sec->body_begin);
    // Tables move to the dedicated block below.
    pieces.push_back(erase_ranges(body, texscan::find_environments(body, "tabular")));
    sections_used.push_back(sec->heading_plain);
  }
  if (matched.empty()) warnings.push_back("no sections matched DocTAET patterns");

  std::string_view in_doc = std::string_view(model.decommented).substr(0, model.doc_end);
  for (const auto& [begin, end] : texscan::find_environments(in_doc, "tabular")) {
    pieces.push_back(std::string(in_doc.substr(begin, end - begin)));
  }

  ContextDocument doc =
      convert_assembled(flat, ContextKind::DocTAET, join_pieces(pieces), options.converter);
  doc.sections_used = std::move(sections_used);
  doc.warnings = std::move(warnings);
  return doc;
}

ContextDocument extract_docrec(const texflat::FlatTex& flat, const ExtractOptions& options) {
  const DocModel model = build_model(flat);
  std::vector<std::string> warnings;
  std::vector<std::string> pieces;
  std::vector<std::string> sections_used;
  for (const SectionInfo* sec : matched_sections(model, options.docrec_patterns)) {
    pieces.push_back(model.decommented.substr(sec->body_begin,
                                              sec->body_end - sec->body_begin));
    sections_used.push_back(sec->heading_plain);
  }
  if (pieces.empty()) warnings.push_back("no sections matched DocREC patterns");

  ContextDocument doc =
      convert_assembled(flat, ContextKind::DocREC, join_pieces(pieces), options.converter);
  doc.sections_used = std::move(sections_used);
  doc.warnings = std::move(warnings);
  return doc;
}

ContextDocument extract_docfull(const texflat::FlatTex& flat, const ExtractOptions& options) {
  const texflat::PlainText plain = texflat::to_plain(flat, options.converter);
  ContextDocument doc;
  doc.paper_id = flat.paper_id;
  doc.kind = ContextKind::DocFULL;
  doc.text = plain.text;
  doc.word_count = plain.word_count;
  return doc;
}

ContextDocument extract(const texflat::FlatTex& flat, ContextKind kind,
                        const ExtractOptions& options) {
  switch (kind) {
    case ContextKind::DocTAET:
      return extract_doctaet(flat, options);
    case ContextKind::DocREC:
      return extract_docrec(flat, options);
    case ContextKind::DocFULL:
      return extract_docfull(flat, options);
  }
  throw std::invalid_argument("unknown context kind");
}

ContextDocument truncate_context(const ContextDocument& doc, std::size_t budget_words) {
  if (doc.word_count <= budget_words) return doc;
  const std::string& text = doc.text;
  std::size_t i = 0;
  std::size_t words = 0;
  while (i < text.size() && words < budget_words) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    ++words;
  }
  ContextDocument out = doc;
  out.text = text.substr(0, i);
  out.word_count = words;
  out.warnings.push_back("context truncated to " + std::to_string(words) + " words (was " +
                         std::to_string(doc.word_count) + ")");
  return out;
}

std::string to_jsonl_line(const ContextDocument& doc) {
  ordered_json obj;
  obj["paper_id"] = doc.paper_id;
  obj["kind"] = context_kind_name(doc.kind);
  obj["text"] = doc.text;
  obj["word_count"] = doc.word_count;
  obj["sections_used"] = doc.sections_used;
  return obj.dump();
}

ContextDocument from_jsonl_line(const std::string& line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("invalid context line: ") + e.what());
  }
  if (!obj.is_object()) throw std::runtime_error("invalid context line: expected an object");
  ContextDocument doc;
  doc.paper_id = obj.at("paper_id").get<std::string>();
  const std::string kind_name = obj.at("kind").get<std::string>();
  auto kind = context_kind_from_name(kind_name);
  if (!kind) throw std::runtime_error("unknown context kind '" + kind_name + "'");
  doc.kind = *kind;
  doc.text = obj.at("text").get<std::string>();
  doc.word_count = obj.at("word_count").get<std::size_t>();
  if (auto it = obj.find("sections_used"); it != obj.end()) {
    for (const auto& s : *it) doc.sections_used.push_back(s.get<std::string>());
  }
  return doc;
}

}  // namespace sotapipe::context
