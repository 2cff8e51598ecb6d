// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sotapipe/texflat.hpp"

namespace sotapipe::context {

enum class ContextKind { DocTAET, DocREC, DocFULL };

// Word budget used when clipping contexts for prompt assembly.
inline constexpr std::size_t kDefaultTruncationWords = 2400;

std::string context_kind_name(ContextKind kind);
std::optional<ContextKind> context_kind_from_name(const std::string& name);  // case-insensitive

struct HeadingPatternSet {
  ContextKind kind = ContextKind::DocTAET;
  std::vector<std::string> patterns;  // case-insensitive substring patterns
};

HeadingPatternSet default_doctaet_patterns();
HeadingPatternSet default_docrec_patterns();

// True iff the lowercased, whitespace-collapsed heading contains any pattern
// as a substring.
bool match_section_heading(const std::string& heading, const HeadingPatternSet& patterns);

struct ContextDocument {
  std::string paper_id;
  ContextKind kind = ContextKind::DocFULL;
  std::string text;
  std::size_t word_count = 0;
  std::vector<std::string> sections_used;  // empty for DocFULL
  std::vector<std::string> warnings;
};

struct ExtractOptions {
  texflat::ConverterSpec converter;  // default: builtin fallback
  HeadingPatternSet doctaet_patterns = default_doctaet_patterns();
  HeadingPatternSet docrec_patterns = default_docrec_patterns();
};

// Title + abstract + experimental-setup section bodies + every tabular
// environment in the document.
ContextDocument extract_doctaet(const texflat::FlatTex& flat, const ExtractOptions& options = {});

// Bodies of sections matching the results/experiments/conclusions patterns,
// tables kept inline.
ContextDocument extract_docrec(const texflat::FlatTex& flat, const ExtractOptions& options = {});

// Whole-document plain text.
ContextDocument extract_docfull(const texflat::FlatTex& flat, const ExtractOptions& options = {});

ContextDocument extract(const texflat::FlatTex& flat, ContextKind kind,
                        const ExtractOptions& options = {});

// Keeps the first budget_words whitespace-delimited tokens, preserving the
// original byte prefix; records a truncation warning when clipping occurred.
ContextDocument truncate_context(const ContextDocument& doc, std::size_t budget_words);

// Context dump line: paper_id, kind, text, word_count, sections_used.
std::string to_jsonl_line(const ContextDocument& doc);
ContextDocument from_jsonl_line(const std::string& line);

}  // namespace sotapipe::context
