// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sotapipe::texflat {

struct FlatTex {
  std::string paper_id;
  std::string source;  // single merged LaTeX document
  std::vector<std::pair<std::string, std::string>> inclusion_log;  // (directive, resolved path)
  std::vector<std::string> warnings;
};

// The unique file containing \documentclass; among several, prefers those
// with \begin{document}; remaining ties break lexicographically with a
// warning. Throws std::runtime_error when no candidate exists.
std::filesystem::path find_main_file(const std::filesystem::path& project_root,
                                     std::vector<std::string>* warnings = nullptr);

// Recursively substitutes \input{X} and \include{X}. Missing targets are
// left in place with a warning; inclusion cycles are fatal.
FlatTex flatten(const std::filesystem::path& project_root, const std::string& paper_id = "");

enum class ConverterKind { External, Fallback };

struct ConverterSpec {
  // Shell command reading LaTeX on stdin and writing plain text on stdout;
  // nullopt selects the builtin fallback stripper.
  std::optional<std::string> command;
};

// The fidelity-path default for external conversion.
inline constexpr const char* kDefaultConverterCommand = "pandoc --to=plain";

struct PlainText {
  std::string paper_id;
  std::string text;
  std::size_t word_count = 0;  // whitespace-delimited tokens
  ConverterKind converter = ConverterKind::Fallback;
};

PlainText to_plain(const FlatTex& flat, const ConverterSpec& converter = {});

// Builtin fallback stripper: drops comments and the preamble, keeps
// mandatory-argument text of markup commands, renders tabular cells
// separated by " | ".
std::string strip_latex(const std::string& source);

// UTF-8 with per-file Latin-1 fallback.
std::string decode_text_file(const std::filesystem::path& path);

}  // namespace sotapipe::texflat
