// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sotapipe::texscan {

// Index of the first unescaped '%' in a single line, or npos. A '%' is
// escaped iff preceded by an odd run of backslashes.
inline std::size_t comment_start(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '%') continue;
    std::size_t backslashes = 0;
    while (backslashes < i && line[i - 1 - backslashes] == '\\') ++backslashes;
    if (backslashes % 2 == 0) return i;
  }
  return std::string_view::npos;
}

// Cuts every line at its unescaped '%', keeping line terminators.
inline std::string remove_comments(std::string_view src) {
  std::string out;
  out.reserve(src.size());
  std::size_t pos = 0;
  while (pos <= src.size()) {
    std::size_t eol = src.find('\n', pos);
    std::string_view line =
        eol == std::string_view::npos ? src.substr(pos) : src.substr(pos, eol - pos);
    std::size_t cut = comment_start(line);
    out.append(line.substr(0, cut == std::string_view::npos ? line.size() : cut));
    if (eol == std::string_view::npos) break;
    out.push_back('\n');
    pos = eol + 1;
  }
  return out;
}

// Reads a balanced {...} group starting at s[i] == '{'; advances i past the
// closing brace. Escaped braces do not change depth. Unbalanced input yields
// the remainder.
inline std::string read_braced(std::string_view s, std::size_t& i) {
  std::string inner;
  if (i >= s.size() || s[i] != '{') return inner;
  ++i;
  int depth = 1;
  while (i < s.size()) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      inner.push_back(c);
      inner.push_back(s[i + 1]);
      i += 2;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) {
        ++i;
        return inner;
      }
    }
    inner.push_back(c);
    ++i;
  }
  return inner;
}

// Skips consecutive [...] groups (with interleaving spaces).
inline void skip_optional_groups(std::string_view s, std::size_t& i) {
  for (;;) {
    std::size_t j = i;
    while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
    if (j >= s.size() || s[j] != '[') return;
    std::size_t close = s.find(']', j + 1);
    if (close == std::string_view::npos) return;
    i = close + 1;
  }
}

// First \<macro>{...} argument in already-decommented source, or "".
inline std::string find_braced_arg(std::string_view src, std::string_view macro) {
  std::size_t i = 0;
  while (i < src.size()) {
    std::size_t pos = src.find('\\', i);
    if (pos == std::string_view::npos) return "";
    std::size_t j = pos + 1;
    std::size_t k = j;
    while (k < src.size() && std::isalpha(static_cast<unsigned char>(src[k]))) ++k;
    if (src.substr(j, k - j) == macro) {
      if (k < src.size() && src[k] == '*') ++k;
      skip_optional_groups(src, k);
      while (k < src.size() && (src[k] == ' ' || src[k] == '\t' || src[k] == '\n')) ++k;
      if (k < src.size() && src[k] == '{') return read_braced(src, k);
    }
    i = pos + 1;
  }
  return "";
}

struct SectionCmd {
  std::size_t cmd_pos = 0;  // index of the backslash
  int level = 1;            // chapter 0, section 1, subsection 2, subsubsection 3
  std::string heading;      // LaTeX of the mandatory argument
  std::size_t body_start = 0;
};

inline std::vector<SectionCmd> find_sections(std::string_view src) {
  std::vector<SectionCmd> out;
  std::size_t i = 0;
  while (i < src.size()) {
    std::size_t pos = src.find('\\', i);
    if (pos == std::string_view::npos) break;
    std::size_t j = pos + 1;
    std::size_t k = j;
    while (k < src.size() && std::isalpha(static_cast<unsigned char>(src[k]))) ++k;
    std::string_view word = src.substr(j, k - j);
    int level = -1;
    if (word == "chapter") level = 0;
    else if (word == "section") level = 1;
    else if (word == "subsection") level = 2;
    else if (word == "subsubsection") level = 3;
    if (level < 0) {
      i = pos + 1;
      continue;
    }
    std::size_t cursor = k;
    if (cursor < src.size() && src[cursor] == '*') ++cursor;
    skip_optional_groups(src, cursor);
    while (cursor < src.size() && (src[cursor] == ' ' || src[cursor] == '\t')) ++cursor;
    if (cursor >= src.size() || src[cursor] != '{') {
      i = pos + 1;
      continue;
    }
    SectionCmd cmd;
    cmd.cmd_pos = pos;
    cmd.level = level;
    cmd.heading = read_braced(src, cursor);
    cmd.body_start = cursor;
    out.push_back(std::move(cmd));
    i = cursor;
  }
  return out;
}

// Byte ranges [begin, end) of \begin{<env>}...\end{<env>} blocks whose
// environment name starts with env_prefix, in document order, markers
// included. Nested same-name environments are not supported.
inline std::vector<std::pair<std::size_t, std::size_t>> find_environments(
    std::string_view src, std::string_view env_prefix) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  const std::string begin_token = "\\begin{";
  while (i < src.size()) {
    std::size_t pos = src.find(begin_token, i);
    if (pos == std::string_view::npos) break;
    std::size_t name_start = pos + begin_token.size();
    std::size_t name_end = src.find('}', name_start);
    if (name_end == std::string_view::npos) break;
    std::string name(src.substr(name_start, name_end - name_start));
    if (name.rfind(env_prefix, 0) != 0) {
      i = pos + begin_token.size();
      continue;
    }
    const std::string end_token = "\\end{" + name + "}";
    std::size_t end_pos = src.find(end_token, name_end + 1);
    if (end_pos == std::string_view::npos) {
      out.emplace_back(pos, src.size());
      break;
    }
    out.emplace_back(pos, end_pos + end_token.size());
    i = end_pos + end_token.size();
  }
  return out;
}

}  // namespace sotapipe::texscan
