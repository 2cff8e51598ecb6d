// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/texflat.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <set>
#include <stdexcept>
#include <unordered_set>

#ifdef __unix__
#include <sys/wait.h>
#endif

#include "sotapipe/jsonl.hpp"
#include "sotapipe/strutil.hpp"
#include "tex_scan.hpp"

namespace sotapipe::texflat {

namespace fs = std::filesystem;

namespace {

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    unsigned char c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (char ch : bytes) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

bool has_documentclass(const std::string& decoded) {
  std::size_t pos = 0;
  while (pos <= decoded.size()) {
    std::size_t eol = decoded.find('\n', pos);
    std::string_view line = eol == std::string::npos
                                ? std::string_view(decoded).substr(pos)
                                : std::string_view(decoded).substr(pos, eol - pos);
    std::size_t cut = texscan::comment_start(line);
    if (line.substr(0, cut == std::string_view::npos ? line.size() : cut)
            .find("\\documentclass") != std::string_view::npos) {
      return true;
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return false;
}

std::vector<fs::path> tex_files_under(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tex") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.generic_string() < b.generic_string();
            });
  return files;
}

struct ExpandState {
  fs::path project_root;           // weakly canonical
  std::vector<fs::path> stack;     // weakly canonical, outermost first
  std::vector<std::string> names;  // display names relative to project_root
  FlatTex* out = nullptr;
};

std::string display_name(const fs::path& canonical, const fs::path& root) {
  fs::path rel = canonical.lexically_relative(root);
  if (rel.empty() || *rel.begin() == "..") return canonical.generic_string();
  return rel.generic_string();
}

std::string expand_file(ExpandState& state, const fs::path& file);

// Expands directives on one line (terminator excluded). Text after an
// unescaped '%' is preserved verbatim and never expanded.
std::string expand_line(ExpandState& state, std::string_view line) {
  const std::size_t climit_raw = texscan::comment_start(line);
  const std::size_t climit = climit_raw == std::string_view::npos ? line.size() : climit_raw;
  std::string out;
  std::size_t i = 0;
  while (i < climit) {
    if (line[i] != '\\') {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t run_end = i;
    while (run_end < climit && line[run_end] == '\\') ++run_end;
    const std::size_t run = run_end - i;
    if (run % 2 == 0) {
      out.append(line.substr(i, run));
      i = run_end;
      continue;
    }
    out.append(line.substr(i, run - 1));
    i = run_end - 1;  // line[i] is the live command backslash

    std::size_t k = i + 1;
    while (k < climit && std::isalpha(static_cast<unsigned char>(line[k]))) ++k;
    std::string_view word = line.substr(i + 1, k - i - 1);
    if (word != "input" && word != "include") {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t m = k;
    while (m < climit && (line[m] == ' ' || line[m] == '\t')) ++m;
    if (m >= climit || line[m] != '{') {
      out.push_back(line[i++]);
      continue;
    }
    std::size_t close = line.find('}', m + 1);
    if (close == std::string_view::npos || close >= climit) {
      out.push_back(line[i++]);
      continue;
    }
    const std::string directive(line.substr(i, close + 1 - i));
    const std::string name = strutil::trim(line.substr(m + 1, close - m - 1));
    i = close + 1;
    if (name.empty()) {
      state.out->warnings.push_back("empty include target in directive '" + directive +
                                    "' (left in place)");
      out += directive;
      continue;
    }

    fs::path target = fs::path(name);
    if (target.extension().empty()) target += ".tex";
    fs::path resolved =
        fs::weakly_canonical(target.is_absolute() ? target : state.project_root / target);
    const std::string rel_name = display_name(resolved, state.project_root);
    fs::path rel_check = resolved.lexically_relative(state.project_root);
    if (rel_check.empty() || *rel_check.begin() == "..") {
      state.out->warnings.push_back("include target outside project root: " + name +
                                    " (left in place)");
      out += directive;
      continue;
    }
    if (!fs::exists(resolved) || !fs::is_regular_file(resolved)) {
      state.out->warnings.push_back("missing include: " + name + " (left in place)");
      out += directive;
      continue;
    }
    auto cycle_at = std::find(state.stack.begin(), state.stack.end(), resolved);
    if (cycle_at != state.stack.end()) {
      std::string chain;
      for (std::size_t s = static_cast<std::size_t>(cycle_at - state.stack.begin());
           s < state.names.size(); ++s) {
        chain += state.names[s];
        chain += " -> ";
      }
      chain += rel_name;
      throw std::runtime_error("inclusion cycle: " + chain);
    }

    state.out->inclusion_log.emplace_back(directive, rel_name);
    state.stack.push_back(resolved);
    state.names.push_back(rel_name);
    std::string sub = expand_file(state, resolved);
    state.stack.pop_back();
    state.names.pop_back();
    if (!sub.empty() && sub.back() == '\n') sub.pop_back();
    out.push_back('\n');
    out += sub;
    out.push_back('\n');
  }
  out.append(line.substr(climit));
  return out;
}

std::string expand_file(ExpandState& state, const fs::path& file) {
  const std::string content = decode_text_file(file);
  std::string out;
  out.reserve(content.size());
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t eol = content.find('\n', pos);
    std::string_view line = eol == std::string::npos
                                ? std::string_view(content).substr(pos)
                                : std::string_view(content).substr(pos, eol - pos);
    if (eol == std::string::npos && line.empty()) break;
    out += expand_line(state, line);
    if (eol == std::string::npos) break;
    out.push_back('\n');
    pos = eol + 1;
  }
  return out;
}

std::string run_converter(const std::string& command, const std::string& input) {
  static std::atomic<unsigned> counter{0};
  const std::string tag =
      std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
  const fs::path dir = fs::temp_directory_path();
  const fs::path in_path = dir / ("sotapipe-conv-" + tag + ".in");
  const fs::path out_path = dir / ("sotapipe-conv-" + tag + ".out");
  jsonl::write_file(input, in_path);
  const std::string cmd =
      command + " < '" + in_path.string() + "' > '" + out_path.string() + "'";
  const int rc = std::system(cmd.c_str());
  std::string output;
  if (fs::exists(out_path)) output = jsonl::read_file(out_path);
  std::error_code ec;
  fs::remove(in_path, ec);
  fs::remove(out_path, ec);
  int exit_code = rc;
#ifdef __unix__
  if (rc != -1 && WIFEXITED(rc)) exit_code = WEXITSTATUS(rc);
#endif
  if (rc == -1 || exit_code != 0) {
    throw std::runtime_error("converter command failed (exit " + std::to_string(exit_code) +
                             "): " + command);
  }
  return output;
}

const std::unordered_set<std::string>& drop_one_arg_macros() {
  static const std::unordered_set<std::string> macros = {
      "cite",       "citep",     "citet",    "citealp",          "citeyear",
      "ref",        "eqref",     "autoref",  "cref",             "Cref",
      "pageref",    "label",     "url",      "usepackage",       "documentclass",
      "includegraphics",         "input",    "include",          "bibliography",
      "bibliographystyle",       "vspace",   "hspace",           "graphicspath",
      "pagestyle",  "thispagestyle"};
  return macros;
}

const std::unordered_set<std::string>& drop_two_arg_macros() {
  static const std::unordered_set<std::string> macros = {
      "newcommand", "renewcommand", "providecommand", "setlength", "addtolength",
      "settowidth", "setcounter",   "newenvironment"};
  return macros;
}

void skip_braced_group(std::string_view s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n')) ++i;
  if (i < s.size() && s[i] == '{') texscan::read_braced(s, i);
}

std::string strip_fragment(std::string_view src, bool in_tabular) {
  std::string out;
  out.reserve(src.size());
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\\') {
      if (i + 1 >= src.size()) break;
      const char next = src[i + 1];
      if (std::isalpha(static_cast<unsigned char>(next))) {
        std::size_t k = i + 1;
        while (k < src.size() && std::isalpha(static_cast<unsigned char>(src[k]))) ++k;
        const std::string word(src.substr(i + 1, k - i - 1));
        if (k < src.size() && src[k] == '*') ++k;
        if (word == "begin") {
          while (k < src.size() && (src[k] == ' ' || src[k] == '\t')) ++k;
          std::string env;
          if (k < src.size() && src[k] == '{') env = texscan::read_braced(src, k);
          std::string env_base = env;
          while (!env_base.empty() && env_base.back() == '*') env_base.pop_back();
          texscan::skip_optional_groups(src, k);
          if (env_base.rfind("tabular", 0) == 0) {
            // Column spec, then cells until the matching end marker.
            skip_braced_group(src, k);
            const std::string end_token = "\\end{" + env + "}";
            std::size_t end_pos = src.find(end_token, k);
            std::string_view body = end_pos == std::string_view::npos
                                        ? src.substr(k)
                                        : src.substr(k, end_pos - k);
            out.push_back('\n');
            out += strip_fragment(body, true);
            out.push_back('\n');
            i = end_pos == std::string_view::npos ? src.size() : end_pos + end_token.size();
            continue;
          }
          i = k;
          continue;
        }
        if (word == "end") {
          while (k < src.size() && (src[k] == ' ' || src[k] == '\t')) ++k;
          if (k < src.size() && src[k] == '{') texscan::read_braced(src, k);
          i = k;
          continue;
        }
        texscan::skip_optional_groups(src, k);
        if (drop_one_arg_macros().count(word) > 0) {
          skip_braced_group(src, k);
        } else if (drop_two_arg_macros().count(word) > 0) {
          skip_braced_group(src, k);
          texscan::skip_optional_groups(src, k);
          skip_braced_group(src, k);
        } else if (word == "href") {
          skip_braced_group(src, k);  // link target dropped, link text kept
        }
        i = k;
        continue;
      }
      switch (next) {
        case '\\':
          out.push_back('\n');
          break;
        case '%':
        case '&':
        case '#':
        case '_':
        case '$':
          out.push_back(next);
          break;
        case '{':
        case '}':
          out.push_back(next);
          break;
        case ',':
        case ';':
        case '!':
        case ' ':
          out.push_back(' ');
          break;
        default:
          break;  // \[ \] \( \) and unknown symbol macros vanish
      }
      i += 2;
      continue;
    }
    if (c == '{' || c == '}') {
      ++i;
      continue;
    }
    if (c == '$') {
      ++i;
      if (i < src.size() && src[i] == '$') ++i;
      continue;
    }
    if (c == '&') {
      if (in_tabular) {
        while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
        out += " | ";
        ++i;
        while (i < src.size() && (src[i] == ' ' || src[i] == '\t')) ++i;
      } else {
        out.push_back(' ');
        ++i;
      }
      continue;
    }
    if (c == '~') {
      out.push_back(' ');
      ++i;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace

std::string decode_text_file(const std::filesystem::path& path) {
  const std::string bytes = jsonl::read_file(path);
  if (is_valid_utf8(bytes)) return bytes;
  return latin1_to_utf8(bytes);
}

std::filesystem::path find_main_file(const std::filesystem::path& project_root,
                                     std::vector<std::string>* warnings) {
  if (fs::is_regular_file(project_root)) return project_root;
  if (!fs::is_directory(project_root)) {
    throw std::runtime_error("LaTeX root does not exist: " + project_root.string());
  }
  std::vector<fs::path> candidates;
  std::vector<std::string> decoded;
  for (const fs::path& file : tex_files_under(project_root)) {
    std::string content = decode_text_file(file);
    if (has_documentclass(content)) {
      candidates.push_back(file);
      decoded.push_back(std::move(content));
    }
  }
  if (candidates.empty()) {
    throw std::runtime_error("no file with \\documentclass under " + project_root.string());
  }
  if (candidates.size() == 1) return candidates.front();

  std::vector<fs::path> with_body;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (decoded[i].find("\\begin{document}") != std::string::npos) {
      with_body.push_back(candidates[i]);
    }
  }
  const std::vector<fs::path>& pool = with_body.empty() ? candidates : with_body;
  if (pool.size() > 1 && warnings != nullptr) {
    warnings->push_back("multiple main file candidates; using " +
                        pool.front().lexically_relative(project_root).generic_string());
  }
  return pool.front();
}

FlatTex flatten(const std::filesystem::path& project_root, const std::string& paper_id) {
  FlatTex out;
  fs::path main_file;
  fs::path base_dir;
  if (fs::is_regular_file(project_root)) {
    main_file = project_root;
    base_dir = project_root.parent_path().empty() ? fs::path(".")
                                                  : project_root.parent_path();
  } else {
    main_file = find_main_file(project_root, &out.warnings);
    base_dir = project_root;
  }
  out.paper_id = paper_id.empty() ? main_file.stem().string() : paper_id;

  ExpandState state;
  state.project_root = fs::weakly_canonical(base_dir);
  state.out = &out;
  const fs::path main_canonical = fs::weakly_canonical(main_file);
  state.stack.push_back(main_canonical);
  state.names.push_back(display_name(main_canonical, state.project_root));
  out.source = expand_file(state, main_canonical);
  return out;
}

PlainText to_plain(const FlatTex& flat, const ConverterSpec& converter) {
  PlainText out;
  out.paper_id = flat.paper_id;
  if (converter.command.has_value()) {
    out.converter = ConverterKind::External;
    out.text = run_converter(*converter.command, flat.source);
  } else {
    out.converter = ConverterKind::Fallback;
    out.text = strip_latex(flat.source);
  }
  out.word_count = strutil::count_words(out.text);
  return out;
}

std::string strip_latex(const std::string& source) {
  const std::string decommented = texscan::remove_comments(source);
  const std::size_t begin_doc = decommented.find("\\begin{document}");
  std::string_view body = decommented;
  std::string title;
  if (begin_doc != std::string::npos) {
    title = texscan::find_braced_arg(
        std::string_view(decommented).substr(0, begin_doc), "title");
    const std::size_t body_start = begin_doc + std::strlen("\\begin{document}");
    const std::size_t end_doc = decommented.find("\\end{document}", body_start);
    body = std::string_view(decommented)
               .substr(body_start, end_doc == std::string::npos ? std::string::npos
                                                                : end_doc - body_start);
  }
  std::string out;
  if (!title.empty()) {
    out += strutil::trim(strip_fragment(title, false));
    out += "\n\n";
  }
  out += strip_fragment(body, false);
  return out;
}

}  // namespace sotapipe::texflat
