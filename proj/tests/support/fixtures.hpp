// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sotapipe/corpus.hpp"

namespace sotapipe::testing {

namespace fs = std::filesystem;

// Self-cleaning unique directory under the system temp dir.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("sotapipe-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct PaperSpec {
  std::string id;
  std::string title = "A Neural Approach";
  std::string task = "Image Classification";
  std::string dataset = "TinyNet";
  std::string metric = "Accuracy";
  std::string score = "91.4";
  bool with_leaderboard = true;
  std::string split = "few_shot";
  std::string intro_pad;  // extra prose placed in the introduction
};

// Writes a single-directory LaTeX project with the classic section layout and
// returns the project root.
inline fs::path make_paper_project(const fs::path& root, const PaperSpec& spec) {
  const fs::path dir = root / spec.id;
  std::ostringstream tex;
  tex << "\\documentclass{article}\n"
      << "\\title{" << spec.title << "}\n"
      << "\\begin{document}\n"
      << "\\maketitle\n"
      << "\\begin{abstract}\n"
      << "We study " << spec.task << " on " << spec.dataset << ".\n"
      << "\\end{abstract}\n"
      << "\\section{Introduction}\n"
      << "Prior art is reviewed here. " << spec.intro_pad << "\n"
      << "\\section{Experimental Setup}\n"
      << "We train on " << spec.dataset << " and report " << spec.metric << ".\n"
      << "\\begin{tabular}{ll}\n"
      << "Metric & Value \\\\\n"
      << spec.metric << " & " << spec.score << " \\\\\n"
      << "\\end{tabular}\n"
      << "\\section{Results}\n"
      << "Our model reaches " << spec.score << " " << spec.metric << " on " << spec.dataset
      << ".\n"
      << "\\section{Conclusion}\n"
      << "The recipe transfers broadly.\n"
      << "\\end{document}\n";
  write_file(dir / "main.tex", tex.str());
  return dir;
}

inline std::string manifest_line(const PaperSpec& spec, const std::string& latex_root) {
  std::ostringstream line;
  line << "{\"paper_id\":\"" << spec.id << "\",\"title\":\"" << spec.title
       << "\",\"split\":\"" << spec.split << "\",\"latex_root\":\"" << latex_root << "\",";
  if (spec.with_leaderboard) {
    line << "\"annotations\":[{\"Task\":\"" << spec.task << "\",\"Dataset\":\"" << spec.dataset
         << "\",\"Metric\":\"" << spec.metric << "\",\"Score\":\"" << spec.score << "\"}]";
  } else {
    line << "\"annotations\":\"unanswerable\"";
  }
  line << "}";
  return line.str();
}

// Paper projects plus a manifest referencing them; returns the manifest path.
inline fs::path make_corpus_fixture(const fs::path& root, const std::vector<PaperSpec>& specs) {
  std::ostringstream manifest;
  for (const auto& spec : specs) {
    make_paper_project(root, spec);
    manifest << manifest_line(spec, spec.id) << "\n";
  }
  const fs::path path = root / "manifest.jsonl";
  write_file(path, manifest.str());
  return path;
}

inline corpus::AnnotationSet gold_of(const PaperSpec& spec) {
  if (!spec.with_leaderboard) return corpus::AnnotationSet::make_unanswerable();
  return corpus::AnnotationSet::leaderboard(
      {corpus::make_quadruple(spec.task, spec.dataset, spec.metric, spec.score)});
}

}  // namespace sotapipe::testing
