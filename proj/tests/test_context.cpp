// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include "sotapipe/context.hpp"

#include <doctest.h>

#include <algorithm>
#include <string>

#include "support/fixtures.hpp"

using namespace sotapipe;
using testing::TempDir;

namespace {

texflat::FlatTex fixture_flat() {
  TempDir dir;
  testing::PaperSpec spec;
  spec.id = "p1";
  testing::make_paper_project(dir.path(), spec);
  return texflat::flatten(dir / "p1", "p1");
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size()))
    ++count;
  return count;
}

}  // namespace

TEST_CASE("kind names round-trip case-insensitively") {
  CHECK(context::context_kind_name(context::ContextKind::DocTAET) == "DocTAET");
  CHECK(context::context_kind_name(context::ContextKind::DocREC) == "DocREC");
  CHECK(context::context_kind_name(context::ContextKind::DocFULL) == "DocFULL");
  CHECK(context::context_kind_from_name("doctaet") == context::ContextKind::DocTAET);
  CHECK(context::context_kind_from_name("DOCREC") == context::ContextKind::DocREC);
  CHECK(context::context_kind_from_name("DocFull") == context::ContextKind::DocFULL);
  CHECK_FALSE(context::context_kind_from_name("docx").has_value());
}

TEST_CASE("match_section_heading uses collapsed lowercase substrings") {
  const auto taet = context::default_doctaet_patterns();
  CHECK(context::match_section_heading("Experimental Setup", taet));
  CHECK(context::match_section_heading("5 Evaluation", taet));
  CHECK(context::match_section_heading("EXPERIMENTS", taet));
  CHECK(context::match_section_heading("Training   Details", taet));
  CHECK_FALSE(context::match_section_heading("Related Work", taet));
  CHECK_FALSE(context::match_section_heading("Introduction", taet));
  const auto rec = context::default_docrec_patterns();
  CHECK(context::match_section_heading("Results", rec));
  CHECK(context::match_section_heading("Conclusion and Future Work", rec));
  CHECK_FALSE(context::match_section_heading("Background", rec));
}

TEST_CASE("DocTAET holds title, abstract, setup prose, and tables") {
  const auto flat = fixture_flat();
  const auto doc = context::extract_doctaet(flat);
  CHECK(doc.paper_id == "p1");
  CHECK(doc.kind == context::ContextKind::DocTAET);
  CHECK(doc.text.find("A Neural Approach") != std::string::npos);
  CHECK(doc.text.find("We study Image Classification on TinyNet.") != std::string::npos);
  CHECK(doc.text.find("We train on TinyNet and report Accuracy.") != std::string::npos);
  // Table values ride along even though the body hosting them was erased.
  CHECK(doc.text.find("Accuracy | 91.4") != std::string::npos);
  CHECK(count_occurrences(doc.text, "91.4") == 1);
  // Intro and results prose stay out.
  CHECK(doc.text.find("Prior art is reviewed here.") == std::string::npos);
  CHECK(doc.text.find("Our model reaches") == std::string::npos);
  CHECK(std::find(doc.sections_used.begin(), doc.sections_used.end(), "Experimental Setup") !=
        doc.sections_used.end());
  CHECK(doc.word_count > 0);
}

TEST_CASE("DocREC holds results and conclusion prose") {
  const auto flat = fixture_flat();
  const auto doc = context::extract_docrec(flat);
  CHECK(doc.kind == context::ContextKind::DocREC);
  CHECK(doc.text.find("Our model reaches 91.4 Accuracy on TinyNet.") != std::string::npos);
  CHECK(doc.text.find("The recipe transfers broadly.") != std::string::npos);
  // "Experimental Setup" matches the experiment pattern, so its prose rides in too.
  CHECK(doc.text.find("We train on TinyNet and report Accuracy.") != std::string::npos);
  // The abstract and intro are absent.
  CHECK(doc.text.find("We study Image Classification on TinyNet.") == std::string::npos);
  CHECK(doc.text.find("Prior art is reviewed here.") == std::string::npos);
  CHECK(std::find(doc.sections_used.begin(), doc.sections_used.end(), "Results") !=
        doc.sections_used.end());
  CHECK(std::find(doc.sections_used.begin(), doc.sections_used.end(), "Conclusion") !=
        doc.sections_used.end());
}

TEST_CASE("DocFULL keeps everything") {
  const auto flat = fixture_flat();
  const auto doc = context::extract_docfull(flat);
  CHECK(doc.kind == context::ContextKind::DocFULL);
  CHECK(doc.text.find("Prior art is reviewed here.") != std::string::npos);
  CHECK(doc.text.find("Our model reaches") != std::string::npos);
  CHECK(doc.text.find("A Neural Approach") != std::string::npos);
  CHECK(doc.sections_used.empty());
}

TEST_CASE("extract dispatches on kind") {
  const auto flat = fixture_flat();
  CHECK(context::extract(flat, context::ContextKind::DocREC).kind ==
        context::ContextKind::DocREC);
  CHECK(context::extract(flat, context::ContextKind::DocFULL).kind ==
        context::ContextKind::DocFULL);
}

TEST_CASE("section bodies end at the next same-or-higher level") {
  texflat::FlatTex flat;
  flat.paper_id = "p";
  flat.source =
      "\\documentclass{article}\n\\begin{document}\n"
      "\\section{Experiments}\nouter setup prose\n"
      "\\subsection{Training Details}\ninner training prose\n"
      "\\section{Related Work}\nunrelated prose\n"
      "\\end{document}\n";
  const auto doc = context::extract_doctaet(flat);
  CHECK(doc.text.find("outer setup prose") != std::string::npos);
  CHECK(doc.text.find("inner training prose") != std::string::npos);
  CHECK(doc.text.find("unrelated prose") == std::string::npos);
  // The subsection matches on its own but sits inside a matched parent:
  // its body must not be duplicated.
  CHECK(count_occurrences(doc.text, "inner training prose") == 1);
  REQUIRE(doc.sections_used.size() == 1);
  CHECK(doc.sections_used[0] == "Experiments");
}

TEST_CASE("a matched subsection inside an unmatched parent is kept") {
  texflat::FlatTex flat;
  flat.paper_id = "p";
  flat.source =
      "\\documentclass{article}\n\\begin{document}\n"
      "\\section{Approach}\napproach prose\n"
      "\\subsection{Implementation Details}\nimpl prose\n"
      "\\section{Discussion}\ndiscussion prose\n"
      "\\end{document}\n";
  const auto doc = context::extract_doctaet(flat);
  CHECK(doc.text.find("impl prose") != std::string::npos);
  CHECK(doc.text.find("approach prose") == std::string::npos);
  CHECK(doc.text.find("discussion prose") == std::string::npos);
}

TEST_CASE("missing title, abstract, and matches produce warnings") {
  texflat::FlatTex flat;
  flat.paper_id = "p";
  flat.source =
      "\\documentclass{article}\n\\begin{document}\n"
      "\\section{Methodology}\nsome prose\n"
      "\\end{document}\n";
  const auto doc = context::extract_doctaet(flat);
  const auto has = [&](const std::string& needle) {
    return std::any_of(doc.warnings.begin(), doc.warnings.end(), [&](const std::string& w) {
      return w.find(needle) != std::string::npos;
    });
  };
  CHECK(has("no title found"));
  CHECK(has("no abstract found"));
  CHECK(has("no sections matched DocTAET patterns"));
}

TEST_CASE("truncate_context clips on a word budget") {
  context::ContextDocument doc;
  doc.paper_id = "p";
  doc.kind = context::ContextKind::DocFULL;
  doc.text = "alpha beta  gamma\ndelta epsilon";
  doc.word_count = 5;

  const auto clipped = context::truncate_context(doc, 3);
  CHECK(clipped.text == "alpha beta  gamma");
  CHECK(clipped.word_count == 3);
  REQUIRE(clipped.warnings.size() == 1);
  CHECK(clipped.warnings[0].find("context truncated to 3 words (was 5)") != std::string::npos);

  const auto untouched = context::truncate_context(doc, 5);
  CHECK(untouched.text == doc.text);
  CHECK(untouched.warnings.empty());

  const auto roomy = context::truncate_context(doc, 50);
  CHECK(roomy.text == doc.text);
}

TEST_CASE("context JSONL round-trips") {
  context::ContextDocument doc;
  doc.paper_id = "p/x";
  doc.kind = context::ContextKind::DocTAET;
  doc.text = "line one\nline two";
  doc.word_count = 4;
  doc.sections_used = {"Experiments", "Evaluation"};
  const auto line = context::to_jsonl_line(doc);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = context::from_jsonl_line(line);
  CHECK(back.paper_id == doc.paper_id);
  CHECK(back.kind == doc.kind);
  CHECK(back.text == doc.text);
  CHECK(back.word_count == doc.word_count);
  CHECK(back.sections_used == doc.sections_used);
  CHECK_THROWS_AS(context::from_jsonl_line("{\"paper_id\":\"p\",\"kind\":\"weird\","
                                           "\"text\":\"\",\"word_count\":0,"
                                           "\"sections_used\":[]}"),
                  std::runtime_error);
}
