// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 sotapipe contributors

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sotapipe/context.hpp"
#include "sotapipe/corpus.hpp"
#include "sotapipe/inference.hpp"
#include "sotapipe/jsonl.hpp"
#include "sotapipe/metrics.hpp"
#include "sotapipe/promptgen.hpp"
#include "sotapipe/report.hpp"
#include "sotapipe/strutil.hpp"
#include "sotapipe/texflat.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigFile {
  json data = json::object();

  static ConfigFile load(const std::string& path) {
    ConfigFile cfg;
    if (path.empty()) return cfg;
    cfg.data = json::parse(sotapipe::jsonl::read_file(path));
    if (!cfg.data.is_object()) {
      throw std::runtime_error("config file must hold a JSON object: " + path);
    }
    return cfg;
  }

  bool has(const std::string& key) const { return data.contains(key); }
};

// Precedence: explicit flag > config file > built-in default.
template <typename T>
T resolve(const CLI::Option* opt, const T& cli_value, const ConfigFile& cfg,
          const std::string& key, const T& fallback) {
  if (opt != nullptr && opt->count() > 0) return cli_value;
  if (cfg.has(key)) return cfg.data.at(key).get<T>();
  return fallback;
}

std::vector<std::string> resolve_patterns(const ConfigFile& cfg, const std::string& key,
                                          const std::vector<std::string>& fallback) {
  if (!cfg.has(key)) return fallback;
  std::vector<std::string> out;
  for (const auto& p : cfg.data.at(key)) out.push_back(p.get<std::string>());
  return out;
}

sotapipe::texflat::ConverterSpec converter_spec_from(const std::string& value) {
  if (sotapipe::strutil::to_lower(value) == "builtin") return {};
  return sotapipe::texflat::ConverterSpec{value};
}

std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string safe_filename(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (c == '/' || c == '\\') c = '_';
  }
  return out;
}

void print_warnings(const std::string& who, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << who << ": " << w << "\n";
}

std::vector<const sotapipe::corpus::PaperRecord*> select_records(
    const sotapipe::corpus::Corpus& corpus, const std::string& paper_id) {
  std::vector<const sotapipe::corpus::PaperRecord*> out;
  if (paper_id.empty()) {
    for (const auto& rec : corpus.records()) out.push_back(&rec);
    return out;
  }
  const auto* rec = corpus.find(paper_id);
  if (rec == nullptr) throw std::runtime_error("paper_id not in manifest: " + paper_id);
  out.push_back(rec);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LaTeX corpus to leaderboard-extraction evaluation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir = "out";
  std::uint64_t seed = 42;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--outdir", outdir, "output directory (default: out)");
  auto* seed_opt = app.add_option("--seed", seed, "deterministic sampling seed (default: 42)");

  // ---- flatten ----
  auto* cmd_flatten = app.add_subcommand("flatten", "merge multi-file LaTeX sources");
  std::string fl_manifest;
  std::string fl_paper;
  cmd_flatten->add_option("--manifest", fl_manifest, "corpus manifest JSONL")->required();
  cmd_flatten->add_option("--paper", fl_paper, "restrict to one paper_id");

  // ---- context ----
  auto* cmd_context = app.add_subcommand("context", "extract model contexts");
  std::string cx_manifest;
  std::string cx_paper;
  std::string cx_kind = "DocTAET";
  std::string cx_converter;
  std::size_t cx_truncate = 0;
  std::string cx_out;
  cmd_context->add_option("--manifest", cx_manifest, "corpus manifest JSONL")->required();
  cmd_context->add_option("--paper", cx_paper, "restrict to one paper_id");
  cmd_context->add_option("--kind", cx_kind, "DocTAET | DocREC | DocFULL");
  auto* cx_conv_opt = cmd_context->add_option(
      "--converter", cx_converter, "plain-text converter command, or 'builtin'");
  cmd_context->add_option("--truncate", cx_truncate, "word budget; 0 keeps everything");
  cmd_context->add_option("--out", cx_out, "output JSONL path");

  // ---- stats ----
  auto* cmd_stats = app.add_subcommand("stats", "corpus annotation statistics");
  std::string st_manifest;
  std::string st_format = "md";
  std::string st_out;
  cmd_stats->add_option("--manifest", st_manifest, "corpus manifest JSONL")->required();
  cmd_stats->add_option("--format", st_format, "md | csv");
  cmd_stats->add_option("--out", st_out, "also write to this file");

  // ---- dataset ----
  auto* cmd_dataset = app.add_subcommand("dataset", "build the prompt dataset");
  std::string ds_manifest;
  std::string ds_contexts;
  std::string ds_templates = "all";
  double ds_fraction = 1.0;
  std::string ds_out;
  cmd_dataset->add_option("--manifest", ds_manifest, "corpus manifest JSONL")->required();
  cmd_dataset->add_option("--contexts", ds_contexts, "context JSONL from 'context'")->required();
  cmd_dataset->add_option("--templates", ds_templates,
                          "comma-separated template ids, or 'all'");
  auto* ds_frac_opt =
      cmd_dataset->add_option("--fraction", ds_fraction, "per-template sample fraction");
  cmd_dataset->add_option("--out", ds_out, "output JSONL path");

  // ---- infer ----
  auto* cmd_infer = app.add_subcommand("infer", "request completions for a dataset");
  std::string in_dataset;
  std::string in_endpoint;
  std::string in_model;
  std::string in_auth_env;
  double in_temperature = 0.0;
  int in_max_tokens = 512;
  int in_concurrency = 1;
  int in_max_attempts = 3;
  int in_backoff_ms = 250;
  std::string in_checkpoint;
  std::string in_out;
  cmd_infer->add_option("--dataset", in_dataset, "prompt dataset JSONL")->required();
  auto* in_endpoint_opt =
      cmd_infer->add_option("--endpoint", in_endpoint, "chat-completions endpoint URL");
  auto* in_model_opt = cmd_infer->add_option("--model", in_model, "model name");
  auto* in_auth_opt = cmd_infer->add_option(
      "--auth-env", in_auth_env, "environment variable holding the bearer token");
  auto* in_temp_opt = cmd_infer->add_option("--temperature", in_temperature, "sampling temperature");
  auto* in_tokens_opt = cmd_infer->add_option("--max-tokens", in_max_tokens, "completion budget");
  auto* in_conc_opt =
      cmd_infer->add_option("--concurrency", in_concurrency, "max in-flight requests");
  auto* in_attempts_opt =
      cmd_infer->add_option("--max-attempts", in_max_attempts, "attempts per request");
  auto* in_backoff_opt =
      cmd_infer->add_option("--backoff-ms", in_backoff_ms, "base retry backoff in ms");
  cmd_infer->add_option("--checkpoint", in_checkpoint, "append-only checkpoint JSONL");
  cmd_infer->add_option("--out", in_out, "output predictions JSONL");

  // ---- eval ----
  auto* cmd_eval = app.add_subcommand("eval", "score predictions against the manifest");
  std::string ev_manifest;
  std::string ev_predictions;
  double ev_threshold = 50.0;
  int ev_template_filter = 3;
  std::string ev_overall = "macro";
  std::string ev_context_kind = "DocTAET";
  std::string ev_out;
  cmd_eval->add_option("--manifest", ev_manifest, "corpus manifest JSONL")->required();
  cmd_eval->add_option("--predictions", ev_predictions, "predictions JSONL")->required();
  auto* ev_thr_opt =
      cmd_eval->add_option("--threshold", ev_threshold, "partial-match fuzz threshold");
  auto* ev_tf_opt = cmd_eval->add_option("--template-filter", ev_template_filter,
                                         "score one template id; 0 pools all");
  auto* ev_overall_opt = cmd_eval->add_option("--overall", ev_overall, "macro | micro");
  cmd_eval->add_option("--context-kind", ev_context_kind, "label for the report cells");
  cmd_eval->add_option("--out", ev_out, "report JSON path");

  // ---- report ----
  auto* cmd_report = app.add_subcommand("report", "render a report into a run directory");
  std::string rp_report;
  std::string rp_formats = "md,csv,json";
  cmd_report->add_option("--report", rp_report, "report JSON from 'eval'");
  cmd_report->add_option("--formats", rp_formats, "comma-separated: md,csv,json");

  CLI11_PARSE(app, argc, argv);

  try {
    const ConfigFile cfg = ConfigFile::load(config_path);
    seed = resolve<std::uint64_t>(seed_opt, seed, cfg, "seed", seed);
    const fs::path out_root = outdir;

    if (cmd_flatten->parsed()) {
      const auto corpus = sotapipe::corpus::load_manifest(fl_manifest);
      for (const auto* rec : select_records(corpus, fl_paper)) {
        const auto flat = sotapipe::texflat::flatten(rec->latex_root, rec->paper_id);
        print_warnings(rec->paper_id, flat.warnings);
        const fs::path tex_path =
            out_root / "flat" / (safe_filename(rec->paper_id) + ".tex");
        sotapipe::jsonl::write_file(flat.source, tex_path);
        nlohmann::ordered_json meta;
        meta["paper_id"] = flat.paper_id;
        json log = json::array();
        for (const auto& [directive, path] : flat.inclusion_log) {
          log.push_back(json::array({directive, path}));
        }
        meta["inclusion_log"] = std::move(log);
        meta["warnings"] = flat.warnings;
        sotapipe::jsonl::write_file(
            meta.dump(2) + "\n",
            out_root / "flat" / (safe_filename(rec->paper_id) + ".meta.json"));
        std::cout << "flattened " << rec->paper_id << " -> " << tex_path.string() << "\n";
      }
      return 0;
    }

    if (cmd_context->parsed()) {
      const auto corpus = sotapipe::corpus::load_manifest(cx_manifest);
      const auto kind = sotapipe::context::context_kind_from_name(cx_kind);
      if (!kind) throw std::runtime_error("unknown context kind '" + cx_kind + "'");
      sotapipe::context::ExtractOptions options;
      options.converter = converter_spec_from(
          resolve<std::string>(cx_conv_opt, cx_converter, cfg, "converter_cmd",
                               sotapipe::texflat::kDefaultConverterCommand));
      options.doctaet_patterns.patterns = resolve_patterns(
          cfg, "doctaet_patterns", options.doctaet_patterns.patterns);
      options.docrec_patterns.patterns =
          resolve_patterns(cfg, "docrec_patterns", options.docrec_patterns.patterns);
      const std::size_t budget =
          resolve<std::size_t>(cmd_context->get_option("--truncate"), cx_truncate, cfg,
                               "truncation_words", cx_truncate);

      std::vector<std::string> lines;
      for (const auto* rec : select_records(corpus, cx_paper)) {
        const auto flat = sotapipe::texflat::flatten(rec->latex_root, rec->paper_id);
        print_warnings(rec->paper_id, flat.warnings);
        auto doc = sotapipe::context::extract(flat, *kind, options);
        if (budget > 0) doc = sotapipe::context::truncate_context(doc, budget);
        print_warnings(rec->paper_id, doc.warnings);
        lines.push_back(sotapipe::context::to_jsonl_line(doc));
      }
      const fs::path out_path =
          cx_out.empty()
              ? out_root / "contexts" / (sotapipe::context::context_kind_name(*kind) + ".jsonl")
              : fs::path(cx_out);
      sotapipe::jsonl::write_lines(lines, out_path);
      std::cout << "wrote " << lines.size() << " contexts -> " << out_path.string() << "\n";
      return 0;
    }

    if (cmd_stats->parsed()) {
      const auto corpus = sotapipe::corpus::load_manifest(st_manifest);
      const auto train = compute_stats(corpus, sotapipe::corpus::SplitLabel::Train);
      const auto few = compute_stats(corpus, sotapipe::corpus::SplitLabel::TestFewShot);
      const auto zero = compute_stats(corpus, sotapipe::corpus::SplitLabel::TestZeroShot);
      std::string rendered;
      if (st_format == "md" || st_format == "markdown") {
        rendered = sotapipe::corpus::stats_markdown(train, few, zero);
      } else if (st_format == "csv") {
        rendered = sotapipe::corpus::stats_csv(train, few, zero);
      } else {
        throw std::runtime_error("unknown stats format '" + st_format + "'");
      }
      std::cout << rendered;
      if (!st_out.empty()) sotapipe::jsonl::write_file(rendered, st_out);
      return 0;
    }

    if (cmd_dataset->parsed()) {
      const auto corpus = sotapipe::corpus::load_manifest(ds_manifest);
      std::map<std::string, sotapipe::context::ContextDocument> contexts;
      const auto lines = sotapipe::jsonl::read_lines(ds_contexts);
      for (std::size_t i = 0; i < lines.text.size(); ++i) {
        sotapipe::context::ContextDocument doc;
        try {
          doc = sotapipe::context::from_jsonl_line(lines.text[i]);
        } catch (const std::exception& e) {
          throw std::runtime_error("contexts " + ds_contexts + " line " +
                                   std::to_string(lines.line_numbers[i]) + ": " + e.what());
        }
        if (!contexts.emplace(doc.paper_id, doc).second) {
          std::cerr << "warning: duplicate context for " << doc.paper_id
                    << "; keeping the first\n";
        }
      }

      std::vector<sotapipe::promptgen::InstructionTemplate> templates;
      if (sotapipe::strutil::to_lower(ds_templates) == "all") {
        templates = sotapipe::promptgen::builtin_templates();
      } else {
        std::stringstream ss(ds_templates);
        std::string token;
        while (std::getline(ss, token, ',')) {
          const std::string trimmed = sotapipe::strutil::trim(token);
          if (trimmed.empty()) continue;
          templates.push_back(sotapipe::promptgen::builtin_template(std::stoi(trimmed)));
        }
        if (templates.empty()) throw std::runtime_error("no template ids given");
      }
      const double fraction =
          resolve<double>(ds_frac_opt, ds_fraction, cfg, "sample_fraction", ds_fraction);
      const auto instances =
          sotapipe::promptgen::build_dataset(corpus, contexts, templates, fraction, seed);
      const fs::path out_path =
          ds_out.empty() ? out_root / "dataset.jsonl" : fs::path(ds_out);
      sotapipe::promptgen::save_dataset(instances, out_path);
      std::cout << "wrote " << instances.size() << " prompts -> " << out_path.string() << "\n";
      return 0;
    }

    if (cmd_infer->parsed()) {
      sotapipe::inference::InferenceConfig config;
      config.endpoint_url =
          resolve<std::string>(in_endpoint_opt, in_endpoint, cfg, "endpoint_url", "");
      config.model_name = resolve<std::string>(in_model_opt, in_model, cfg, "model_name", "");
      config.auth_env_var =
          resolve<std::string>(in_auth_opt, in_auth_env, cfg, "auth_env_var", "");
      config.temperature = resolve<double>(in_temp_opt, in_temperature, cfg, "temperature", 0.0);
      config.max_output_tokens =
          resolve<int>(in_tokens_opt, in_max_tokens, cfg, "max_output_tokens", 512);
      config.max_in_flight = resolve<int>(in_conc_opt, in_concurrency, cfg, "max_in_flight", 1);
      config.retry.max_attempts =
          resolve<int>(in_attempts_opt, in_max_attempts, cfg, "max_attempts", 3);
      config.retry.base_backoff = std::chrono::milliseconds(
          resolve<int>(in_backoff_opt, in_backoff_ms, cfg, "base_backoff_ms", 250));
      if (config.endpoint_url.empty()) throw std::runtime_error("no endpoint URL configured");
      if (config.model_name.empty()) throw std::runtime_error("no model name configured");
      if (!config.auth_env_var.empty() &&
          std::getenv(config.auth_env_var.c_str()) == nullptr) {
        throw std::runtime_error("environment variable " + config.auth_env_var + " is not set");
      }

      const auto instances = sotapipe::promptgen::load_dataset(in_dataset);
      const fs::path checkpoint =
          in_checkpoint.empty() ? out_root / "checkpoint.jsonl" : fs::path(in_checkpoint);
      const auto predictions = sotapipe::inference::run_batch(instances, config, checkpoint);
      std::vector<std::string> lines;
      std::size_t failures = 0;
      for (const auto& p : predictions) {
        if (p.parsed.kind == sotapipe::inference::ParsedPrediction::Kind::ParseFailure) {
          ++failures;
        }
        lines.push_back(sotapipe::inference::to_jsonl_line(p));
      }
      const fs::path out_path =
          in_out.empty() ? out_root / "predictions.jsonl" : fs::path(in_out);
      sotapipe::jsonl::write_lines(lines, out_path);
      std::cout << predictions.size() << " predictions (" << failures
                << " parse failures) -> " << out_path.string() << "\n";
      return 0;
    }

    if (cmd_eval->parsed()) {
      const auto corpus = sotapipe::corpus::load_manifest(ev_manifest);
      const auto predictions = sotapipe::inference::load_predictions(ev_predictions);
      sotapipe::report::EvalSettings settings;
      settings.threshold =
          resolve<double>(ev_thr_opt, ev_threshold, cfg, "partial_threshold", 50.0);
      settings.template_filter =
          resolve<int>(ev_tf_opt, ev_template_filter, cfg, "template_filter", 3);
      const std::string overall =
          resolve<std::string>(ev_overall_opt, ev_overall, cfg, "overall_mode", "macro");
      if (overall == "macro") {
        settings.overall = sotapipe::metrics::OverallMode::MacroOverFields;
      } else if (overall == "micro") {
        settings.overall = sotapipe::metrics::OverallMode::MicroPooled;
      } else {
        throw std::runtime_error("unknown overall mode '" + overall + "'");
      }
      settings.context_kind = ev_context_kind;

      sotapipe::report::RunMetadata meta;
      meta.timestamp = iso_timestamp();
      meta.doctaet_patterns = resolve_patterns(
          cfg, "doctaet_patterns",
          sotapipe::context::default_doctaet_patterns().patterns);
      meta.docrec_patterns = resolve_patterns(
          cfg, "docrec_patterns", sotapipe::context::default_docrec_patterns().patterns);
      json canonical;  // sorted keys -> stable digest input
      canonical["context_kind"] = settings.context_kind;
      canonical["doctaet_patterns"] = meta.doctaet_patterns;
      canonical["docrec_patterns"] = meta.docrec_patterns;
      canonical["overall_mode"] = overall;
      canonical["partial_threshold"] = settings.threshold;
      canonical["seed"] = seed;
      canonical["template_filter"] = settings.template_filter;
      meta.config_digest = sotapipe::report::config_digest(canonical.dump());

      const auto report = sotapipe::report::evaluate(predictions, corpus, settings, meta);
      print_warnings("eval", report.warnings);
      const fs::path out_path = ev_out.empty() ? out_root / "report.json" : fs::path(ev_out);
      sotapipe::jsonl::write_file(sotapipe::report::to_json(report), out_path);
      std::cout << "wrote report -> " << out_path.string() << "\n";
      return 0;
    }

    if (cmd_report->parsed()) {
      const fs::path report_path =
          rp_report.empty() ? out_root / "report.json" : fs::path(rp_report);
      const auto report =
          sotapipe::report::from_json(sotapipe::jsonl::read_file(report_path));
      std::string digest = report.meta.config_digest;
      if (digest.empty()) digest = sotapipe::report::config_digest(to_json(report));
      const fs::path run_dir = out_root / digest;
      std::stringstream ss(rp_formats);
      std::string token;
      while (std::getline(ss, token, ',')) {
        const std::string name = sotapipe::strutil::trim(token);
        if (name.empty()) continue;
        const auto format = sotapipe::report::report_format_from_name(name);
        if (!format) throw std::runtime_error("unknown report format '" + name + "'");
        const char* ext = *format == sotapipe::report::ReportFormat::Markdown ? "md"
                          : *format == sotapipe::report::ReportFormat::Csv   ? "csv"
                                                                             : "json";
        sotapipe::report::emit(report, *format, run_dir / (std::string("report.") + ext));
      }
      std::cout << run_dir.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
