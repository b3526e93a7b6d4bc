// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "medzs/encoders.hpp"
#include "medzs/eval.hpp"
#include "medzs/io.hpp"
#include "medzs/knowledge.hpp"
#include "medzs/llm.hpp"
#include "medzs/report.hpp"

namespace medzs::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// Raised for failures that must exit with a specific status regardless of
// the underlying error code.
struct ExitError : std::runtime_error {
  ExitError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
  int status;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Raw command-line values. Whether a flag was given is read from its
// CLI11 option, so defaults here never shadow the config file.
struct Flags {
  std::string config;
  std::string bundle;
  std::string kb;
  std::string aggregation;
  std::string variant;
  std::string cache_dir;
  std::string format;
  std::string text_template;
  std::string out;
  bool strict = true;
  int workers = 1;
  bool verbose = false;
  std::string llm_endpoint;
  std::string llm_model;
};

struct Options {
  CLI::Option* config = nullptr;
  CLI::Option* bundle = nullptr;
  CLI::Option* kb = nullptr;
  CLI::Option* aggregation = nullptr;
  CLI::Option* variant = nullptr;
  CLI::Option* cache_dir = nullptr;
  CLI::Option* format = nullptr;
  CLI::Option* text_template = nullptr;
  CLI::Option* strict = nullptr;
  CLI::Option* workers = nullptr;
  CLI::Option* llm_endpoint = nullptr;
  CLI::Option* llm_model = nullptr;
};

/// Settings after applying flag > config file > environment > default.
struct RunConfig {
  std::optional<fs::path> bundle;
  std::optional<fs::path> kb;
  AggregationMode aggregation = AggregationMode::kMean;
  std::optional<PromptVariant> variant;
  std::optional<fs::path> cache_dir;
  ReportFormat format = ReportFormat::kText;
  std::optional<std::string> text_template;
  bool strict = true;
  int workers = 1;
  LlmConfig llm;
};

class ConfigFile {
 public:
  ConfigFile() = default;
  explicit ConfigFile(const fs::path& path) : dir_(path.parent_path()) {
    try {
      doc_ = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: {}", path.string(), e.what()));
    }
    static const std::vector<std::string> kKeys{"bundle", "kb",      "aggregation",   "variant", "cache_dir",
                                                "format", "workers", "text_template", "strict",  "llm"};
    if (!doc_.is_object()) throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: expected an object", path.string()));
    for (const auto& [k, v] : doc_.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), k) == kKeys.end()) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: unknown key '{}'", path.string(), k));
      }
    }
  }

  std::optional<std::string> str(const json& obj, const char* key) const {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    if (!obj[key].is_string()) throw Error(ErrorCode::kInvalidArgument, fmt::format("config: '{}' must be a string", key));
    return obj[key].get<std::string>();
  }
  std::optional<std::string> str(const char* key) const { return str(doc_, key); }
  std::optional<fs::path> path(const char* key) const {
    auto s = str(key);
    if (!s) return std::nullopt;
    fs::path p(*s);
    return p.is_absolute() ? p : dir_ / p;
  }
  template <typename T>
  std::optional<T> number(const json& obj, const char* key) const {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    if (!obj[key].is_number()) throw Error(ErrorCode::kInvalidArgument, fmt::format("config: '{}' must be a number", key));
    return obj[key].get<T>();
  }
  std::optional<bool> boolean(const char* key) const {
    if (!doc_.contains(key)) return std::nullopt;
    if (!doc_[key].is_boolean()) throw Error(ErrorCode::kInvalidArgument, fmt::format("config: '{}' must be a boolean", key));
    return doc_[key].get<bool>();
  }
  const json& doc() const { return doc_; }
  const json& llm() const {
    static const json kEmpty = json::object();
    return doc_.contains("llm") ? doc_["llm"] : kEmpty;
  }

 private:
  json doc_ = json::object();
  fs::path dir_;
};

int parse_workers(const std::string& text, const char* where) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: '{}' is not an integer", where, text));
}

RunConfig resolve(const Flags& f, const Options& o) {
  ConfigFile file;
  if (o.config && o.config->count() > 0) {
    file = ConfigFile(f.config);
  } else if (auto p = env("MEDZS_CONFIG")) {
    file = ConfigFile(*p);
  }

  auto pick = [](CLI::Option* opt, const std::string& flag, std::optional<std::string> from_file,
                 std::optional<std::string> from_env) -> std::optional<std::string> {
    if (opt && opt->count() > 0) return flag;
    if (from_file) return from_file;
    return from_env;
  };
  auto pick_path = [](CLI::Option* opt, const std::string& flag, std::optional<fs::path> from_file,
                      std::optional<std::string> from_env) -> std::optional<fs::path> {
    if (opt && opt->count() > 0) return fs::path(flag);
    if (from_file) return from_file;
    if (from_env) return fs::path(*from_env);
    return std::nullopt;
  };

  RunConfig rc;
  rc.bundle = pick_path(o.bundle, f.bundle, file.path("bundle"), env("MEDZS_BUNDLE"));
  rc.kb = pick_path(o.kb, f.kb, file.path("kb"), std::nullopt);
  rc.cache_dir = pick_path(o.cache_dir, f.cache_dir, file.path("cache_dir"), env("MEDZS_CACHE_DIR"));
  if (auto m = pick(o.aggregation, f.aggregation, file.str("aggregation"), std::nullopt)) {
    rc.aggregation = parse_aggregation_mode(*m);
  }
  if (auto v = pick(o.variant, f.variant, file.str("variant"), std::nullopt)) rc.variant = parse_prompt_variant(*v);
  if (auto fmt_name = pick(o.format, f.format, file.str("format"), env("MEDZS_FORMAT"))) {
    rc.format = parse_report_format(*fmt_name);
  }
  rc.text_template = pick(o.text_template, f.text_template, file.str("text_template"), std::nullopt);
  if (o.strict && o.strict->count() > 0) {
    rc.strict = f.strict;
  } else if (auto s = file.boolean("strict")) {
    rc.strict = *s;
  }
  if (o.workers && o.workers->count() > 0) {
    rc.workers = f.workers;
  } else if (auto w = file.number<int>(file.doc(), "workers")) {
    rc.workers = *w;
  } else if (auto w = env("MEDZS_WORKERS")) {
    rc.workers = parse_workers(*w, "MEDZS_WORKERS");
  }
  if (rc.workers < 1) throw Error(ErrorCode::kInvalidArgument, fmt::format("workers must be >= 1 (got {})", rc.workers));

  const json& llm = file.llm();
  if (auto e = pick(o.llm_endpoint, f.llm_endpoint, file.str(llm, "endpoint"), env("MEDZS_LLM_ENDPOINT"))) {
    rc.llm.endpoint = *e;
  }
  if (auto m = pick(o.llm_model, f.llm_model, file.str(llm, "model"), env("MEDZS_LLM_MODEL"))) rc.llm.model = *m;
  if (auto t = file.number<double>(llm, "temperature")) rc.llm.temperature = *t;
  if (auto k = file.str(llm, "api_key_env")) rc.llm.api_key_env = *k;
  if (auto t = file.number<int>(llm, "timeout_seconds")) rc.llm.timeout_seconds = *t;
  return rc;
}

const fs::path& require(const std::optional<fs::path>& p, const char* what, const char* flag) {
  if (!p) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("no {} given (use {} or the config file)", what, flag));
  }
  if (!fs::exists(*p)) throw Error(ErrorCode::kIo, fmt::format("{} '{}' does not exist", what, p->string()));
  return *p;
}

void emit(std::ostream& out, std::ostream& err, const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    out << text;
    out.flush();
  } else {
    write_file_atomic(out_path, text);
    err << "wrote " << out_path << "\n";
  }
}

std::string short_id(const std::string& fp) { return fp.substr(0, std::min<std::size_t>(12, fp.size())); }

struct LoadedEncoder {
  std::string label;
  std::shared_ptr<const EncoderBundle> bundle;
  std::unique_ptr<BundleEmbeddingProvider> provider;
};

LoadedEncoder load_encoder(const fs::path& path, const RunConfig& rc, std::string label = {}) {
  LoadedEncoder e;
  e.bundle = EncoderBundle::load(path);
  e.provider = std::make_unique<BundleEmbeddingProvider>(e.bundle, rc.text_template);
  e.label = label.empty() ? e.bundle->manifest().name : std::move(label);
  return e;
}

// Rejects a KB generated with a different prompt variant than requested.
void check_variant(const KnowledgeBase& kb, const RunConfig& rc) {
  if (!rc.variant) return;
  const std::string want(to_string(*rc.variant));
  for (const auto& c : kb.classes) {
    if (c.prompt_id != want) {
      throw Error(ErrorCode::kConfigMismatch,
                  fmt::format("knowledge base '{}' class '{}' was generated with prompt '{}', not '{}'", kb.kb_id,
                              c.class_id, c.prompt_id, want));
    }
  }
}

std::optional<fs::path> embedding_cache_dir(const RunConfig& rc) { return rc.cache_dir; }

void log_cache(std::ostream& err, const EmbeddingCache& cache, bool verbose) {
  if (!verbose) return;
  err << fmt::format("cache: text {} hit / {} miss, image {} hit / {} miss\n", cache.text_hits(), cache.text_misses(),
                     cache.image_hits(), cache.image_misses());
}

// "label=path" or "path".
std::pair<std::string, fs::path> split_labeled(const std::string& labeled) {
  const auto eq = labeled.find('=');
  if (eq == std::string::npos || eq == 0) return {"", fs::path(labeled)};
  return {labeled.substr(0, eq), fs::path(labeled.substr(eq + 1))};
}

// --- Commands ---------------------------------------------------------------

struct GenerateArgs {
  std::string categories;
  std::string out;
  std::string kb_id;
  std::string dataset_id;
};

int cmd_generate_kb(const GenerateArgs& a, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const CategoryList list = load_categories(a.categories);
  const PromptVariant variant = rc.variant.value_or(PromptVariant::kDesigned);
  const PromptTemplate& tmpl = builtin_template(variant);

  std::optional<ResponseCache> cache;
  if (rc.cache_dir) cache.emplace(*rc.cache_dir / "llm");
  const auto transport = transport_from_env(rc.llm);
  LlmContext ctx{rc.llm, cache ? &*cache : nullptr, transport.get()};

  BuildOptions opts;
  opts.kb_id = a.kb_id;
  opts.dataset_id = a.dataset_id.empty() ? list.dataset_id : std::optional<std::string>(a.dataset_id);
  if (opts.kb_id.empty() && opts.dataset_id) opts.kb_id = fmt::format("{}-{}", *opts.dataset_id, tmpl.id);
  opts.workers = rc.workers;

  KnowledgeBase kb;
  try {
    kb = build_kb(list.categories, tmpl, ctx, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kEmptyInput) throw;
    throw ExitError(kExitLlm, fmt::format("knowledge generation failed: {} [{}]", e.what(), to_string(e.code())));
  }
  save_kb(kb, a.out);

  std::vector<std::vector<std::string>> rows;
  for (const auto& c : kb.classes) rows.push_back({c.class_id, c.display_name, std::to_string(c.symptoms.size())});
  switch (rc.format) {
    case ReportFormat::kJson: {
      ordered_json j;
      j["kb_id"] = kb.kb_id;
      j["path"] = a.out;
      j["prompt"] = tmpl.id;
      ordered_json classes = ordered_json::array();
      for (const auto& c : kb.classes) classes.push_back({{"class_id", c.class_id}, {"symptoms", c.symptoms.size()}});
      j["classes"] = std::move(classes);
      out << j.dump(2) << "\n";
      break;
    }
    case ReportFormat::kCsv:
      out << "class_id,display_name,symptoms\n";
      for (const auto& r : rows) out << csv_escape(r[0]) << "," << csv_escape(r[1]) << "," << r[2] << "\n";
      break;
    case ReportFormat::kText: {
      const std::vector<std::string> headers{"class", "category", "symptoms"};
      out << fmt::format("knowledge base '{}' ({} prompt) -> {}\n", kb.kb_id, tmpl.id, a.out);
      out << render_table(headers, rows);
      break;
    }
  }
  if (cache) err << fmt::format("llm cache: {} hit / {} miss\n", cache->hits(), cache->misses());
  return kExitOk;
}

struct ClassifyArgs {
  std::vector<std::string> images;
  std::string out;
  bool verbose = false;
};

int cmd_classify(const ClassifyArgs& a, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const KnowledgeBase kb = load_kb(require(rc.kb, "knowledge base", "--kb"));
  check_variant(kb, rc);
  const LoadedEncoder enc = load_encoder(require(rc.bundle, "encoder bundle", "--bundle"), rc);
  if (kb.encoder_fingerprint && *kb.encoder_fingerprint != enc.provider->fingerprint()) {
    throw Error(ErrorCode::kConfigMismatch, fmt::format("knowledge base '{}' is pinned to encoder {}, bundle is {}",
                                                        kb.kb_id, short_id(*kb.encoder_fingerprint),
                                                        short_id(enc.provider->fingerprint())));
  }
  EmbeddingCache cache(embedding_cache_dir(rc));
  const auto classes = embed_knowledge_base(kb, *enc.provider, cache);

  std::map<std::string, std::string> echo{{"kb", kb.kb_id},
                                          {"encoder", enc.label},
                                          {"fingerprint", short_id(enc.provider->fingerprint())}};
  if (!kb.classes.empty()) echo["prompt"] = kb.classes.front().prompt_id;

  std::vector<CaseReport> reports;
  for (const auto& image : a.images) {
    Embedding f;
    try {
      f = cache.image(*enc.provider, read_file_bytes(image));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}: {}", image, e.what()));
    }
    reports.push_back(build_case_report(classify(f, classes, rc.aggregation), image, echo));
  }
  const std::string text =
      reports.size() == 1 ? export_report(reports.front(), rc.format) : export_reports(reports, rc.format);
  emit(out, err, text, a.out);
  log_cache(err, cache, a.verbose);
  return kExitOk;
}

struct EvalArgs {
  std::string manifest;
  bool baseline = false;
  std::string out;
  bool verbose = false;
};

int cmd_eval(const EvalArgs& a, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetManifest manifest = load_manifest(a.manifest);
  const KnowledgeBase kb = load_kb(require(rc.kb, "knowledge base", "--kb"));
  check_variant(kb, rc);
  const LoadedEncoder enc = load_encoder(require(rc.bundle, "encoder bundle", "--bundle"), rc);
  EmbeddingCache cache(embedding_cache_dir(rc));
  EvalConfig cfg{rc.aggregation, rc.strict, rc.workers};

  const EvalResult ours = evaluate(manifest, kb, *enc.provider, cfg, cache);
  std::optional<EvalResult> base;
  if (a.baseline) base = evaluate(manifest, make_baseline_kb(kb), *enc.provider, cfg, cache);

  std::string text;
  if (!base) {
    switch (rc.format) {
      case ReportFormat::kJson: text = eval_result_to_json(ours); break;
      case ReportFormat::kCsv: text = eval_result_to_csv(ours); break;
      case ReportFormat::kText: text = eval_result_to_text(ours); break;
    }
  } else {
    const std::vector<GainRow> gains{compare(ours, *base)};
    switch (rc.format) {
      case ReportFormat::kJson: {
        ordered_json j;
        j["ours"] = ordered_json::parse(eval_result_to_json(ours));
        j["baseline"] = ordered_json::parse(eval_result_to_json(*base));
        j["gains"] = ordered_json::parse(gain_rows_to_json(gains));
        text = j.dump(2) + "\n";
        break;
      }
      case ReportFormat::kCsv: text = gain_rows_to_csv(gains); break;
      case ReportFormat::kText:
        text = eval_result_to_text(ours) + "\n" + eval_result_to_text(*base) + "\n" + gain_rows_to_text(gains);
        break;
    }
  }
  emit(out, err, text, a.out);
  log_cache(err, cache, a.verbose);
  if (a.verbose) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << fmt::format("evaluated {} images in {:.2f} s\n", manifest.entries.size(), secs);
  }
  return kExitOk;
}

struct SweepArgs {
  std::string manifest;
  std::string grid;
  std::vector<std::string> kbs;
  std::vector<std::string> bundles;
  std::vector<std::string> modes;
  bool baseline = false;
  std::string out;
  bool verbose = false;
};

std::vector<std::string> grid_list(const json& grid, const char* key, const fs::path& dir) {
  std::vector<std::string> out;
  if (!grid.contains(key)) return out;
  if (!grid[key].is_array()) throw Error(ErrorCode::kInvalidArgument, fmt::format("grid: '{}' must be an array", key));
  for (const auto& v : grid[key]) {
    auto resolve_rel = [&](const std::string& p) {
      const fs::path path(p);
      return path.is_absolute() ? path.string() : (dir / path).string();
    };
    if (v.is_string()) {
      const bool is_path = std::string_view(key) != "modes";
      out.push_back(is_path ? resolve_rel(v.get<std::string>()) : v.get<std::string>());
    } else if (v.is_object() && v.contains("path") && v["path"].is_string()) {
      const std::string label = v.contains("label") && v["label"].is_string() ? v["label"].get<std::string>() : "";
      const std::string path = resolve_rel(v["path"].get<std::string>());
      out.push_back(label.empty() ? path : label + "=" + path);
    } else {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("grid: bad entry in '{}'", key));
    }
  }
  return out;
}

int cmd_sweep(SweepArgs a, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (!a.grid.empty()) {
    json grid;
    try {
      grid = json::parse(read_text_file(a.grid));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("{}: {}", a.grid, e.what()));
    }
    const fs::path dir = fs::path(a.grid).parent_path();
    if (a.manifest.empty() && grid.contains("manifest") && grid["manifest"].is_string()) {
      const fs::path m(grid["manifest"].get<std::string>());
      a.manifest = (m.is_absolute() ? m : dir / m).string();
    }
    if (a.kbs.empty()) a.kbs = grid_list(grid, "kbs", dir);
    if (a.bundles.empty()) a.bundles = grid_list(grid, "bundles", dir);
    if (a.modes.empty()) a.modes = grid_list(grid, "modes", dir);
    if (grid.contains("baseline") && grid["baseline"].is_boolean()) a.baseline = a.baseline || grid["baseline"].get<bool>();
  }
  if (a.manifest.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep needs a manifest (--manifest or grid file)");
  if (a.kbs.empty() && rc.kb) a.kbs.push_back(rc.kb->string());
  if (a.bundles.empty() && rc.bundle) a.bundles.push_back(rc.bundle->string());
  if (a.modes.empty()) a.modes = {"mean", "max"};
  if (a.kbs.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep needs at least one --kb");
  if (a.bundles.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep needs at least one --bundle");

  const DatasetManifest manifest = load_manifest(a.manifest);
  std::vector<SweepKb> kbs;
  for (const auto& labeled : a.kbs) {
    auto [label, path] = split_labeled(labeled);
    KnowledgeBase kb = load_kb(require(path, "knowledge base", "--kb"));
    check_variant(kb, rc);
    kbs.push_back({label.empty() ? kb.kb_id : label, std::move(kb)});
  }
  if (a.baseline) kbs.push_back({"category-names", make_baseline_kb(kbs.front().kb)});
  std::vector<LoadedEncoder> loaded;
  std::vector<SweepEncoder> encoders;
  for (const auto& labeled : a.bundles) {
    auto [label, path] = split_labeled(labeled);
    loaded.push_back(load_encoder(require(path, "encoder bundle", "--bundle"), rc, label));
  }
  for (const auto& e : loaded) encoders.push_back({e.label, e.provider.get()});
  std::vector<AggregationMode> modes;
  for (const auto& m : a.modes) modes.push_back(parse_aggregation_mode(m));

  EmbeddingCache cache(embedding_cache_dir(rc));
  EvalConfig cfg{rc.aggregation, rc.strict, rc.workers};
  const SweepResult result = sweep(manifest, kbs, encoders, modes, cfg, cache);

  std::string text;
  switch (rc.format) {
    case ReportFormat::kJson: text = sweep_to_json(result); break;
    case ReportFormat::kCsv: text = sweep_to_csv(result); break;
    case ReportFormat::kText: text = sweep_to_text(result); break;
  }
  emit(out, err, text, a.out);
  log_cache(err, cache, a.verbose);

  // The table is still printed, but a failed cell fails the command.
  for (const auto& cell : result.cells) {
    if (cell.error_code) return exit_code_for(*cell.error_code);
  }
  return kExitOk;
}

struct ExportArgs {
  std::string input;
  std::string out;
};

int cmd_export_report(const ExportArgs& a, const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto reports = reports_from_json(read_text_file(a.input));
  if (reports.empty()) throw Error(ErrorCode::kSchema, fmt::format("{}: no reports", a.input));
  const std::string text =
      reports.size() == 1 ? export_report(reports.front(), rc.format) : export_reports(reports, rc.format);
  emit(out, err, text, a.out);
  return kExitOk;
}

void add_common(CLI::App* sub, Flags& f, Options& o) {
  o.config = sub->add_option("--config", f.config, "JSON config file (flags override it; it overrides env)");
  o.format = sub->add_option("--format", f.format, "Output format: json, csv or text")
                 ->check(CLI::IsMember({"json", "csv", "text"}));
  o.workers = sub->add_option("--workers", f.workers, "Worker threads (>= 1)");
  o.cache_dir = sub->add_option("--cache-dir", f.cache_dir, "Cache root (LLM answers, image embeddings)");
  o.variant = sub->add_option("--variant", f.variant, "Prompt variant: designed or baseline")
                  ->check(CLI::IsMember({"designed", "baseline"}));
}

void add_encoder_opts(CLI::App* sub, Flags& f, Options& o) {
  o.bundle = sub->add_option("--bundle", f.bundle, "Encoder bundle directory or manifest");
  o.kb = sub->add_option("--kb", f.kb, "Knowledge base JSON");
  o.aggregation = sub->add_option("--aggregation,--mode", f.aggregation, "Symptom aggregation: mean or max")
                      ->check(CLI::IsMember({"mean", "max"}));
  o.text_template = sub->add_option("--text-template", f.text_template, "Wrap every symptom, e.g. 'a photo of {}.'");
  o.strict = sub->add_flag("--strict,!--no-strict", f.strict, "Abort on the first unreadable image (default on)");
  sub->add_flag("-v,--verbose", f.verbose, "Print cache statistics and timing to stderr");
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTransport:
    case ErrorCode::kEmptyResponse:
      return kExitLlm;
    case ErrorCode::kConfigMismatch:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimension:
      return kExitConfig;
    case ErrorCode::kManifestMismatch:
      return kExitManifest;
    default:
      return kExitIo;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot medical image classification from symptom descriptions", "medzs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "medzs 0.1.0");

  Flags flags;

  Options gen_opts, c_opts, e_opts, s_opts, x_opts;

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-kb", "Query the LLM (or its cache) for symptom lists and write a KB");
  g->add_option("categories", gen.categories, "Preset JSON or text file of categories")->required();
  g->add_option("-o,--out", gen.out, "Output KB path")->required();
  g->add_option("--kb-id", gen.kb_id, "Knowledge base id");
  g->add_option("--dataset-id", gen.dataset_id, "Dataset id recorded in the KB");
  gen_opts.llm_endpoint = g->add_option("--llm-endpoint", flags.llm_endpoint, "Chat-completions URL");
  gen_opts.llm_model = g->add_option("--llm-model", flags.llm_model, "Model name");

  ClassifyArgs cls;
  auto* c = app.add_subcommand("classify", "Diagnose one or more images and print ranked evidence");
  c->add_option("images", cls.images, "Image files (PNG or JPEG)")->required();
  c->add_option("-o,--out", cls.out, "Write the report here instead of stdout");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Accuracy and confusion matrix over a labeled manifest");
  e->add_option("manifest", ev.manifest, "Manifest (JSON, or CSV with a .classes.txt sidecar)")->required();
  e->add_flag("--baseline", ev.baseline, "Also run the category-name KB and print gains");
  e->add_option("-o,--out", ev.out, "Write results here instead of stdout");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Evaluate every (KB, aggregation, encoder) combination");
  s->add_option("--manifest", sw.manifest, "Manifest file");
  s->add_option("--grid", sw.grid, "JSON grid: {manifest, kbs, bundles, modes, baseline}");
  s->add_option("--kbs", sw.kbs, "Knowledge bases as [label=]path")->delimiter(',');
  s->add_option("--bundles", sw.bundles, "Encoder bundles as [label=]path")->delimiter(',');
  s->add_option("--modes", sw.modes, "Aggregation modes (default mean,max)")
      ->delimiter(',')
      ->check(CLI::IsMember({"mean", "max"}));
  s->add_flag("--baseline", sw.baseline, "Add category-name rows built from the first KB");
  s->add_option("-o,--out", sw.out, "Write results here instead of stdout");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-report", "Convert saved JSON case reports to csv, text or json");
  x->add_option("input", ex.input, "JSON report written by classify --format json")->required();
  x->add_option("-o,--out", ex.out, "Write here instead of stdout");

  // Each subcommand gets its own option objects; only one is parsed.
  add_common(g, flags, gen_opts);
  add_common(c, flags, c_opts);
  add_common(e, flags, e_opts);
  add_common(s, flags, s_opts);
  add_common(x, flags, x_opts);
  add_encoder_opts(c, flags, c_opts);
  add_encoder_opts(e, flags, e_opts);
  add_encoder_opts(s, flags, s_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForVersion& v) {
    return app.exit(v, out, err);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_generate_kb(gen, resolve(flags, gen_opts), out, err);
    if (c->parsed()) {
      cls.verbose = flags.verbose;
      return cmd_classify(cls, resolve(flags, c_opts), out, err);
    }
    if (e->parsed()) {
      ev.verbose = flags.verbose;
      return cmd_eval(ev, resolve(flags, e_opts), out, err);
    }
    if (s->parsed()) {
      sw.verbose = flags.verbose;
      return cmd_sweep(sw, resolve(flags, s_opts), out, err);
    }
    if (x->parsed()) return cmd_export_report(ex, resolve(flags, x_opts), out, err);
  } catch (const ExitError& ee) {
    err << "error: " << ee.what() << "\n";
    return ee.status;
  } catch (const Error& er) {
    err << "error: " << er.what() << " [" << to_string(er.code()) << "]\n";
    return exit_code_for(er.code());
  } catch (const std::exception& ex2) {
    err << "error: " << ex2.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace medzs::cli
