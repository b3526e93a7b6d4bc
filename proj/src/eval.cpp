// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/hash.hpp"
#include "medzs/io.hpp"

namespace medzs {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record (no embedded newlines) honoring double quotes.
std::vector<std::string> split_csv_line(std::string_view line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, fmt::format("{}: unterminated quote", where));
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<std::string> read_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

DatasetManifest load_csv_manifest(const std::filesystem::path& path) {
  DatasetManifest m;
  m.dataset_id = path.stem().string();
  m.image_root = path.parent_path();
  const auto lines = read_lines(read_text_file(path));
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = fmt::format("{}:{}", path.string(), i + 1);
    if (trim(lines[i]).empty()) continue;
    auto fields = split_csv_line(lines[i], where);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != 2 || trim(fields[0]) != "path" || trim(fields[1]) != "label") {
        throw Error(ErrorCode::kSchema, fmt::format("{}: expected header 'path,label'", where));
      }
      continue;
    }
    if (fields.size() != 2) throw Error(ErrorCode::kSchema, fmt::format("{}: expected two fields", where));
    m.entries.push_back({std::string(trim(fields[0])), std::string(trim(fields[1]))});
  }
  auto sidecar = path.parent_path() / (path.stem().string() + ".classes.txt");
  if (!std::filesystem::exists(sidecar)) {
    throw Error(ErrorCode::kIo, fmt::format("{}: class list sidecar {} not found", path.string(), sidecar.string()));
  }
  for (const auto& line : read_lines(read_text_file(sidecar))) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    m.classes.emplace_back(t);
  }
  return m;
}

DatasetManifest load_json_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
  auto fail = [&](std::string_view what) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: {}", path.string(), what));
  };
  if (!doc.is_object()) fail("top level must be an object");
  DatasetManifest m;
  if (!doc.contains("dataset_id") || !doc["dataset_id"].is_string()) fail("missing string 'dataset_id'");
  m.dataset_id = doc["dataset_id"];
  if (!doc.contains("classes") || !doc["classes"].is_array()) fail("missing array 'classes'");
  for (const auto& c : doc["classes"]) {
    if (!c.is_string()) fail("class ids must be strings");
    m.classes.push_back(c);
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) fail("missing array 'entries'");
  for (const auto& e : doc["entries"]) {
    if (!e.is_object() || !e.contains("path") || !e["path"].is_string() || !e.contains("label") ||
        !e["label"].is_string()) {
      fail("entries need string 'path' and 'label'");
    }
    m.entries.push_back({e["path"], e["label"]});
  }
  std::filesystem::path root = path.parent_path();
  if (doc.contains("image_root")) {
    if (!doc["image_root"].is_string()) fail("'image_root' must be a string");
    const std::filesystem::path r(doc["image_root"].get<std::string>());
    root = r.is_absolute() ? r : path.parent_path() / r;
  }
  m.image_root = root;
  return m;
}

std::string prompt_variant_of(const KnowledgeBase& kb) {
  std::set<std::string> ids;
  for (const auto& c : kb.classes) ids.insert(c.prompt_id);
  return ids.size() == 1 ? *ids.begin() : "mixed";
}

std::string text_key(const std::string& fingerprint, std::string_view text) {
  std::string key = fingerprint;
  key.push_back('\x1f');
  key.append(text);
  return key;
}

ordered_json cell_json(const SweepCell& c) {
  ordered_json j;
  j["kb"] = c.kb_label;
  j["aggregation"] = std::string(to_string(c.mode));
  j["encoder"] = c.encoder_label;
  if (c.result) {
    j["accuracy"] = c.result->accuracy;
    j["correct"] = c.result->correct;
    j["total"] = c.result->total;
  } else {
    j["accuracy"] = nullptr;
  }
  if (c.error) j["error"] = *c.error;
  return j;
}

std::string short_fp(const std::string& fp) { return fp.size() > 12 ? fp.substr(0, 12) : fp; }

}  // namespace

// --- Manifests ---------------------------------------------------------------

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  const std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : image_root / p;
}

std::string DatasetManifest::content_id() const {
  std::vector<std::string> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) rows.push_back(e.path + '\x1f' + e.class_id);
  std::sort(rows.begin(), rows.end());
  Sha256 h;
  h.update("medzs-manifest/1\n").update(dataset_id).update("\n");
  for (const auto& c : classes) h.update(c).update("\x1e");
  h.update("\n");
  for (const auto& r : rows) h.update(r).update("\n");
  return h.hex_digest();
}

void validate_manifest(const DatasetManifest& m) {
  if (m.dataset_id.empty()) throw Error(ErrorCode::kSchema, "manifest: dataset_id must not be empty");
  if (m.classes.empty()) throw Error(ErrorCode::kSchema, fmt::format("manifest '{}': no classes", m.dataset_id));
  if (m.entries.empty()) throw Error(ErrorCode::kSchema, fmt::format("manifest '{}': no entries", m.dataset_id));
  std::set<std::string, std::less<>> classes;
  for (const auto& c : m.classes) {
    if (c.empty() || !classes.insert(c).second) {
      throw Error(ErrorCode::kSchema, fmt::format("manifest '{}': empty or duplicate class '{}'", m.dataset_id, c));
    }
  }
  std::set<std::string, std::less<>> paths;
  for (const auto& e : m.entries) {
    if (e.path.empty()) throw Error(ErrorCode::kSchema, fmt::format("manifest '{}': empty path", m.dataset_id));
    if (!paths.insert(e.path).second) {
      throw Error(ErrorCode::kSchema, fmt::format("manifest '{}': duplicate path '{}'", m.dataset_id, e.path));
    }
    if (!classes.count(e.class_id)) {
      throw Error(ErrorCode::kManifestMismatch,
                  fmt::format("manifest '{}': '{}' has label '{}' outside the class list", m.dataset_id, e.path,
                              e.class_id));
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  DatasetManifest m = path.extension() == ".csv" ? load_csv_manifest(path) : load_json_manifest(path);
  validate_manifest(m);
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ordered_json doc;
  doc["dataset_id"] = m.dataset_id;
  doc["classes"] = m.classes;
  ordered_json entries = ordered_json::array();
  for (const auto& e : m.entries) entries.push_back({{"path", e.path}, {"label", e.class_id}});
  doc["entries"] = std::move(entries);
  return doc.dump(2) + "\n";
}

// --- Embedding cache ---------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::optional<std::filesystem::path> disk_dir) : disk_dir_(std::move(disk_dir)) {}

std::vector<Embedding> EmbeddingCache::texts(const EmbeddingProvider& provider, std::span<const std::string> texts) {
  const std::string& fp = provider.fingerprint();
  std::vector<std::optional<Embedding>> found(texts.size());
  std::vector<std::string> missing;
  {
    std::shared_lock lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto it = text_.find(text_key(fp, texts[i]));
      if (it != text_.end()) found[i] = it->second;
    }
  }
  std::set<std::string> queued;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (found[i]) {
      ++text_hits_;
    } else if (queued.insert(texts[i]).second) {
      missing.push_back(texts[i]);
    }
  }
  if (!missing.empty()) {
    text_misses_ += missing.size();
    auto encoded = provider.embed_texts(missing);
    std::unique_lock lock(mutex_);
    for (std::size_t i = 0; i < missing.size(); ++i) text_.insert_or_assign(text_key(fp, missing[i]), encoded[i]);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (!found[i]) found[i] = text_.at(text_key(fp, texts[i]));
    }
  }
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (auto& f : found) out.push_back(std::move(*f));
  return out;
}

Embedding EmbeddingCache::image(const EmbeddingProvider& provider, std::span<const std::uint8_t> encoded) {
  const std::string digest = sha256_hex(encoded);
  const std::string key = provider.fingerprint() + '\x1f' + digest;
  {
    std::shared_lock lock(mutex_);
    const auto it = image_.find(key);
    if (it != image_.end()) {
      ++image_hits_;
      return it->second;
    }
  }
  std::optional<Embedding> e = load_image_from_disk(provider.fingerprint(), digest, provider.dimension());
  if (e) {
    ++image_hits_;
  } else {
    ++image_misses_;
    e = provider.embed_image(encoded);
    store_image_on_disk(provider.fingerprint(), digest, *e);
  }
  std::unique_lock lock(mutex_);
  image_.insert_or_assign(key, *e);
  return *e;
}

std::optional<Embedding> EmbeddingCache::load_image_from_disk(const std::string& fingerprint,
                                                              const std::string& digest, std::size_t dim) const {
  if (!disk_dir_) return std::nullopt;
  const auto path = *disk_dir_ / "image-embeddings" / short_fp(fingerprint) / (digest + ".f64");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  const auto bytes = read_file_bytes(path);
  if (bytes.size() != dim * sizeof(double)) return std::nullopt;
  std::vector<double> values(dim);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return Embedding(std::move(values), true);
}

void EmbeddingCache::store_image_on_disk(const std::string& fingerprint, const std::string& digest,
                                         const Embedding& e) const {
  if (!disk_dir_) return;
  const auto path = *disk_dir_ / "image-embeddings" / short_fp(fingerprint) / (digest + ".f64");
  const auto values = e.values();
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(values.data()), values.size_bytes()));
}

std::vector<ClassEmbeddings> embed_knowledge_base(const KnowledgeBase& kb, const EmbeddingProvider& provider,
                                                  EmbeddingCache& cache) {
  std::vector<std::string> all;
  for (const auto& c : kb.classes) all.insert(all.end(), c.symptoms.begin(), c.symptoms.end());
  if (all.empty()) throw Error(ErrorCode::kEmptyDescriptor, fmt::format("knowledge base '{}' has no symptoms", kb.kb_id));
  auto embeddings = cache.texts(provider, all);
  std::vector<ClassEmbeddings> out;
  out.reserve(kb.classes.size());
  std::size_t k = 0;
  for (const auto& c : kb.classes) {
    ClassEmbeddings ce;
    ce.class_id = c.class_id;
    ce.symptoms = c.symptoms;
    for (std::size_t i = 0; i < c.symptoms.size(); ++i) ce.embeddings.push_back(std::move(embeddings[k++]));
    out.push_back(std::move(ce));
  }
  return out;
}

// --- Evaluation -------------------------------------------------------------

EvalResult tally(std::span<const std::string> classes, std::span<const EvalItem> items) {
  EvalResult r;
  r.classes.assign(classes.begin(), classes.end());
  const std::size_t k = classes.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  r.support.assign(k, 0);
  auto index_of = [&](const std::string& id) {
    const auto it = std::find(classes.begin(), classes.end(), id);
    if (it == classes.end()) {
      throw Error(ErrorCode::kManifestMismatch, fmt::format("class '{}' is not in the knowledge base", id));
    }
    return static_cast<std::size_t>(it - classes.begin());
  };
  for (const auto& item : items) {
    if (!item.predicted) {
      ++r.failures;
      continue;
    }
    const std::size_t t = index_of(item.truth);
    const std::size_t p = index_of(*item.predicted);
    ++r.confusion[t][p];
    ++r.support[t];
    ++r.total;
    if (t == p) ++r.correct;
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.items.assign(items.begin(), items.end());
  return r;
}

EvalResult evaluate(const DatasetManifest& manifest, const KnowledgeBase& kb, const EmbeddingProvider& provider,
                    const EvalConfig& config, EmbeddingCache& cache) {
  validate_manifest(manifest);
  validate_kb(kb);
  for (const auto& c : manifest.classes) {
    if (!kb.find(c)) {
      throw Error(ErrorCode::kManifestMismatch, fmt::format("manifest '{}' class '{}' is missing from knowledge base '{}'",
                                                            manifest.dataset_id, c, kb.kb_id));
    }
  }
  if (kb.encoder_fingerprint && *kb.encoder_fingerprint != provider.fingerprint()) {
    throw Error(ErrorCode::kConfigMismatch,
                fmt::format("knowledge base '{}' was built for encoder {} but the loaded encoder is {}", kb.kb_id,
                            short_fp(*kb.encoder_fingerprint), short_fp(provider.fingerprint())));
  }
  const auto class_embeddings = embed_knowledge_base(kb, provider, cache);

  const auto n = static_cast<std::int64_t>(manifest.entries.size());
  std::vector<EvalItem> items(manifest.entries.size());
  std::vector<std::exception_ptr> errors(manifest.entries.size());
  std::atomic<bool> abort{false};
  const int workers = std::max(1, config.workers);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& entry = manifest.entries[idx];
    auto& item = items[idx];
    item.path = entry.path;
    item.truth = entry.class_id;
    if (abort.load()) continue;
    try {
      const auto bytes = read_file_bytes(manifest.resolve(entry));
      const Embedding f = cache.image(provider, bytes);
      const ScoreReport report = classify(f, class_embeddings, config.mode);
      item.predicted = report.predicted();
    } catch (const Error& e) {
      item.error = fmt::format("{}: {}", manifest.resolve(entry).string(), e.what());
      errors[idx] = std::make_exception_ptr(Error(e.code(), *item.error));
      if (config.strict) abort.store(true);
    } catch (const std::exception& e) {
      item.error = fmt::format("{}: {}", manifest.resolve(entry).string(), e.what());
      errors[idx] = std::make_exception_ptr(Error(ErrorCode::kIo, *item.error));
      if (config.strict) abort.store(true);
    }
  }
  if (config.strict) {
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<std::string> classes;
  for (const auto& c : kb.classes) classes.push_back(c.class_id);
  EvalResult r = tally(classes, items);
  if (r.total == 0) {
    throw Error(ErrorCode::kEmptyInput, fmt::format("no image of '{}' could be scored", manifest.dataset_id));
  }
  r.dataset_id = manifest.dataset_id;
  r.manifest_id = manifest.content_id();
  r.kb_id = kb.kb_id;
  r.encoder_fingerprint = provider.fingerprint();
  r.prompt_variant = prompt_variant_of(kb);
  r.aggregation = config.mode;
  return r;
}

// --- Comparison -------------------------------------------------------------

std::string format_percent(double percent) { return fmt::format("{:.2f}", percent); }

std::string format_gain(double gain) {
  std::string s = fmt::format("{:+.2f}", gain);
  if (s == "-0.00") s = "+0.00";
  return s;
}

std::string GainRow::ours_display() const { return format_percent(ours); }
std::string GainRow::baseline_display() const { return format_percent(baseline); }
std::string GainRow::gain_display() const { return format_gain(gain); }

GainRow gain_row(std::string dataset_id, double ours_percent, double baseline_percent) {
  return GainRow{std::move(dataset_id), ours_percent, baseline_percent, ours_percent - baseline_percent};
}

GainRow compare(const EvalResult& ours, const EvalResult& baseline) {
  if (ours.manifest_id != baseline.manifest_id || ours.dataset_id != baseline.dataset_id) {
    throw Error(ErrorCode::kManifestMismatch,
                fmt::format("cannot compare results on different manifests ('{}' vs '{}')", ours.dataset_id,
                            baseline.dataset_id));
  }
  if (ours.encoder_fingerprint != baseline.encoder_fingerprint) {
    throw Error(ErrorCode::kConfigMismatch, "cannot compare results produced by different encoders");
  }
  return gain_row(ours.dataset_id, 100.0 * ours.accuracy, 100.0 * baseline.accuracy);
}

// --- Sweep ------------------------------------------------------------------

SweepResult sweep(const DatasetManifest& manifest, std::span<const SweepKb> kbs, std::span<const SweepEncoder> encoders,
                  std::span<const AggregationMode> modes, const EvalConfig& config, EmbeddingCache& cache) {
  if (kbs.empty() || encoders.empty() || modes.empty()) {
    throw Error(ErrorCode::kEmptyInput, "sweep needs at least one knowledge base, encoder and aggregation mode");
  }
  SweepResult out;
  out.dataset_id = manifest.dataset_id;
  for (const auto& kb : kbs) {
    for (const auto mode : modes) out.row_labels.push_back(fmt::format("{}/{}", kb.label, to_string(mode)));
  }
  for (const auto& enc : encoders) out.column_labels.push_back(enc.label);
  for (const auto& kb : kbs) {
    for (const auto mode : modes) {
      for (const auto& enc : encoders) {
        SweepCell cell{kb.label, mode, enc.label, std::nullopt, std::nullopt, std::nullopt};
        try {
          if (enc.provider == nullptr) throw Error(ErrorCode::kInvalidArgument, "encoder not loaded");
          EvalConfig cfg = config;
          cfg.mode = mode;
          cell.result = evaluate(manifest, kb.kb, *enc.provider, cfg, cache);
        } catch (const Error& e) {
          cell.error = e.what();
          cell.error_code = e.code();
        } catch (const std::exception& e) {
          cell.error = e.what();
          cell.error_code = ErrorCode::kIo;
        }
        out.cells.push_back(std::move(cell));
      }
    }
  }
  out.best.assign(encoders.size(), std::nullopt);
  for (std::size_t r = 0; r < out.row_labels.size(); ++r) {
    for (std::size_t c = 0; c < encoders.size(); ++c) {
      const auto& cell = out.at(r, c);
      if (!cell.result) continue;
      if (!out.best[c] || cell.result->accuracy > *out.best[c]) out.best[c] = cell.result->accuracy;
    }
  }
  return out;
}

// --- Rendering --------------------------------------------------------------

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string render_table(std::span<const std::string> headers, std::span<const std::vector<std::string>> rows) {
  std::vector<std::size_t> width(headers.size(), 0);
  auto display_width = [](const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  };
  for (std::size_t i = 0; i < headers.size(); ++i) width[i] = display_width(headers[i]);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  }
  auto emit = [&](std::string& out, std::span<const std::string> cells) {
    std::string line;
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string& cell = i < cells.size() ? cells[i] : std::string();
      const std::string pad(width[i] - display_width(cell), ' ');
      if (i > 0) line += "  ";
      line += i == 0 ? cell + pad : pad + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  };
  std::string out;
  emit(out, headers);
  std::size_t total = 0;
  for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i > 0 ? 2 : 0);
  out += std::string(total, '-') + "\n";
  for (const auto& row : rows) emit(out, row);
  return out;
}

std::string eval_result_to_json(const EvalResult& r) {
  ordered_json doc;
  doc["dataset_id"] = r.dataset_id;
  doc["accuracy"] = r.accuracy;
  doc["accuracy_percent"] = format_percent(100.0 * r.accuracy);
  doc["correct"] = r.correct;
  doc["total"] = r.total;
  doc["failures"] = r.failures;
  doc["classes"] = r.classes;
  doc["support"] = r.support;
  doc["confusion"] = r.confusion;
  ordered_json cfg;
  cfg["manifest_id"] = r.manifest_id;
  cfg["kb_id"] = r.kb_id;
  cfg["encoder_fingerprint"] = r.encoder_fingerprint;
  cfg["aggregation"] = std::string(to_string(r.aggregation));
  cfg["prompt_variant"] = r.prompt_variant;
  doc["config"] = std::move(cfg);
  ordered_json items = ordered_json::array();
  for (const auto& it : r.items) {
    ordered_json j;
    j["path"] = it.path;
    j["truth"] = it.truth;
    j["predicted"] = it.predicted ? ordered_json(*it.predicted) : ordered_json(nullptr);
    if (it.error) j["error"] = *it.error;
    items.push_back(std::move(j));
  }
  doc["items"] = std::move(items);
  return doc.dump(2) + "\n";
}

std::string eval_result_to_text(const EvalResult& r) {
  std::string out;
  out += fmt::format("dataset      {}\n", r.dataset_id);
  out += fmt::format("kb           {}\n", r.kb_id);
  out += fmt::format("encoder      {}\n", short_fp(r.encoder_fingerprint));
  out += fmt::format("aggregation  {}\n", to_string(r.aggregation));
  out += fmt::format("prompt       {}\n", r.prompt_variant);
  out += fmt::format("accuracy     {}% ({}/{})\n", format_percent(100.0 * r.accuracy), r.correct, r.total);
  out += fmt::format("failures     {}\n\n", r.failures);
  std::vector<std::string> headers{"truth \\ predicted"};
  headers.insert(headers.end(), r.classes.begin(), r.classes.end());
  headers.push_back("support");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < r.classes.size(); ++t) {
    std::vector<std::string> row{r.classes[t]};
    for (std::size_t p = 0; p < r.classes.size(); ++p) row.push_back(std::to_string(r.confusion[t][p]));
    row.push_back(std::to_string(r.support[t]));
    rows.push_back(std::move(row));
  }
  out += render_table(headers, rows);
  return out;
}

std::string eval_result_to_csv(const EvalResult& r) {
  std::string out = "dataset,kb,prompt,aggregation,encoder,accuracy,correct,total,failures\n";
  out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_escape(r.dataset_id), csv_escape(r.kb_id),
                     csv_escape(r.prompt_variant), to_string(r.aggregation), short_fp(r.encoder_fingerprint),
                     format_percent(100.0 * r.accuracy), r.correct, r.total, r.failures);
  return out;
}

std::string gain_rows_to_json(std::span<const GainRow> rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& g : rows) {
    ordered_json j;
    j["dataset_id"] = g.dataset_id;
    j["ours"] = g.ours;
    j["baseline"] = g.baseline;
    j["gain"] = g.gain;
    j["display"] = {{"ours", g.ours_display()}, {"baseline", g.baseline_display()}, {"gain", g.gain_display()}};
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string gain_rows_to_text(std::span<const GainRow> rows) {
  const std::vector<std::string> headers{"dataset", "category names", "ours", "gain"};
  std::vector<std::vector<std::string>> body;
  for (const auto& g : rows) body.push_back({g.dataset_id, g.baseline_display(), g.ours_display(), g.gain_display()});
  return render_table(headers, body);
}

std::string gain_rows_to_csv(std::span<const GainRow> rows) {
  std::string out = "dataset,baseline,ours,gain\n";
  for (const auto& g : rows) {
    out += fmt::format("{},{},{},{}\n", csv_escape(g.dataset_id), g.baseline_display(), g.ours_display(),
                       g.gain_display());
  }
  return out;
}

std::string sweep_to_json(const SweepResult& s) {
  ordered_json doc;
  doc["dataset_id"] = s.dataset_id;
  doc["rows"] = s.row_labels;
  doc["columns"] = s.column_labels;
  ordered_json cells = ordered_json::array();
  for (const auto& c : s.cells) cells.push_back(cell_json(c));
  doc["cells"] = std::move(cells);
  ordered_json best = ordered_json::array();
  for (const auto& b : s.best) best.push_back(b ? ordered_json(*b) : ordered_json(nullptr));
  doc["best"] = std::move(best);
  return doc.dump(2) + "\n";
}

std::string sweep_to_text(const SweepResult& s) {
  std::vector<std::string> headers{s.dataset_id};
  headers.insert(headers.end(), s.column_labels.begin(), s.column_labels.end());
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < s.row_labels.size(); ++r) {
    std::vector<std::string> row{s.row_labels[r]};
    for (std::size_t c = 0; c < s.column_labels.size(); ++c) {
      const auto& cell = s.at(r, c);
      row.push_back(cell.result ? format_percent(100.0 * cell.result->accuracy) : "error");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> best{"Best Acc"};
  for (const auto& b : s.best) best.push_back(b ? format_percent(100.0 * *b) : "-");
  rows.push_back(std::move(best));
  std::string out = render_table(headers, rows);
  for (const auto& cell : s.cells) {
    if (cell.error) {
      out += fmt::format("error [{}/{} @ {}]: {}\n", cell.kb_label, to_string(cell.mode), cell.encoder_label,
                         *cell.error);
    }
  }
  return out;
}

std::string sweep_to_csv(const SweepResult& s) {
  std::string out = "setting";
  for (const auto& c : s.column_labels) out += "," + csv_escape(c);
  out += "\n";
  for (std::size_t r = 0; r < s.row_labels.size(); ++r) {
    out += csv_escape(s.row_labels[r]);
    for (std::size_t c = 0; c < s.column_labels.size(); ++c) {
      const auto& cell = s.at(r, c);
      out += "," + (cell.result ? format_percent(100.0 * cell.result->accuracy) : std::string("error"));
    }
    out += "\n";
  }
  out += "Best Acc";
  for (const auto& b : s.best) out += "," + (b ? format_percent(100.0 * *b) : std::string());
  out += "\n";
  return out;
}

}  // namespace medzs
