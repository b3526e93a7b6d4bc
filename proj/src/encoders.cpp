// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/encoders.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

#include "medzs/error.hpp"
#include "medzs/hash.hpp"
#include "medzs/io.hpp"

namespace medzs {

namespace {

using nlohmann::json;

constexpr std::size_t kTextBatch = 32;

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::kSchema, fmt::format("bundle manifest: {}", what));
}

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) schema_error(fmt::format("missing field '{}'", key));
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string() || v.get<std::string>().empty()) schema_error(fmt::format("'{}' must be a non-empty string", key));
  return v.get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number_integer()) schema_error(fmt::format("'{}' must be an integer", key));
  return v.get<std::int64_t>();
}

std::array<float, 3> require_triplet(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_array() || v.size() != 3) schema_error(fmt::format("'{}' must list three channel values", key));
  std::array<float, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) schema_error(fmt::format("'{}' must be numeric", key));
    out[i] = v[i].get<float>();
  }
  return out;
}

bool is_hex_digest(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

void check_inside_bundle(const std::string& file) {
  const std::filesystem::path rel(file);
  if (file.empty() || rel.is_absolute() ||
      std::any_of(rel.begin(), rel.end(), [](const auto& p) { return p == ".."; })) {
    schema_error(fmt::format("asset path '{}' must stay inside the bundle directory", file));
  }
}

std::filesystem::path asset_path(const std::filesystem::path& dir, const std::string& file) {
  check_inside_bundle(file);
  return dir / std::filesystem::path(file);
}

GraphAsset parse_graph(const json& obj, const char* key) {
  const json& g = require(obj, key);
  GraphAsset a;
  a.file = require_string(g, "file");
  check_inside_bundle(a.file);
  a.input = require_string(g, "input");
  a.output = require_string(g, "output");
  a.sha256 = require_string(g, "sha256");
  if (!is_hex_digest(a.sha256)) schema_error(fmt::format("'{}.sha256' is not a SHA-256 hex digest", key));
  return a;
}


void verify_digest(const std::filesystem::path& path, const std::string& expected) {
  const std::string actual = sha256_file(path);
  if (actual != expected) {
    throw Error(ErrorCode::kIntegrity, fmt::format("{}: content hash {} does not match manifest ({})",
                                                   path.string(), actual, expected));
  }
}

std::string compute_fingerprint(const BundleManifest& m) {
  Sha256 h;
  h.update("medzs-bundle/1\n");
  h.update(fmt::format("visual {} {} {}\n", m.visual.sha256, m.visual.input, m.visual.output));
  h.update(fmt::format("text {} {} {}\n", m.text.sha256, m.text.input, m.text.output));
  h.update(fmt::format("merges {} {} {}\n", m.merges_sha256, m.context_length, m.pad_id));
  h.update(fmt::format("dim {}\n", m.embedding_dim));
  const auto& p = m.preprocess;
  h.update(fmt::format("preprocess {} {:.9g} {:.9g} {:.9g} {:.9g} {:.9g} {:.9g}\n", p.image_size, p.mean[0],
                       p.mean[1], p.mean[2], p.stdev[0], p.stdev[1], p.stdev[2]));
  return h.hex_digest();
}

// The embedding width a graph declares on its output, or -1 when symbolic.
std::int64_t declared_width(const runtime::GraphSession& s, const GraphAsset& a) {
  const auto outs = s.output_names();
  if (std::find(outs.begin(), outs.end(), a.output) == outs.end()) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: graph has no output named '{}'", s.identity(), a.output));
  }
  const auto ins = s.input_names();
  if (std::find(ins.begin(), ins.end(), a.input) == ins.end()) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: graph has no input named '{}'", s.identity(), a.input));
  }
  const auto shape = s.declared_shape(a.output);
  return shape.empty() ? -1 : shape.back();
}

}  // namespace

BundleManifest BundleManifest::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("bundle manifest: {}", e.what()));
  }
  if (!doc.is_object()) schema_error("top level must be an object");
  BundleManifest m;
  const auto version = require_int(doc, "format_version");
  if (version > kFormatVersion) {
    throw Error(ErrorCode::kVersion,
                fmt::format("bundle manifest format {} is newer than supported ({})", version, kFormatVersion));
  }
  if (version < 1) schema_error("format_version must be positive");
  m.format_version = static_cast<int>(version);
  m.name = require_string(doc, "name");
  if (doc.contains("description") && doc["description"].is_string()) m.description = doc["description"];
  const auto dim = require_int(doc, "embedding_dim");
  if (dim <= 0) schema_error("embedding_dim must be positive");
  m.embedding_dim = static_cast<std::size_t>(dim);
  m.visual = parse_graph(doc, "visual");
  m.text = parse_graph(doc, "text");

  const json& tok = require(doc, "tokenizer");
  m.merges_file = require_string(tok, "merges");
  check_inside_bundle(m.merges_file);
  m.merges_sha256 = require_string(tok, "sha256");
  if (!is_hex_digest(m.merges_sha256)) schema_error("'tokenizer.sha256' is not a SHA-256 hex digest");
  m.context_length = static_cast<int>(require_int(tok, "context_length"));
  if (m.context_length < 2) schema_error("context_length must be at least 2");
  m.pad_id = require_int(tok, "pad_id");

  const json& pre = require(doc, "preprocess");
  m.preprocess.image_size = static_cast<int>(require_int(pre, "image_size"));
  if (m.preprocess.image_size != 224) schema_error("preprocess.image_size must be 224");
  const std::string resize = require_string(pre, "resize");
  if (resize != "bicubic") schema_error(fmt::format("unsupported resize filter '{}'", resize));
  m.preprocess.mean = require_triplet(pre, "mean");
  m.preprocess.stdev = require_triplet(pre, "std");
  for (float s : m.preprocess.stdev) {
    if (!(s > 0.0f)) schema_error("preprocess.std entries must be positive");
  }
  return m;
}

std::shared_ptr<const EncoderBundle> EncoderBundle::load(const std::filesystem::path& location) {
  static const runtime::OnnxBackend backend;
  return load(location, backend);
}

std::shared_ptr<const EncoderBundle> EncoderBundle::load(const std::filesystem::path& location,
                                                         const runtime::Backend& backend) {
  std::filesystem::path manifest_path = location;
  if (std::filesystem::is_directory(location)) manifest_path = location / "manifest.json";
  std::shared_ptr<EncoderBundle> b(new EncoderBundle());
  b->manifest_ = BundleManifest::parse(read_text_file(manifest_path));
  b->dir_ = manifest_path.parent_path();
  const auto& m = b->manifest_;

  const auto visual_path = asset_path(b->dir_, m.visual.file);
  const auto text_path = asset_path(b->dir_, m.text.file);
  const auto merges_path = asset_path(b->dir_, m.merges_file);
  verify_digest(visual_path, m.visual.sha256);
  verify_digest(text_path, m.text.sha256);
  verify_digest(merges_path, m.merges_sha256);

  b->tokenizer_ = std::make_unique<BpeTokenizer>(BpeTokenizer::from_file(merges_path, m.context_length, m.pad_id));
  b->visual_ = backend.load(visual_path);
  b->text_ = backend.load(text_path);

  const auto dv = declared_width(*b->visual_, m.visual);
  const auto dt = declared_width(*b->text_, m.text);
  for (const auto& [d, who] : {std::pair{dv, &m.visual.file}, std::pair{dt, &m.text.file}}) {
    if (d >= 0 && static_cast<std::size_t>(d) != m.embedding_dim) {
      throw Error(ErrorCode::kDimension, fmt::format("{} declares output width {}, manifest says {}", *who, d,
                                                     m.embedding_dim));
    }
  }
  b->fingerprint_ = compute_fingerprint(m);
  return b;
}

ImageTensor EncoderBundle::preprocess(std::span<const std::uint8_t> encoded) const {
  return preprocess_image(encoded, manifest_.preprocess);
}

std::vector<Embedding> EncoderBundle::run_tower(const runtime::GraphSession& session, const GraphAsset& asset,
                                                runtime::Tensor input) const {
  const auto batch = input.shape().at(0);
  runtime::TensorMap outputs;
  try {
    runtime::TensorMap inputs;
    inputs.emplace(asset.input, std::move(input));
    outputs = session.run(inputs);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBackend) throw;
    throw Error(ErrorCode::kBackend, fmt::format("{}: {}", session.identity(), e.what()));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kBackend, fmt::format("{}: {}", session.identity(), e.what()));
  }
  const auto it = outputs.find(asset.output);
  if (it == outputs.end()) {
    throw Error(ErrorCode::kBackend, fmt::format("{}: output '{}' missing", session.identity(), asset.output));
  }
  const runtime::Tensor& out = it->second;
  const auto d = static_cast<std::int64_t>(manifest_.embedding_dim);
  if (out.rank() != 2 || out.shape()[0] != batch || out.shape()[1] != d || !out.is_float()) {
    throw Error(ErrorCode::kDimension, fmt::format("{}: unexpected output shape for '{}'", session.identity(),
                                                   asset.output));
  }
  const auto values = out.f32();
  std::vector<Embedding> result;
  result.reserve(static_cast<std::size_t>(batch));
  for (std::int64_t r = 0; r < batch; ++r) {
    std::vector<double> row(values.begin() + r * d, values.begin() + (r + 1) * d);
    result.push_back(l2_normalize(Embedding(std::move(row))));
  }
  return result;
}

Embedding EncoderBundle::encode_image(const ImageTensor& image) const {
  return encode_images(std::span<const ImageTensor>(&image, 1)).front();
}

std::vector<Embedding> EncoderBundle::encode_images(std::span<const ImageTensor> images) const {
  if (images.empty()) throw Error(ErrorCode::kEmptyInput, "no images to encode");
  const int s = manifest_.preprocess.image_size;
  const std::size_t per = static_cast<std::size_t>(3) * s * s;
  std::vector<float> data;
  data.reserve(per * images.size());
  for (const auto& img : images) {
    if (img.size() != s || img.values().size() != per) {
      throw Error(ErrorCode::kDimension, fmt::format("image tensor must be 3x{}x{}", s, s));
    }
    data.insert(data.end(), img.values().begin(), img.values().end());
  }
  auto input = runtime::Tensor::f32({static_cast<std::int64_t>(images.size()), 3, s, s}, std::move(data));
  return run_tower(*visual_, manifest_.visual, std::move(input));
}

std::vector<Embedding> EncoderBundle::encode_texts(std::span<const std::string> texts) const {
  if (texts.empty()) throw Error(ErrorCode::kEmptyInput, "no texts to encode");
  std::vector<Embedding> result;
  result.reserve(texts.size());
  const auto ctx = static_cast<std::int64_t>(manifest_.context_length);
  for (std::size_t start = 0; start < texts.size(); start += kTextBatch) {
    const std::size_t n = std::min(kTextBatch, texts.size() - start);
    std::vector<std::int64_t> ids;
    ids.reserve(n * static_cast<std::size_t>(ctx));
    for (std::size_t i = 0; i < n; ++i) {
      const auto seq = tokenizer_->tokenize(texts[start + i]);
      ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
    }
    auto input = runtime::Tensor::i64({static_cast<std::int64_t>(n), ctx}, std::move(ids));
    auto chunk = run_tower(*text_, manifest_.text, std::move(input));
    std::move(chunk.begin(), chunk.end(), std::back_inserter(result));
  }
  return result;
}

std::string apply_text_template(std::string_view tmpl, std::string_view text) {
  const auto pos = tmpl.find("{}");
  if (pos == std::string_view::npos || tmpl.find("{}", pos + 2) != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "text template must contain exactly one '{}'");
  }
  std::string out(tmpl.substr(0, pos));
  out += text;
  out += tmpl.substr(pos + 2);
  return out;
}

BundleEmbeddingProvider::BundleEmbeddingProvider(std::shared_ptr<const EncoderBundle> bundle,
                                                 std::optional<std::string> text_template)
    : bundle_(std::move(bundle)), template_(std::move(text_template)) {
  if (!bundle_) throw Error(ErrorCode::kInvalidArgument, "null encoder bundle");
  if (template_) {
    apply_text_template(*template_, "");
    fingerprint_ = Sha256().update(bundle_->fingerprint()).update("\ntemplate ").update(*template_).hex_digest();
  } else {
    fingerprint_ = bundle_->fingerprint();
  }
}

Embedding BundleEmbeddingProvider::embed_image(std::span<const std::uint8_t> encoded) const {
  return bundle_->encode_image(bundle_->preprocess(encoded));
}

std::vector<Embedding> BundleEmbeddingProvider::embed_texts(std::span<const std::string> texts) const {
  if (!template_) return bundle_->encode_texts(texts);
  std::vector<std::string> wrapped;
  wrapped.reserve(texts.size());
  for (const auto& t : texts) wrapped.push_back(apply_text_template(*template_, t));
  return bundle_->encode_texts(wrapped);
}

}  // namespace medzs
