// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include "medzs/encoders.hpp"
#include "medzs/error.hpp"
#include "medzs/io.hpp"
#include "test_support.hpp"

using namespace medzs;
using medzs::testing::bundle_dir;
using medzs::testing::cosine;
using medzs::testing::fixture_dir;
using nlohmann::json;

namespace {

std::shared_ptr<const EncoderBundle> bundle() {
  static const auto b = EncoderBundle::load(bundle_dir());
  return b;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

json manifest_json() { return json::parse(read_text_file(bundle_dir() / "manifest.json")); }

// Copies the bundle so a test can tamper with it.
void copy_bundle(const std::filesystem::path& to) {
  std::filesystem::create_directories(to);
  for (const auto& e : std::filesystem::directory_iterator(bundle_dir())) {
    std::filesystem::copy_file(e.path(), to / e.path().filename());
  }
}

}  // namespace

TEST_CASE("image embeddings match the exported reference embeddings") {
  const auto golden = json::parse(read_text_file(fixture_dir() / "golden" / "golden.json"));
  REQUIRE(golden["images"].size() >= 2);
  for (const auto& g : golden["images"]) {
    const auto bytes = read_file_bytes(fixture_dir() / g["image"].get<std::string>());
    const Embedding e = bundle()->encode_image(bundle()->preprocess(bytes));
    const auto ref = g["embedding"].get<std::vector<double>>();
    REQUIRE(e.size() == ref.size());
    CHECK(e.normalized());
    CHECK(cosine(e.values(), ref) >= 0.999);
  }
}

TEST_CASE("text embeddings match the exported reference embeddings") {
  const auto golden = json::parse(read_text_file(fixture_dir() / "golden" / "golden.json"));
  std::vector<std::string> texts;
  std::vector<std::vector<double>> refs;
  for (const auto& t : golden["text_embeddings"]) {
    texts.push_back(t["text"]);
    refs.push_back(t["embedding"].get<std::vector<double>>());
  }
  REQUIRE(!texts.empty());
  const auto embs = bundle()->encode_texts(texts);
  REQUIRE(embs.size() == texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    INFO(texts[i]);
    CHECK(cosine(embs[i].values(), refs[i]) >= 0.999);
  }
}

TEST_CASE("batched encoding equals one-at-a-time encoding") {
  std::vector<ImageTensor> tensors;
  for (int i = 0; i < 5; ++i) {
    tensors.push_back(bundle()->preprocess(
        read_file_bytes(fixture_dir() / "images" / "set20" / ("img_0" + std::to_string(i) + ".png"))));
  }
  const auto batch = bundle()->encode_images(tensors);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(cosine(batch[i].values(), bundle()->encode_image(tensors[i]).values()) >= 1.0 - 1e-9);
  }
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back("symptom number " + std::to_string(i));
  const auto all = bundle()->encode_texts(texts);
  for (std::size_t i : {0u, 31u, 32u, 39u}) {
    const auto one = bundle()->encode_texts(std::vector<std::string>{texts[i]});
    CHECK(cosine(all[i].values(), one[0].values()) >= 1.0 - 1e-9);
  }
  CHECK(code_of([] { bundle()->encode_texts({}); }) == ErrorCode::kEmptyInput);
  CHECK(code_of([] { bundle()->encode_images({}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("bundle metadata and fingerprint") {
  CHECK(bundle()->dimension() == 128);
  CHECK(bundle()->manifest().context_length == 77);
  CHECK(bundle()->fingerprint().size() == 64);
  CHECK(EncoderBundle::load(bundle_dir() / "manifest.json")->fingerprint() == bundle()->fingerprint());

  BundleEmbeddingProvider plain(bundle());
  BundleEmbeddingProvider wrapped(bundle(), std::string("a chest x-ray showing {}."));
  CHECK(plain.fingerprint() == bundle()->fingerprint());
  CHECK(wrapped.fingerprint() != plain.fingerprint());
  const auto a = wrapped.embed_texts(std::vector<std::string>{"pleural effusion"});
  const auto b = plain.embed_texts(std::vector<std::string>{"a chest x-ray showing pleural effusion."});
  CHECK(a[0] == b[0]);
  CHECK(apply_text_template("a photo of {}.", "x") == "a photo of x.");
  CHECK_THROWS_AS(BundleEmbeddingProvider(bundle(), std::string("no placeholder")), Error);
}

TEST_CASE("tampered assets fail the integrity check") {
  medzs::testing::TempDir dir;
  copy_bundle(dir.path());
  auto bytes = read_file_bytes(dir / "text.onnx");
  bytes[bytes.size() / 2] ^= 0x01;
  write_file_atomic(dir / "text.onnx", std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  CHECK(code_of([&] { EncoderBundle::load(dir.path()); }) == ErrorCode::kIntegrity);
}

TEST_CASE("manifest validation") {
  const auto base = manifest_json();
  auto parse = [](const json& j) { return BundleManifest::parse(j.dump()); };
  CHECK_NOTHROW(parse(base));

  auto newer = base;
  newer["format_version"] = 99;
  CHECK(code_of([&] { parse(newer); }) == ErrorCode::kVersion);

  auto size = base;
  size["preprocess"]["image_size"] = 336;
  CHECK(code_of([&] { parse(size); }) == ErrorCode::kSchema);

  auto escape = base;
  escape["visual"]["file"] = "../visual.onnx";
  CHECK(code_of([&] { parse(escape); }) == ErrorCode::kSchema);

  auto no_text = base;
  no_text.erase("text");
  CHECK(code_of([&] { parse(no_text); }) == ErrorCode::kSchema);

  CHECK(code_of([] { BundleManifest::parse("{not json"); }) == ErrorCode::kParse);
  CHECK(code_of([] { EncoderBundle::load("/nonexistent/bundle"); }) == ErrorCode::kIo);
}

TEST_CASE("declared width must match the manifest dimension") {
  medzs::testing::TempDir dir;
  copy_bundle(dir.path());
  auto m = manifest_json();
  m["embedding_dim"] = 64;
  write_file_atomic(dir / "manifest.json", m.dump(2));
  CHECK(code_of([&] { EncoderBundle::load(dir.path()); }) == ErrorCode::kDimension);
}

TEST_CASE("undecodable images surface as decode errors") {
  BundleEmbeddingProvider p(bundle());
  const auto bytes = read_file_bytes(fixture_dir() / "images" / "corrupt.png");
  CHECK(code_of([&] { p.embed_image(bytes); }) == ErrorCode::kDecode);
}
