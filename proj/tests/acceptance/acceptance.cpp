// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is
// nonzero when any hard criterion fails; the Montgomery run is informational.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>

#include "medzs/encoders.hpp"
#include "medzs/error.hpp"
#include "medzs/eval.hpp"
#include "medzs/image.hpp"
#include "medzs/io.hpp"
#include "medzs/knowledge.hpp"
#include "medzs/scoring.hpp"
#include "medzs/tokenizer.hpp"
#include "test_support.hpp"

using namespace medzs;
using medzs::testing::bundle_dir;
using medzs::testing::data_dir;
using medzs::testing::fixture_dir;
using nlohmann::json;

namespace {

// Pinned tolerances and budgets.
constexpr int kOracleInstances = 500;
constexpr double kOracleMeanTolerance = 1e-9;
constexpr double kOracleBudgetSeconds = 5.0;
constexpr int kPropertyCases = 1000;
constexpr double kPropertyMeanTolerance = 1e-12;
constexpr double kTensorTolerance = 1e-3;
constexpr double kGoldenBudgetSeconds = 10.0;
constexpr double kMinCosine = 0.999;
constexpr int kRoundTripKbs = 50;
constexpr double kMontgomeryLow = 45.0;
constexpr double kMontgomeryHigh = 70.0;
constexpr double kMontgomeryBudgetSeconds = 600.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::shared_ptr<const EncoderBundle> tiny_bundle() {
  static const auto b = EncoderBundle::load(bundle_dir());
  return b;
}

// --- Scoring oracle ----------------------------------------------------------

Verdict scoring_oracle() {
  std::mt19937_64 rng(20260501);
  std::uniform_int_distribution<int> classes_dist(1, 5), symptoms_dist(1, 8), dim_dist(1, 16);
  const auto t0 = Clock::now();
  int mismatches = 0;
  double worst_mean = 0.0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    const auto d = static_cast<std::size_t>(dim_dist(rng));
    const int k = classes_dist(rng);
    std::vector<ClassEmbeddings> classes;
    for (int c = 0; c < k; ++c) {
      ClassEmbeddings ce;
      ce.class_id = fmt::format("c{}", c);
      for (int i = symptoms_dist(rng); i > 0; --i) {
        ce.symptoms.push_back(fmt::format("s{}", i));
        ce.embeddings.push_back(medzs::testing::random_unit(rng, d));
      }
      classes.push_back(std::move(ce));
    }
    const Embedding f = medzs::testing::random_unit(rng, d);
    for (auto mode : {AggregationMode::kMean, AggregationMode::kMax}) {
      const auto report = classify(f, classes, mode);
      // Independent nested loops: class, symptom, coordinate.
      std::size_t best = 0;
      double best_score = 0.0;
      for (std::size_t c = 0; c < classes.size(); ++c) {
        double sum = 0.0;
        double mx = -INFINITY;
        for (const auto& g : classes[c].embeddings) {
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) s += f[j] * g[j];
          sum += s;
          mx = std::max(mx, s);
        }
        const double agg = mode == AggregationMode::kMean ? sum / static_cast<double>(classes[c].embeddings.size()) : mx;
        if (c == 0 || agg > best_score) {
          best = c;
          best_score = agg;
        }
        const double got = report.classes[c].aggregate;
        if (mode == AggregationMode::kMean) {
          worst_mean = std::max(worst_mean, std::abs(got - agg));
          if (std::abs(got - agg) > kOracleMeanTolerance) ++mismatches;
        } else if (got != agg) {
          ++mismatches;
        }
      }
      if (report.predicted_index != best) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kOracleBudgetSeconds,
          fmt::format("{} instances x 2 modes, {} mismatches, max MEAN error {:.1e}, {:.2f} s", kOracleInstances,
                      mismatches, worst_mean, secs)};
}

// --- Baseline reduction ------------------------------------------------------

Verdict baseline_reduction() {
  const auto manifest = load_manifest(fixture_dir() / "manifests" / "set20.json");
  const auto designed = load_kb(data_dir() / "kb" / "montgomery-designed.json");
  const auto baseline = make_baseline_kb(designed);
  BundleEmbeddingProvider provider(tiny_bundle());
  EmbeddingCache cache;
  const auto result = evaluate(manifest, baseline, provider, {AggregationMode::kMean, true, 1}, cache);

  // Direct zero-shot classifier: encode each category name, pick the
  // highest cosine with the image, first class on ties.
  std::vector<std::string> names;
  for (const auto& c : designed.classes) names.push_back(c.display_name);
  const auto& bundle = *tiny_bundle();
  const auto text = bundle.encode_texts(names);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto bytes = read_file_bytes(manifest.resolve(manifest.entries[i]));
    const auto img = bundle.encode_image(bundle.preprocess(bytes));
    std::size_t best = 0;
    double best_sim = 0.0;
    for (std::size_t c = 0; c < text.size(); ++c) {
      double sim = 0.0;
      for (std::size_t j = 0; j < img.size(); ++j) sim += img[j] * text[c][j];
      if (c == 0 || sim > best_sim) {
        best = c;
        best_sim = sim;
      }
    }
    if (result.items[i].predicted != designed.classes[best].class_id) ++mismatches;
  }
  return {mismatches == 0 && result.items.size() == 20,
          fmt::format("{} images, {} prediction differences", result.items.size(), mismatches)};
}

// --- Aggregation properties --------------------------------------------------

std::vector<ClassEmbeddings> random_classes(std::mt19937_64& rng, std::size_t d, int k, int max_m) {
  std::uniform_int_distribution<int> m_dist(1, max_m);
  std::vector<ClassEmbeddings> classes;
  for (int c = 0; c < k; ++c) {
    ClassEmbeddings ce;
    ce.class_id = fmt::format("c{}", c);
    for (int i = m_dist(rng); i > 0; --i) {
      ce.symptoms.push_back(fmt::format("s{}", i));
      ce.embeddings.push_back(medzs::testing::random_unit(rng, d));
    }
    classes.push_back(std::move(ce));
  }
  return classes;
}

Verdict aggregation_properties() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> k_dist(1, 6);
  std::uniform_int_distribution<std::size_t> d_dist(2, 32);
  std::uniform_real_distribution<double> scale_dist(1e-3, 1e3);
  int max_ge_mean = 0, single = 0, permutation = 0, scaling = 0;
  for (int trial = 0; trial < kPropertyCases; ++trial) {
    const auto d = d_dist(rng);
    const auto classes = random_classes(rng, d, k_dist(rng), 10);
    const auto f = medzs::testing::random_unit(rng, d);

    const auto mean = classify(f, classes, AggregationMode::kMean);
    const auto max = classify(f, classes, AggregationMode::kMax);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (max.classes[c].aggregate < mean.classes[c].aggregate) ++max_ge_mean;
    }

    auto ones = random_classes(rng, d, k_dist(rng), 1);
    const auto m1_mean = classify(f, ones, AggregationMode::kMean);
    const auto m1_max = classify(f, ones, AggregationMode::kMax);
    if (m1_mean.predicted_index != m1_max.predicted_index) ++single;
    for (std::size_t c = 0; c < ones.size(); ++c) {
      if (m1_mean.classes[c].aggregate != m1_max.classes[c].aggregate) ++single;
    }

    auto shuffled = classes;
    for (auto& c : shuffled) {
      std::vector<std::size_t> order(c.embeddings.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      ClassEmbeddings p;
      p.class_id = c.class_id;
      for (auto i : order) {
        p.symptoms.push_back(c.symptoms[i]);
        p.embeddings.push_back(c.embeddings[i]);
      }
      c = std::move(p);
    }
    for (auto mode : {AggregationMode::kMean, AggregationMode::kMax}) {
      const auto a = classify(f, classes, mode);
      const auto b = classify(f, shuffled, mode);
      if (a.predicted_index != b.predicted_index) ++permutation;
      for (std::size_t c = 0; c < classes.size(); ++c) {
        const double diff = std::abs(a.classes[c].aggregate - b.classes[c].aggregate);
        if (mode == AggregationMode::kMax ? diff != 0.0 : diff > kPropertyMeanTolerance) ++permutation;
      }
    }

    const double s = scale_dist(rng);
    std::vector<double> scaled(f.values().begin(), f.values().end());
    for (auto& v : scaled) v *= s;
    const Embedding fs(std::move(scaled));
    for (auto mode : {AggregationMode::kMean, AggregationMode::kMax}) {
      if (classify(f, classes, mode).predicted_index != classify(fs, classes, mode).predicted_index) ++scaling;
    }
  }
  const int total = max_ge_mean + single + permutation + scaling;
  return {total == 0, fmt::format("{} cases; violations: max>=mean {}, m=1 {}, permutation {}, scaling {}",
                                  kPropertyCases, max_ge_mean, single, permutation, scaling)};
}

// --- Class-prior arithmetic --------------------------------------------------

// Every image maps to the same vector, which always favors "abnormal".
class ConstantProvider final : public EmbeddingProvider {
 public:
  const std::string& fingerprint() const override { return fp_; }
  std::size_t dimension() const override { return 2; }
  Embedding embed_image(std::span<const std::uint8_t>) const override { return l2_normalize(Embedding({1.0, 0.0})); }
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) const override {
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back(l2_normalize(t == "abnormal" ? Embedding({1.0, 0.1}) : Embedding({0.0, 1.0})));
    return out;
  }

 private:
  std::string fp_ = "constant";
};

Verdict class_prior_arithmetic() {
  medzs::testing::TempDir dir;
  DatasetManifest manifest;
  manifest.dataset_id = "prior";
  manifest.classes = {"normal", "abnormal"};
  manifest.image_root = dir.path();
  for (int i = 0; i < 336 + 326; ++i) {
    const std::string name = fmt::format("{:04d}.img", i);
    write_file_atomic(dir / name, name);
    manifest.entries.push_back({name, i < 336 ? "abnormal" : "normal"});
  }
  KnowledgeBase kb;
  kb.kb_id = "prior";
  kb.classes.push_back({"normal", "Normal", {"normal"}, "designed", "", DescriptorSource::kManual, "t"});
  kb.classes.push_back({"abnormal", "Abnormal", {"abnormal"}, "designed", "", DescriptorSource::kManual, "t"});
  ConstantProvider provider;
  EmbeddingCache cache;
  const auto r = evaluate(manifest, kb, provider, {}, cache);
  const std::string acc = format_percent(100.0 * r.accuracy);
  const std::string g1 = gain_row("montgomery", 76.28, 64.55).gain_display();
  const std::string g2 = gain_row("shenzhen", 68.13, 50.76).gain_display();
  const bool text_ok = eval_result_to_text(r).find("50.76%") != std::string::npos;
  return {acc == "50.76" && text_ok && g1 == "+11.73" && g2 == "+17.37" && r.correct == 336 && r.total == 662,
          fmt::format("accuracy {}% ({}/{}), gains {} and {}", acc, r.correct, r.total, g1, g2)};
}

// --- Tokenizer and preprocessing goldens -------------------------------------

Verdict golden_fixtures() {
  const auto t0 = Clock::now();
  const auto tok = BpeTokenizer::from_file(bundle_dir() / "bpe_merges.txt");
  const auto golden = json::parse(read_text_file(fixture_dir() / "golden" / "golden.json"));
  const auto cases = json::parse(read_text_file(fixture_dir() / "golden" / "tokenizer_cases.json"));
  std::size_t id_cases = 0, id_mismatch = 0;
  auto check_ids = [&](const json& c) {
    ++id_cases;
    if (tok.tokenize(c["text"].get<std::string>()).ids != c["ids"].get<std::vector<std::int64_t>>()) ++id_mismatch;
  };
  for (const auto& c : golden["strings"]) check_ids(c);
  for (const auto& c : cases) check_ids(c);

  double worst = 0.0;
  std::size_t tensors = 0;
  for (const auto& g : golden["images"]) {
    const auto bytes = read_file_bytes(fixture_dir() / g["image"].get<std::string>());
    const auto t = preprocess_image(std::span<const std::uint8_t>(bytes), PreprocessConfig{});
    const auto raw = read_file_bytes(fixture_dir() / g["tensor"].get<std::string>());
    std::vector<float> want(raw.size() / sizeof(float));
    std::memcpy(want.data(), raw.data(), want.size() * sizeof(float));
    if (want.size() != t.values().size()) {
      worst = INFINITY;
      continue;
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(t.values()[i]) - want[i]));
    }
    ++tensors;
  }
  const double secs = seconds_since(t0);
  return {id_mismatch == 0 && tensors >= 2 && worst <= kTensorTolerance && secs < kGoldenBudgetSeconds,
          fmt::format("{} token cases, {} mismatches; {} tensors, max abs error {:.2e}; {:.2f} s", id_cases,
                      id_mismatch, tensors, worst, secs)};
}

// --- Encoder cross-check -----------------------------------------------------

Verdict encoder_cross_check() {
  const auto golden = json::parse(read_text_file(fixture_dir() / "golden" / "golden.json"));
  const auto& bundle = *tiny_bundle();
  double worst = 1.0;
  std::size_t n = 0;
  for (const auto& g : golden["images"]) {
    const auto bytes = read_file_bytes(fixture_dir() / g["image"].get<std::string>());
    const auto e = bundle.encode_image(bundle.preprocess(bytes));
    worst = std::min(worst, medzs::testing::cosine(e.values(), g["embedding"].get<std::vector<double>>()));
    ++n;
  }
  std::vector<std::string> texts;
  std::vector<std::vector<double>> refs;
  for (const auto& t : golden["text_embeddings"]) {
    texts.push_back(t["text"]);
    refs.push_back(t["embedding"].get<std::vector<double>>());
  }
  const auto embs = bundle.encode_texts(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    worst = std::min(worst, medzs::testing::cosine(embs[i].values(), refs[i]));
    ++n;
  }
  return {n > 0 && worst >= kMinCosine, fmt::format("{} embeddings, minimum cosine {:.6f}", n, worst)};
}

// --- Knowledge-base round trip and phrase parsing ----------------------------

Verdict kb_round_trip_and_parse() {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> k_dist(1, 8), m_dist(1, 12), w_dist(0, 9);
  static const char* words[] = {"opacity", "nodule", "Hilar", "ground-glass", "\xC3\xA9", "50%", "\"q\"", "a\\b",
                                "line\nbreak", "\xE6\xB6\x88"};
  int failures = 0;
  for (int trial = 0; trial < kRoundTripKbs; ++trial) {
    KnowledgeBase kb;
    kb.kb_id = fmt::format("kb-{}", trial);
    if (trial % 3 == 0) kb.dataset_id = "ds";
    if (trial % 2 == 0) kb.encoder_fingerprint = std::string(64, 'a');
    for (int c = k_dist(rng); c > 0; --c) {
      ClassDescriptor d;
      d.class_id = fmt::format("class{}", c);
      d.display_name = fmt::format("{} {}", words[w_dist(rng)], c);
      for (int s = m_dist(rng); s > 0; --s) d.symptoms.push_back(fmt::format("{} {} {}", s, words[w_dist(rng)], words[w_dist(rng)]));
      d.prompt_id = trial % 2 == 0 ? "designed" : "baseline";
      d.source = c % 2 == 0 ? DescriptorSource::kLlm : DescriptorSource::kManual;
      d.raw_response = d.source == DescriptorSource::kLlm ? "raw answer" : "";
      d.created_at = "2026-01-01T00:00:00Z";
      kb.classes.push_back(std::move(d));
    }
    medzs::testing::TempDir dir;
    save_kb(kb, dir / "kb.json");
    const auto back = load_kb(dir / "kb.json");
    if (!(back == kb) || kb_to_json(back) != read_text_file(dir / "kb.json")) ++failures;
  }

  // Phrases quoted from the designed-prompt answers must come out verbatim.
  const std::vector<std::pair<std::string, std::string>> quoted{
      {"Normal lungs", "No visible cavities or consolidations"},
      {"Normal lungs", "Absence of pleural effusions"},
      {"Normal lungs", "Clear and distinct lung borders"},
      {"Severe Nonproliferative Retinopathy", "Venous beading and loops"},
      {"Severe Nonproliferative Retinopathy", "Neovascularization"},
      {"Pneumonia", "Air bronchogram sign"},
      {"Primary Central Nervous System Lymphoma", "Restricted diffusion on MRI"}};
  ResponseCache cache(data_dir() / "cache" / "llm");
  const LlmConfig llm;
  int missing = 0;
  for (const auto& [category, phrase] : quoted) {
    const auto hit = cache.get("designed", category, llm.model);
    if (!hit) {
      ++missing;
      continue;
    }
    const auto phrases = parse_symptoms(hit->response);
    if (std::find(phrases.begin(), phrases.end(), phrase) == phrases.end()) ++missing;
  }
  return {failures == 0 && missing == 0,
          fmt::format("{} KBs, {} round-trip failures; {} quoted phrases, {} not reproduced", kRoundTripKbs, failures,
                      quoted.size(), missing)};
}

// --- Montgomery (informational) ----------------------------------------------

void montgomery_run() {
  const char* root = std::getenv("MEDZS_MONTGOMERY_DIR");
  if (root == nullptr || *root == '\0') {
    fmt::print("INFO  montgomery-end-to-end  skipped: MEDZS_MONTGOMERY_DIR is not set\n");
    return;
  }
  try {
    std::filesystem::path dir(root);
    if (std::filesystem::exists(dir / "MontgomerySet")) dir /= "MontgomerySet";
    if (std::filesystem::exists(dir / "CXR_png")) dir /= "CXR_png";
    DatasetManifest manifest;
    manifest.dataset_id = "montgomery";
    manifest.classes = {"normal", "tuberculosis"};
    manifest.image_root = dir;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto stem = e.path().stem().string();
      if (e.path().extension() != ".png" || stem.size() < 2) continue;
      if (stem.ends_with("_0")) manifest.entries.push_back({e.path().filename().string(), "normal"});
      if (stem.ends_with("_1")) manifest.entries.push_back({e.path().filename().string(), "tuberculosis"});
    }
    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    const char* bundle_env = std::getenv("MEDZS_BUNDLE");
    const auto bundle = EncoderBundle::load(bundle_env != nullptr && *bundle_env != '\0' ? bundle_env : bundle_dir());
    BundleEmbeddingProvider provider(bundle);
    const auto kb = load_kb(data_dir() / "kb" / "montgomery-designed.json");
    EmbeddingCache cache;
    const auto t0 = Clock::now();
    const auto r = evaluate(manifest, kb, provider, {AggregationMode::kMean, true, 4}, cache);
    const double secs = seconds_since(t0);
    const double pct = 100.0 * r.accuracy;
    const bool in_band = pct >= kMontgomeryLow && pct <= kMontgomeryHigh && secs < kMontgomeryBudgetSeconds;
    fmt::print("INFO  montgomery-end-to-end  {}: {} images, accuracy {}%, {:.1f} s, encoder {}\n",
               in_band ? "within band" : "outside band", r.total, format_percent(pct), secs,
               r.encoder_fingerprint.substr(0, 12));
  } catch (const std::exception& e) {
    fmt::print("INFO  montgomery-end-to-end  not completed: {}\n", e.what());
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"scoring-oracle-equivalence", scoring_oracle},
      {"baseline-reduction-identity", baseline_reduction},
      {"aggregation-properties", aggregation_properties},
      {"class-prior-arithmetic", class_prior_arithmetic},
      {"tokenizer-preprocessing-goldens", golden_fixtures},
      {"encoder-cross-check", encoder_cross_check},
      {"kb-round-trip-and-parse", kb_round_trip_and_parse},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    if (!v.pass) ++failed;
    fmt::print("{}  {}  {}\n", v.pass ? "PASS" : "FAIL", name, v.detail);
    std::fflush(stdout);
  }
  montgomery_run();
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
