// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs parallel timings for the hot kernels and batched scoring.
// Usage: medzs_bench [repeats] [threads]

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "medzs/kernels.hpp"
#include "medzs/scoring.hpp"

using namespace medzs;

namespace {

std::vector<float> randf(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Best wall time over `repeats` runs, in milliseconds.
double best_ms(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
  fmt::print("{:<28} {:>10.2f} {:>10.2f} {:>8.2f}x  {}\n", name, serial, parallel, serial / parallel,
             identical ? "identical" : "DIFFERENT");
}

template <typename T>
bool same(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  if (argc > 2) kernels::set_num_threads(std::max(1, std::atoi(argv[2])));
  fmt::print("threads {}, best of {}\n", kernels::max_threads(), repeats);
  fmt::print("{:<28} {:>10} {:>10} {:>9}\n", "kernel", "serial ms", "omp ms", "speedup");
  std::mt19937 rng(7);

  {
    const kernels::GemmShape s{50, 768, 768, false, true, 1.0f, 0.0f};
    const auto a = randf(rng, static_cast<std::size_t>(s.m * s.k));
    const auto b = randf(rng, static_cast<std::size_t>(s.k * s.n));
    std::vector<float> cs(static_cast<std::size_t>(s.m * s.n)), cp(cs.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::gemm(s, a, b, cs); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::gemm(s, a, b, cp); });
    report("gemm 50x768x768", ts, tp, same(cs, cp));
  }
  {
    kernels::Conv2dShape s;
    s.in_channels = 3;
    s.in_h = s.in_w = 224;
    s.out_channels = 64;
    s.kernel_h = s.kernel_w = 16;
    s.stride_h = s.stride_w = 16;
    const auto in = randf(rng, static_cast<std::size_t>(3 * 224 * 224));
    const auto w = randf(rng, static_cast<std::size_t>(64 * 3 * 16 * 16));
    const auto bias = randf(rng, 64);
    std::vector<float> ys(static_cast<std::size_t>(64 * s.out_h() * s.out_w())), yp(ys.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::conv2d(s, in, w, bias, ys); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::conv2d(s, in, w, bias, yp); });
    report("conv2d patch16 224x224", ts, tp, same(ys, yp));
  }
  {
    const std::int64_t rows = 77 * 16, cols = 512;
    const auto x = randf(rng, static_cast<std::size_t>(rows * cols));
    const auto g = randf(rng, cols), b = randf(rng, cols);
    std::vector<float> ys(x.size()), yp(x.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::layer_norm(rows, cols, x, g, b, 1e-5f, ys); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::layer_norm(rows, cols, x, g, b, 1e-5f, yp); });
    report("layer_norm 1232x512", ts, tp, same(ys, yp));
  }
  {
    const std::int64_t outer = 16 * 8 * 77, len = 77;
    const auto x = randf(rng, static_cast<std::size_t>(outer * len));
    std::vector<float> ys(x.size()), yp(x.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::softmax(outer, len, 1, x, ys); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::softmax(outer, len, 1, x, yp); });
    report("softmax 9856x77", ts, tp, same(ys, yp));
  }
  {
    const std::int64_t rows = 2000, cols = 64, dim = 512;
    std::mt19937_64 r64(9);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> x(static_cast<std::size_t>(rows * dim)), y(static_cast<std::size_t>(cols * dim));
    for (auto& v : x) v = n(r64);
    for (auto& v : y) v = n(r64);
    std::vector<double> ss(static_cast<std::size_t>(rows * cols)), sp(ss.size());
    const double ts = best_ms(repeats, [&] { kernels::serial::similarity_matrix(rows, cols, dim, x, y, ss); });
    const double tp = best_ms(repeats, [&] { kernels::parallel::similarity_matrix(rows, cols, dim, x, y, sp); });
    report("similarity 2000x64x512", ts, tp, same(ss, sp));
  }
  {
    std::mt19937_64 r64(11);
    std::normal_distribution<double> n(0, 1);
    auto unit = [&](std::size_t d) {
      std::vector<double> v(d);
      for (auto& x : v) x = n(r64);
      return l2_normalize(Embedding(std::move(v)));
    };
    std::vector<ClassEmbeddings> classes;
    for (int c = 0; c < 5; ++c) {
      ClassEmbeddings ce;
      ce.class_id = fmt::format("c{}", c);
      for (int s = 0; s < 8; ++s) {
        ce.symptoms.push_back(fmt::format("s{}", s));
        ce.embeddings.push_back(unit(512));
      }
      classes.push_back(std::move(ce));
    }
    std::vector<Embedding> images;
    for (int i = 0; i < 2000; ++i) images.push_back(unit(512));
    std::vector<ScoreReport> rs, rp;
    const double ts = best_ms(repeats, [&] { rs = classify_batch(images, classes, AggregationMode::kMean, false); });
    const double tp = best_ms(repeats, [&] { rp = classify_batch(images, classes, AggregationMode::kMean, true); });
    report("classify_batch 2000 images", ts, tp, rs == rp);
  }
  return 0;
}
