// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "medzs/kernels.hpp"

using namespace medzs::kernels;

namespace {

std::vector<float> randf(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool bitwise_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

}  // namespace

TEST_CASE("gemm matches a naive triple loop and is identical across variants") {
  std::mt19937 rng(1);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      GemmShape s{13, 29, 17, ta, tb, 0.75f, 0.5f};
      const auto a = randf(rng, static_cast<std::size_t>(s.m * s.k));
      const auto b = randf(rng, static_cast<std::size_t>(s.k * s.n));
      const auto c0 = randf(rng, static_cast<std::size_t>(s.m * s.n));
      auto cs = c0, cp = c0;
      serial::gemm(s, a, b, cs);
      parallel::gemm(s, a, b, cp);
      CHECK(bitwise_equal(cs, cp));
      for (std::int64_t i = 0; i < s.m; ++i) {
        for (std::int64_t j = 0; j < s.n; ++j) {
          double acc = 0;
          for (std::int64_t p = 0; p < s.k; ++p) {
            const double av = ta ? a[p * s.m + i] : a[i * s.k + p];
            const double bv = tb ? b[j * s.k + p] : b[p * s.n + j];
            acc += av * bv;
          }
          const double want = s.alpha * acc + s.beta * c0[i * s.n + j];
          CHECK(cs[i * s.n + j] == doctest::Approx(want).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("conv2d matches direct evaluation") {
  std::mt19937 rng(2);
  Conv2dShape s;
  s.batch = 2;
  s.in_channels = 4;
  s.in_h = 9;
  s.in_w = 7;
  s.out_channels = 6;
  s.kernel_h = 3;
  s.kernel_w = 2;
  s.stride_h = 2;
  s.stride_w = 1;
  s.pad_top = 1;
  s.pad_left = 1;
  s.pad_bottom = 0;
  s.pad_right = 1;
  s.groups = 2;
  const auto in = randf(rng, static_cast<std::size_t>(s.batch * s.in_channels * s.in_h * s.in_w));
  const auto w = randf(rng, static_cast<std::size_t>(s.out_channels * (s.in_channels / s.groups) * s.kernel_h * s.kernel_w));
  const auto bias = randf(rng, static_cast<std::size_t>(s.out_channels));
  const auto oh = s.out_h(), ow = s.out_w();
  std::vector<float> ys(static_cast<std::size_t>(s.batch * s.out_channels * oh * ow)), yp(ys.size());
  serial::conv2d(s, in, w, bias, ys);
  parallel::conv2d(s, in, w, bias, yp);
  CHECK(bitwise_equal(ys, yp));
  const auto cpg = s.in_channels / s.groups, opg = s.out_channels / s.groups;
  for (std::int64_t n = 0; n < s.batch; ++n) {
    for (std::int64_t oc = 0; oc < s.out_channels; ++oc) {
      const auto g = oc / opg;
      for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
          double acc = bias[oc];
          for (std::int64_t ic = 0; ic < cpg; ++ic) {
            for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
              for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
                const auto iy = y * s.stride_h - s.pad_top + ky;
                const auto ix = x * s.stride_w - s.pad_left + kx;
                if (iy < 0 || iy >= s.in_h || ix < 0 || ix >= s.in_w) continue;
                acc += in[((n * s.in_channels + g * cpg + ic) * s.in_h + iy) * s.in_w + ix] *
                       w[((oc * cpg + ic) * s.kernel_h + ky) * s.kernel_w + kx];
              }
            }
          }
          CHECK(ys[((n * s.out_channels + oc) * oh + y) * ow + x] == doctest::Approx(acc).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("layer norm and softmax") {
  std::mt19937 rng(3);
  const std::int64_t rows = 11, cols = 37;
  const auto x = randf(rng, rows * cols);
  const auto scale = randf(rng, cols), shift = randf(rng, cols);
  std::vector<float> ys(x.size()), yp(x.size());
  serial::layer_norm(rows, cols, x, scale, shift, 1e-5f, ys);
  parallel::layer_norm(rows, cols, x, scale, shift, 1e-5f, yp);
  CHECK(bitwise_equal(ys, yp));
  for (std::int64_t r = 0; r < rows; ++r) {
    double mean = 0, var = 0;
    for (std::int64_t c = 0; c < cols; ++c) mean += x[r * cols + c];
    mean /= cols;
    for (std::int64_t c = 0; c < cols; ++c) var += (x[r * cols + c] - mean) * (x[r * cols + c] - mean);
    var /= cols;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double want = (x[r * cols + c] - mean) / std::sqrt(var + 1e-5) * scale[c] + shift[c];
      CHECK(ys[r * cols + c] == doctest::Approx(want).epsilon(1e-4));
    }
  }

  const std::int64_t outer = 3, len = 5, inner = 4;
  const auto sx = randf(rng, outer * len * inner);
  std::vector<float> ss(sx.size()), sp(sx.size());
  serial::softmax(outer, len, inner, sx, ss);
  parallel::softmax(outer, len, inner, sx, sp);
  CHECK(bitwise_equal(ss, sp));
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      double z = 0;
      for (std::int64_t a = 0; a < len; ++a) z += std::exp(static_cast<double>(sx[(o * len + a) * inner + i]));
      for (std::int64_t a = 0; a < len; ++a) {
        const auto idx = (o * len + a) * inner + i;
        CHECK(ss[idx] == doctest::Approx(std::exp(static_cast<double>(sx[idx])) / z).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("similarity matrix is bitwise identical across variants and thread counts") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  const std::int64_t rows = 33, cols = 21, dim = 64;
  std::vector<double> x(rows * dim), y(cols * dim);
  for (auto& v : x) v = n(rng);
  for (auto& v : y) v = n(rng);
  std::vector<double> s(rows * cols), p(rows * cols);
  serial::similarity_matrix(rows, cols, dim, x, y, s);
  for (int threads : {1, 2, 3, 8}) {
    set_num_threads(threads);
    parallel::similarity_matrix(rows, cols, dim, x, y, p);
    CHECK(std::memcmp(s.data(), p.data(), s.size() * sizeof(double)) == 0);
  }
  set_num_threads(max_threads());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      double acc = 0;
      for (std::int64_t d = 0; d < dim; ++d) acc += x[r * dim + d] * y[c * dim + d];
      CHECK(s[r * cols + c] == acc);
    }
  }
}
