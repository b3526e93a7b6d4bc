// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "medzs/kernels.hpp"

namespace medzs::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

namespace parallel {

namespace {
constexpr std::int64_t kColBlock = 64;
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kMinParallelWork = 1 << 15;
}  // namespace

void gemm(const GemmShape& s, std::span<const float> a, std::span<const float> b,
          std::span<float> c) {
  const std::int64_t m = s.m, n = s.n, k = s.k;
  const std::int64_t col_blocks = (n + kColBlock - 1) / kColBlock;
  const bool go_parallel = m * n * k >= kMinParallelWork;

  if (s.trans_b) {
    // Rows of B are contiguous along k: one dot product per output element.
#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        const float* brow = b.data() + j * k;
        float acc = 0.0f;
        if (s.trans_a) {
          for (std::int64_t p = 0; p < k; ++p) acc += a[p * m + i] * brow[p];
        } else {
          const float* arow = a.data() + i * k;
          for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        }
        float& out = c[i * n + j];
        out = s.beta == 0.0f ? s.alpha * acc : s.alpha * acc + s.beta * out;
      }
    }
    return;
  }

#pragma omp parallel for collapse(2) schedule(static) if (go_parallel)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t jb = 0; jb < col_blocks; ++jb) {
      const std::int64_t j0 = jb * kColBlock;
      const std::int64_t j1 = std::min(n, j0 + kColBlock);
      std::array<float, kColBlock> acc{};
      for (std::int64_t p = 0; p < k; ++p) {
        const float av = s.trans_a ? a[p * m + i] : a[i * k + p];
        const float* brow = b.data() + p * n;
#pragma omp simd
        for (std::int64_t j = j0; j < j1; ++j) acc[j - j0] += av * brow[j];
      }
      for (std::int64_t j = j0; j < j1; ++j) {
        float& out = c[i * n + j];
        out = s.beta == 0.0f ? s.alpha * acc[j - j0] : s.alpha * acc[j - j0] + s.beta * out;
      }
    }
  }
}

void conv2d(const Conv2dShape& s, std::span<const float> input, std::span<const float> weight,
            std::span<const float> bias, std::span<float> output) {
  const std::int64_t oh = s.out_h();
  const std::int64_t ow = s.out_w();
  const std::int64_t cin_g = s.in_channels / s.groups;
  const std::int64_t cout_g = s.out_channels / s.groups;

#pragma omp parallel for collapse(3) schedule(static)
  for (std::int64_t n = 0; n < s.batch; ++n) {
    for (std::int64_t oc = 0; oc < s.out_channels; ++oc) {
      for (std::int64_t y = 0; y < oh; ++y) {
        const std::int64_t g = oc / cout_g;
        for (std::int64_t x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (std::int64_t ic = 0; ic < cin_g; ++ic) {
            const std::int64_t cin = g * cin_g + ic;
            const float* plane = input.data() + (n * s.in_channels + cin) * s.in_h * s.in_w;
            const float* wk = weight.data() + (oc * cin_g + ic) * s.kernel_h * s.kernel_w;
            for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
              const std::int64_t iy = y * s.stride_h - s.pad_top + ky * s.dilation_h;
              if (iy < 0 || iy >= s.in_h) continue;
              for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
                const std::int64_t ix = x * s.stride_w - s.pad_left + kx * s.dilation_w;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += plane[iy * s.in_w + ix] * wk[ky * s.kernel_w + kx];
              }
            }
          }
          if (!bias.empty()) acc += bias[oc];
          output[((n * s.out_channels + oc) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
}

void layer_norm(std::int64_t rows, std::int64_t cols, std::span<const float> x,
                std::span<const float> scale, std::span<const float> shift, float epsilon,
                std::span<float> y) {
#pragma omp parallel for schedule(static) if (rows * cols >= kMinParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* in = x.data() + r * cols;
    float* out = y.data() + r * cols;
    double sum = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) sum += in[c];
    const double mean = sum / static_cast<double>(cols);
    double sq = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double d = in[c] - mean;
      sq += d * d;
    }
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(cols) + epsilon);
    for (std::int64_t c = 0; c < cols; ++c) {
      double v = (in[c] - mean) * inv;
      if (!scale.empty()) v *= scale[c];
      if (!shift.empty()) v += shift[c];
      out[c] = static_cast<float>(v);
    }
  }
}

void softmax(std::int64_t outer, std::int64_t axis_len, std::int64_t inner,
             std::span<const float> x, std::span<float> y) {
#pragma omp parallel for collapse(2) schedule(static) if (outer * axis_len * inner >= kMinParallelWork)
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const float* in = x.data() + o * axis_len * inner + i;
      float* out = y.data() + o * axis_len * inner + i;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t a = 0; a < axis_len; ++a) mx = std::max(mx, in[a * inner]);
      const bool all_masked = std::isinf(mx) && mx < 0;
      double sum = 0.0;
      for (std::int64_t a = 0; a < axis_len; ++a) {
        const float e = all_masked ? 0.0f : std::exp(in[a * inner] - mx);
        out[a * inner] = e;
        sum += e;
      }
      const double inv = sum > 0.0 ? 1.0 / sum : 0.0;
      for (std::int64_t a = 0; a < axis_len; ++a) {
        out[a * inner] = static_cast<float>(out[a * inner] * inv);
      }
    }
  }
}

void similarity_matrix(std::int64_t rows, std::int64_t cols, std::int64_t dim,
                       std::span<const double> x, std::span<const double> y,
                       std::span<double> out) {
#pragma omp parallel for collapse(2) schedule(static) if (rows * cols * dim >= kMinParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const double* xr = x.data() + r * dim;
      const double* yc = y.data() + c * dim;
      double acc = 0.0;
      for (std::int64_t d = 0; d < dim; ++d) acc += xr[d] * yc[d];
      out[r * cols + c] = acc;
    }
  }
}

}  // namespace parallel
}  // namespace medzs::kernels
