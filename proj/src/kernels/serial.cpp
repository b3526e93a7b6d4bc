// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// Reference kernels: plain loops, no threading. The parallel variants must
// reproduce these results bit for bit.

#include <algorithm>
#include <cmath>
#include <limits>

#include "medzs/kernels.hpp"

namespace medzs::kernels::serial {

void gemm(const GemmShape& s, std::span<const float> a, std::span<const float> b,
          std::span<float> c) {
  for (std::int64_t i = 0; i < s.m; ++i) {
    for (std::int64_t j = 0; j < s.n; ++j) {
      float acc = 0.0f;
      for (std::int64_t p = 0; p < s.k; ++p) {
        const float av = s.trans_a ? a[p * s.m + i] : a[i * s.k + p];
        const float bv = s.trans_b ? b[j * s.k + p] : b[p * s.n + j];
        acc += av * bv;
      }
      float& out = c[i * s.n + j];
      out = s.beta == 0.0f ? s.alpha * acc : s.alpha * acc + s.beta * out;
    }
  }
}

void conv2d(const Conv2dShape& s, std::span<const float> input, std::span<const float> weight,
            std::span<const float> bias, std::span<float> output) {
  const std::int64_t oh = s.out_h();
  const std::int64_t ow = s.out_w();
  const std::int64_t cin_g = s.in_channels / s.groups;
  const std::int64_t cout_g = s.out_channels / s.groups;
  for (std::int64_t n = 0; n < s.batch; ++n) {
    for (std::int64_t oc = 0; oc < s.out_channels; ++oc) {
      const std::int64_t g = oc / cout_g;
      for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
          float acc = 0.0f;
          for (std::int64_t ic = 0; ic < cin_g; ++ic) {
            const std::int64_t cin = g * cin_g + ic;
            for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
              const std::int64_t iy = y * s.stride_h - s.pad_top + ky * s.dilation_h;
              if (iy < 0 || iy >= s.in_h) continue;
              for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
                const std::int64_t ix = x * s.stride_w - s.pad_left + kx * s.dilation_w;
                if (ix < 0 || ix >= s.in_w) continue;
                acc += input[((n * s.in_channels + cin) * s.in_h + iy) * s.in_w + ix] *
                       weight[((oc * cin_g + ic) * s.kernel_h + ky) * s.kernel_w + kx];
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
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const std::int64_t base = o * axis_len * inner + i;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t a = 0; a < axis_len; ++a) mx = std::max(mx, x[base + a * inner]);
      double sum = 0.0;
      for (std::int64_t a = 0; a < axis_len; ++a) {
        // A row that is entirely -inf (fully masked) yields zeros, not NaN.
        const float e = std::isinf(mx) && mx < 0 ? 0.0f : std::exp(x[base + a * inner] - mx);
        y[base + a * inner] = e;
        sum += e;
      }
      const double inv = sum > 0.0 ? 1.0 / sum : 0.0;
      for (std::int64_t a = 0; a < axis_len; ++a) {
        y[base + a * inner] = static_cast<float>(y[base + a * inner] * inv);
      }
    }
  }
}

void similarity_matrix(std::int64_t rows, std::int64_t cols, std::int64_t dim,
                       std::span<const double> x, std::span<const double> y,
                       std::span<double> out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::int64_t d = 0; d < dim; ++d) acc += x[r * dim + d] * y[c * dim + d];
      out[r * cols + c] = acc;
    }
  }
}

}  // namespace medzs::kernels::serial
