// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense numeric kernels behind the graph runtime and the batch scorer.
//
// Every kernel has two implementations with identical signatures:
//   serial::   straightforward loops, the reference used by the tests
//   parallel:: OpenMP work-sharing over independent outputs
// Each output element is produced by exactly one thread with a fixed
// summation order, so both variants give bitwise-identical results and the
// parallel one is deterministic for any thread count.

#include <cstdint>
#include <span>

namespace medzs::kernels {

enum class Exec { kSerial, kParallel };

/// Row-major C[m, n] = alpha * op(A) * op(B) + beta * C.
/// op(A) is [m, k]; A is stored [m, k] or, when trans_a, [k, m].
struct GemmShape {
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::int64_t k = 0;
  bool trans_a = false;
  bool trans_b = false;
  float alpha = 1.0f;
  float beta = 0.0f;
};

/// NCHW convolution. Weight is [out_channels, in_channels / groups, kh, kw].
struct Conv2dShape {
  std::int64_t batch = 1;
  std::int64_t in_channels = 0;
  std::int64_t in_h = 0;
  std::int64_t in_w = 0;
  std::int64_t out_channels = 0;
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t stride_h = 1;
  std::int64_t stride_w = 1;
  std::int64_t pad_top = 0;
  std::int64_t pad_left = 0;
  std::int64_t pad_bottom = 0;
  std::int64_t pad_right = 0;
  std::int64_t dilation_h = 1;
  std::int64_t dilation_w = 1;
  std::int64_t groups = 1;

  std::int64_t out_h() const { return (in_h + pad_top + pad_bottom - dilation_h * (kernel_h - 1) - 1) / stride_h + 1; }
  std::int64_t out_w() const { return (in_w + pad_left + pad_right - dilation_w * (kernel_w - 1) - 1) / stride_w + 1; }
};

#define MEDZS_KERNEL_DECLS                                                                  \
  void gemm(const GemmShape& s, std::span<const float> a, std::span<const float> b,        \
            std::span<float> c);                                                            \
  void conv2d(const Conv2dShape& s, std::span<const float> input,                           \
              std::span<const float> weight, std::span<const float> bias,                   \
              std::span<float> output);                                                     \
  void layer_norm(std::int64_t rows, std::int64_t cols, std::span<const float> x,           \
                  std::span<const float> scale, std::span<const float> shift, float epsilon, \
                  std::span<float> y);                                                      \
  void softmax(std::int64_t outer, std::int64_t axis_len, std::int64_t inner,               \
               std::span<const float> x, std::span<float> y);                               \
  void similarity_matrix(std::int64_t rows, std::int64_t cols, std::int64_t dim,            \
                         std::span<const double> x, std::span<const double> y,              \
                         std::span<double> out);

namespace serial {
MEDZS_KERNEL_DECLS
}  // namespace serial

namespace parallel {
MEDZS_KERNEL_DECLS
}  // namespace parallel

#undef MEDZS_KERNEL_DECLS

inline void gemm(Exec e, const GemmShape& s, std::span<const float> a, std::span<const float> b,
                 std::span<float> c) {
  e == Exec::kParallel ? parallel::gemm(s, a, b, c) : serial::gemm(s, a, b, c);
}

inline void conv2d(Exec e, const Conv2dShape& s, std::span<const float> input,
                   std::span<const float> weight, std::span<const float> bias,
                   std::span<float> output) {
  e == Exec::kParallel ? parallel::conv2d(s, input, weight, bias, output)
                       : serial::conv2d(s, input, weight, bias, output);
}

inline void layer_norm(Exec e, std::int64_t rows, std::int64_t cols, std::span<const float> x,
                       std::span<const float> scale, std::span<const float> shift, float epsilon,
                       std::span<float> y) {
  e == Exec::kParallel ? parallel::layer_norm(rows, cols, x, scale, shift, epsilon, y)
                       : serial::layer_norm(rows, cols, x, scale, shift, epsilon, y);
}

inline void softmax(Exec e, std::int64_t outer, std::int64_t axis_len, std::int64_t inner,
                    std::span<const float> x, std::span<float> y) {
  e == Exec::kParallel ? parallel::softmax(outer, axis_len, inner, x, y)
                       : serial::softmax(outer, axis_len, inner, x, y);
}

/// out[r, c] = sum_d x[r, d] * y[c, d], accumulated in index order.
inline void similarity_matrix(Exec e, std::int64_t rows, std::int64_t cols, std::int64_t dim,
                              std::span<const double> x, std::span<const double> y,
                              std::span<double> out) {
  e == Exec::kParallel ? parallel::similarity_matrix(rows, cols, dim, x, y, out)
                       : serial::similarity_matrix(rows, cols, dim, x, y, out);
}

int max_threads();
void set_num_threads(int n);

}  // namespace medzs::kernels
