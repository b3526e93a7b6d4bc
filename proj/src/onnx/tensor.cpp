// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "medzs/error.hpp"
#include "medzs/runtime.hpp"

namespace medzs::runtime {

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "float32";
    case DType::kInt64: return "int64";
    case DType::kBool: return "bool";
  }
  return "?";
}

std::int64_t element_count(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw Error(ErrorCode::kBackend, "negative dimension in tensor shape");
    n *= d;
  }
  return n;
}

Tensor Tensor::f32(Shape shape, std::vector<float> values) {
  Tensor t(DType::kFloat32, std::move(shape));
  if (static_cast<std::int64_t>(values.size()) != t.numel()) {
    throw Error(ErrorCode::kBackend,
                fmt::format("float tensor: {} values for {} elements", values.size(), t.numel()));
  }
  t.f32_ = std::move(values);
  return t;
}

Tensor Tensor::i64(Shape shape, std::vector<std::int64_t> values) {
  Tensor t(DType::kInt64, std::move(shape));
  if (static_cast<std::int64_t>(values.size()) != t.numel()) {
    throw Error(ErrorCode::kBackend,
                fmt::format("int tensor: {} values for {} elements", values.size(), t.numel()));
  }
  t.i64_ = std::move(values);
  return t;
}

Tensor Tensor::boolean(Shape shape, std::vector<std::int64_t> values) {
  Tensor t = i64(std::move(shape), std::move(values));
  t.dtype_ = DType::kBool;
  for (auto& v : t.i64_) v = v != 0;
  return t;
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
  Tensor t(dtype, std::move(shape));
  if (dtype == DType::kFloat32) {
    t.f32_.assign(static_cast<std::size_t>(t.numel()), 0.0f);
  } else {
    t.i64_.assign(static_cast<std::size_t>(t.numel()), 0);
  }
  return t;
}

std::span<const float> Tensor::f32() const {
  if (dtype_ != DType::kFloat32) {
    throw Error(ErrorCode::kBackend, fmt::format("expected float32 tensor, got {}", to_string(dtype_)));
  }
  return f32_;
}

std::span<float> Tensor::f32_mut() {
  if (dtype_ != DType::kFloat32) {
    throw Error(ErrorCode::kBackend, fmt::format("expected float32 tensor, got {}", to_string(dtype_)));
  }
  return f32_;
}

std::span<const std::int64_t> Tensor::i64() const {
  if (dtype_ == DType::kFloat32) throw Error(ErrorCode::kBackend, "expected integer tensor, got float32");
  return i64_;
}

std::span<std::int64_t> Tensor::i64_mut() {
  if (dtype_ == DType::kFloat32) throw Error(ErrorCode::kBackend, "expected integer tensor, got float32");
  return i64_;
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (element_count(shape) != numel()) {
    throw Error(ErrorCode::kBackend,
                fmt::format("cannot reshape {} elements into {} elements", numel(), element_count(shape)));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

double Tensor::as_double(std::int64_t i) const {
  return dtype_ == DType::kFloat32 ? static_cast<double>(f32_[static_cast<std::size_t>(i)])
                                   : static_cast<double>(i64_[static_cast<std::size_t>(i)]);
}

std::int64_t Tensor::as_int(std::int64_t i) const {
  return dtype_ == DType::kFloat32 ? static_cast<std::int64_t>(f32_[static_cast<std::size_t>(i)])
                                   : i64_[static_cast<std::size_t>(i)];
}

}  // namespace medzs::runtime
