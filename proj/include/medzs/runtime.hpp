// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal inference runtime for serialized encoder graphs.
//
// The encoders talk to a narrow Backend interface ("load graph", "run with
// named inputs -> named outputs"). The shipped OnnxBackend interprets ONNX
// files produced by the PyTorch exporter with a CPU operator set large
// enough for CLIP-family vision and text towers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medzs/kernels.hpp"

namespace medzs::runtime {

enum class DType { kFloat32, kInt64, kBool };

std::string_view to_string(DType dtype);

using Shape = std::vector<std::int64_t>;

std::int64_t element_count(const Shape& shape);

/// Dense row-major tensor. Float32 values live in float storage; integer and
/// boolean values share int64 storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor f32(Shape shape, std::vector<float> values);
  static Tensor i64(Shape shape, std::vector<std::int64_t> values);
  static Tensor boolean(Shape shape, std::vector<std::int64_t> values);
  static Tensor zeros(DType dtype, Shape shape);

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::int64_t rank() const noexcept { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t numel() const noexcept { return element_count(shape_); }
  bool is_float() const noexcept { return dtype_ == DType::kFloat32; }

  std::span<const float> f32() const;
  std::span<float> f32_mut();
  std::span<const std::int64_t> i64() const;
  std::span<std::int64_t> i64_mut();

  /// Same data, new shape (element count must match).
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Element i converted to double / int64 regardless of storage.
  double as_double(std::int64_t i) const;
  std::int64_t as_int(std::int64_t i) const;

 private:
  Tensor(DType dtype, Shape shape) : dtype_(dtype), shape_(std::move(shape)) {}

  DType dtype_ = DType::kFloat32;
  Shape shape_;
  std::vector<float> f32_;
  std::vector<std::int64_t> i64_;
};

using TensorMap = std::map<std::string, Tensor, std::less<>>;

/// A loaded, immutable graph. run() is const and safe to call concurrently.
class GraphSession {
 public:
  virtual ~GraphSession() = default;

  virtual TensorMap run(const TensorMap& inputs) const = 0;
  /// Human-readable identity used in error messages (file name, graph name).
  virtual const std::string& identity() const = 0;
  virtual std::vector<std::string> input_names() const = 0;
  virtual std::vector<std::string> output_names() const = 0;
  /// Shape declared for a graph input or output; symbolic or unknown
  /// dimensions are -1. Empty when the graph declares no shape.
  virtual Shape declared_shape(std::string_view name) const = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string_view name() const = 0;
  virtual std::unique_ptr<GraphSession> load(const std::filesystem::path& file) const = 0;
};

class OnnxBackend final : public Backend {
 public:
  explicit OnnxBackend(kernels::Exec exec = kernels::Exec::kParallel) : exec_(exec) {}

  std::string_view name() const override { return "onnx-cpu"; }
  std::unique_ptr<GraphSession> load(const std::filesystem::path& file) const override;
  /// Parses an in-memory ModelProto; `identity` labels errors.
  std::unique_ptr<GraphSession> load_from_bytes(std::string_view bytes, std::string identity,
                                                const std::filesystem::path& base_dir = {}) const;

 private:
  kernels::Exec exec_;
};

/// Operator types the ONNX backend can execute (default domain only).
std::vector<std::string> supported_onnx_ops();

}  // namespace medzs::runtime
