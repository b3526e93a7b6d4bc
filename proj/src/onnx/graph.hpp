// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "medzs/kernels.hpp"
#include "medzs/runtime.hpp"

namespace medzs::runtime::detail {

using AttributeValue = std::variant<std::monostate, float, std::int64_t, std::string, Tensor,
                                    std::vector<float>, std::vector<std::int64_t>,
                                    std::vector<std::string>>;

struct Node {
  std::string name;
  std::string op_type;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::unordered_map<std::string, AttributeValue> attributes;

  bool has(const std::string& key) const { return attributes.count(key) != 0; }
  std::int64_t attr_int(const std::string& key, std::int64_t fallback) const;
  float attr_float(const std::string& key, float fallback) const;
  std::vector<std::int64_t> attr_ints(const std::string& key) const;
  const Tensor* attr_tensor(const std::string& key) const;
  std::string label() const;
};

struct OpContext {
  kernels::Exec exec = kernels::Exec::kParallel;
  std::int64_t opset = 17;
};

/// Inputs are positional; missing optional inputs are nullptr.
using OpFn = std::vector<Tensor> (*)(const Node&, std::span<const Tensor* const>, const OpContext&);

/// Returns nullptr for unsupported op types.
OpFn find_op(const std::string& op_type);
std::vector<std::string> op_names();

}  // namespace medzs::runtime::detail
