// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

// CPU implementations of the ONNX operators emitted when exporting CLIP-style
// vision and text towers. Heavy math goes through medzs::kernels; shape
// plumbing and elementwise ops are implemented inline.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "graph.hpp"
#include "medzs/error.hpp"

namespace medzs::runtime::detail {

namespace {

using Inputs = std::span<const Tensor* const>;

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw Error(ErrorCode::kBackend, fmt::format("{}: {}", node.label(), what));
}

const Tensor& in(const Node& node, Inputs inputs, std::size_t i) {
  if (i >= inputs.size() || inputs[i] == nullptr) fail(node, fmt::format("missing input {}", i));
  return *inputs[i];
}

const Tensor* opt(Inputs inputs, std::size_t i) {
  return i < inputs.size() ? inputs[i] : nullptr;
}

std::int64_t norm_axis(const Node& node, std::int64_t axis, std::int64_t rank) {
  if (axis < -rank || axis >= std::max<std::int64_t>(rank, 1)) {
    fail(node, fmt::format("axis {} out of range for rank {}", axis, rank));
  }
  return axis < 0 ? axis + rank : axis;
}

std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (std::int64_t d = static_cast<std::int64_t>(shape.size()) - 2; d >= 0; --d) {
    s[static_cast<std::size_t>(d)] = s[static_cast<std::size_t>(d + 1)] * shape[static_cast<std::size_t>(d + 1)];
  }
  return s;
}

std::int64_t product(const Shape& shape, std::size_t begin, std::size_t end) {
  std::int64_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= shape[i];
  return p;
}

std::vector<std::int64_t> to_ints(const Tensor& t) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i) v[static_cast<std::size_t>(i)] = t.as_int(i);
  return v;
}

Shape broadcast_shape(const Node& node, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      fail(node, fmt::format("shapes [{}] and [{}] do not broadcast", fmt::join(a, ","), fmt::join(b, ",")));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Per-dimension strides of `in` viewed as broadcast to `out` (0 on broadcast dims).
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto base = row_major_strides(in);
  std::vector<std::int64_t> s(out.size(), 0);
  const std::size_t lead = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) s[lead + i] = in[i] == 1 ? 0 : base[i];
  return s;
}

// Calls f(out_index, offset_a, offset_b) in row-major order over `out`.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const std::int64_t n = element_count(out);
  if (n == 0) return;
  if (a == out && b == out) {
    for (std::int64_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  const std::size_t rank = out.size();
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

template <class FloatOp, class IntOp>
Tensor binary_arith(const Node& node, const Tensor& a, const Tensor& b, FloatOp fop, IntOp iop) {
  const Shape out = broadcast_shape(node, a.shape(), b.shape());
  if (a.is_float() || b.is_float()) {
    std::vector<float> r(static_cast<std::size_t>(element_count(out)));
    if (a.is_float() && b.is_float()) {
      const auto av = a.f32();
      const auto bv = b.f32();
      for_each_broadcast(out, a.shape(), b.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
        r[static_cast<std::size_t>(o)] = fop(av[static_cast<std::size_t>(i)], bv[static_cast<std::size_t>(j)]);
      });
    } else {
      for_each_broadcast(out, a.shape(), b.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
        r[static_cast<std::size_t>(o)] = fop(static_cast<float>(a.as_double(i)), static_cast<float>(b.as_double(j)));
      });
    }
    return Tensor::f32(out, std::move(r));
  }
  std::vector<std::int64_t> r(static_cast<std::size_t>(element_count(out)));
  const auto av = a.i64();
  const auto bv = b.i64();
  for_each_broadcast(out, a.shape(), b.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
    r[static_cast<std::size_t>(o)] = iop(av[static_cast<std::size_t>(i)], bv[static_cast<std::size_t>(j)]);
  });
  return Tensor::i64(out, std::move(r));
}

template <class Cmp>
Tensor binary_compare(const Node& node, const Tensor& a, const Tensor& b, Cmp cmp) {
  const Shape out = broadcast_shape(node, a.shape(), b.shape());
  std::vector<std::int64_t> r(static_cast<std::size_t>(element_count(out)));
  for_each_broadcast(out, a.shape(), b.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
    r[static_cast<std::size_t>(o)] = cmp(a.as_double(i), b.as_double(j)) ? 1 : 0;
  });
  return Tensor::boolean(out, std::move(r));
}

std::vector<Tensor> op_add(const Node& n, Inputs x, const OpContext&) {
  return {binary_arith(n, in(n, x, 0), in(n, x, 1), std::plus<float>{}, std::plus<std::int64_t>{})};
}
std::vector<Tensor> op_sub(const Node& n, Inputs x, const OpContext&) {
  return {binary_arith(n, in(n, x, 0), in(n, x, 1), std::minus<float>{}, std::minus<std::int64_t>{})};
}
std::vector<Tensor> op_mul(const Node& n, Inputs x, const OpContext&) {
  return {binary_arith(n, in(n, x, 0), in(n, x, 1), std::multiplies<float>{}, std::multiplies<std::int64_t>{})};
}
std::vector<Tensor> op_div(const Node& n, Inputs x, const OpContext&) {
  return {binary_arith(n, in(n, x, 0), in(n, x, 1), std::divides<float>{},
                       [&](std::int64_t a, std::int64_t b) {
                         if (b == 0) fail(n, "integer division by zero");
                         return a / b;
                       })};
}
std::vector<Tensor> op_pow(const Node& n, Inputs x, const OpContext&) {
  return {binary_arith(
      n, in(n, x, 0), in(n, x, 1), [](float a, float b) { return std::pow(a, b); },
      [](std::int64_t a, std::int64_t b) {
        return static_cast<std::int64_t>(std::pow(static_cast<double>(a), static_cast<double>(b)));
      })};
}
std::vector<Tensor> op_mod(const Node& n, Inputs x, const OpContext&) {
  const bool c_fmod = n.attr_int("fmod", 0) != 0;
  return {binary_arith(
      n, in(n, x, 0), in(n, x, 1), [](float a, float b) { return std::fmod(a, b); },
      [&](std::int64_t a, std::int64_t b) {
        if (b == 0) fail(n, "integer modulo by zero");
        std::int64_t r = a % b;
        if (!c_fmod && r != 0 && ((r < 0) != (b < 0))) r += b;
        return r;
      })};
}
std::vector<Tensor> op_max(const Node& n, Inputs x, const OpContext&) {
  Tensor acc = in(n, x, 0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc = binary_arith(n, acc, in(n, x, i), [](float a, float b) { return std::max(a, b); },
                       [](std::int64_t a, std::int64_t b) { return std::max(a, b); });
  }
  return {acc};
}
std::vector<Tensor> op_min(const Node& n, Inputs x, const OpContext&) {
  Tensor acc = in(n, x, 0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc = binary_arith(n, acc, in(n, x, i), [](float a, float b) { return std::min(a, b); },
                       [](std::int64_t a, std::int64_t b) { return std::min(a, b); });
  }
  return {acc};
}
std::vector<Tensor> op_equal(const Node& n, Inputs x, const OpContext&) {
  return {binary_compare(n, in(n, x, 0), in(n, x, 1), std::equal_to<double>{})};
}
std::vector<Tensor> op_less(const Node& n, Inputs x, const OpContext&) {
  return {binary_compare(n, in(n, x, 0), in(n, x, 1), std::less<double>{})};
}
std::vector<Tensor> op_greater(const Node& n, Inputs x, const OpContext&) {
  return {binary_compare(n, in(n, x, 0), in(n, x, 1), std::greater<double>{})};
}

template <class F>
Tensor unary_float(const Node& node, const Tensor& t, F f) {
  if (!t.is_float()) fail(node, "expects a float tensor");
  const auto v = t.f32();
  std::vector<float> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = f(v[i]);
  return Tensor::f32(t.shape(), std::move(r));
}

std::vector<Tensor> op_sqrt(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return std::sqrt(v); })};
}
std::vector<Tensor> op_sigmoid(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); })};
}
std::vector<Tensor> op_exp(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return std::exp(v); })};
}
std::vector<Tensor> op_log(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return std::log(v); })};
}
std::vector<Tensor> op_erf(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return std::erf(v); })};
}
std::vector<Tensor> op_tanh(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return std::tanh(v); })};
}
std::vector<Tensor> op_relu(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return v > 0.0f ? v : 0.0f; })};
}
std::vector<Tensor> op_reciprocal(const Node& n, Inputs x, const OpContext&) {
  return {unary_float(n, in(n, x, 0), [](float v) { return 1.0f / v; })};
}
std::vector<Tensor> op_neg(const Node& n, Inputs x, const OpContext&) {
  const Tensor& t = in(n, x, 0);
  if (t.is_float()) return {unary_float(n, t, [](float v) { return -v; })};
  std::vector<std::int64_t> r(t.i64().begin(), t.i64().end());
  for (auto& v : r) v = -v;
  return {Tensor::i64(t.shape(), std::move(r))};
}
std::vector<Tensor> op_abs(const Node& n, Inputs x, const OpContext&) {
  const Tensor& t = in(n, x, 0);
  if (t.is_float()) return {unary_float(n, t, [](float v) { return std::abs(v); })};
  std::vector<std::int64_t> r(t.i64().begin(), t.i64().end());
  for (auto& v : r) v = std::abs(v);
  return {Tensor::i64(t.shape(), std::move(r))};
}

std::vector<Tensor> op_where(const Node& n, Inputs x, const OpContext&) {
  const Tensor& cond = in(n, x, 0);
  const Tensor& a = in(n, x, 1);
  const Tensor& b = in(n, x, 2);
  const Shape out = broadcast_shape(n, broadcast_shape(n, cond.shape(), a.shape()), b.shape());
  // Broadcast cond/a first, then select against b.
  const Shape ca = broadcast_shape(n, cond.shape(), a.shape());
  std::vector<std::int64_t> ci(static_cast<std::size_t>(element_count(ca)));
  std::vector<std::int64_t> ai(ci.size());
  for_each_broadcast(ca, cond.shape(), a.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
    ci[static_cast<std::size_t>(o)] = i;
    ai[static_cast<std::size_t>(o)] = j;
  });
  const bool as_float = a.is_float() || b.is_float();
  Tensor result = Tensor::zeros(as_float ? DType::kFloat32 : a.dtype(), out);
  for_each_broadcast(out, ca, b.shape(), [&](std::int64_t o, std::int64_t i, std::int64_t j) {
    const bool take_a = cond.as_int(ci[static_cast<std::size_t>(i)]) != 0;
    const std::int64_t src_a = ai[static_cast<std::size_t>(i)];
    if (as_float) {
      result.f32_mut()[static_cast<std::size_t>(o)] =
          static_cast<float>(take_a ? a.as_double(src_a) : b.as_double(j));
    } else {
      result.i64_mut()[static_cast<std::size_t>(o)] = take_a ? a.as_int(src_a) : b.as_int(j);
    }
  });
  return {result};
}

std::vector<Tensor> op_cast(const Node& n, Inputs x, const OpContext&) {
  const Tensor& t = in(n, x, 0);
  const std::int64_t to = n.attr_int("to", 0);
  switch (to) {
    case 1:    // FLOAT
    case 11: {  // DOUBLE, computed in single precision
      if (t.is_float()) return {t};
      std::vector<float> r(static_cast<std::size_t>(t.numel()));
      for (std::int64_t i = 0; i < t.numel(); ++i) r[static_cast<std::size_t>(i)] = static_cast<float>(t.as_double(i));
      return {Tensor::f32(t.shape(), std::move(r))};
    }
    case 2: case 3: case 4: case 5: case 6: case 7: case 12: case 13: {
      std::vector<std::int64_t> r(static_cast<std::size_t>(t.numel()));
      for (std::int64_t i = 0; i < t.numel(); ++i) r[static_cast<std::size_t>(i)] = t.as_int(i);
      return {Tensor::i64(t.shape(), std::move(r))};
    }
    case 9: {
      std::vector<std::int64_t> r(static_cast<std::size_t>(t.numel()));
      for (std::int64_t i = 0; i < t.numel(); ++i) r[static_cast<std::size_t>(i)] = t.as_double(i) != 0.0;
      return {Tensor::boolean(t.shape(), std::move(r))};
    }
    default:
      fail(n, fmt::format("unsupported cast target type {}", to));
  }
}

// ---------------------------------------------------------------------------
// Shape manipulation

std::vector<Tensor> op_identity(const Node& n, Inputs x, const OpContext&) { return {in(n, x, 0)}; }

std::vector<Tensor> op_shape(const Node& n, Inputs x, const OpContext&) {
  const Shape& s = in(n, x, 0).shape();
  const auto rank = static_cast<std::int64_t>(s.size());
  std::int64_t start = n.attr_int("start", 0);
  std::int64_t end = n.attr_int("end", rank);
  if (start < 0) start += rank;
  if (end < 0) end += rank;
  start = std::clamp<std::int64_t>(start, 0, rank);
  end = std::clamp<std::int64_t>(end, start, rank);
  std::vector<std::int64_t> dims(s.begin() + start, s.begin() + end);
  const auto count = static_cast<std::int64_t>(dims.size());
  return {Tensor::i64({count}, std::move(dims))};
}

std::vector<Tensor> op_reshape(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  auto target = to_ints(in(n, x, 1));
  const bool allow_zero = n.attr_int("allowzero", 0) != 0;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0 && !allow_zero) {
      if (i >= data.shape().size()) fail(n, "reshape copies a dimension that does not exist");
      target[i] = data.shape()[i];
    }
    if (target[i] == -1) {
      if (infer >= 0) fail(n, "more than one inferred dimension");
      infer = static_cast<int>(i);
    } else {
      known *= target[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || data.numel() % known != 0) fail(n, "cannot infer reshape dimension");
    target[static_cast<std::size_t>(infer)] = data.numel() / known;
  }
  return {data.reshaped(target)};
}

std::vector<Tensor> op_flatten(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const std::int64_t rank = data.rank();
  std::int64_t axis = n.attr_int("axis", 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis > rank) fail(n, "flatten axis out of range");
  const std::int64_t outer = product(data.shape(), 0, static_cast<std::size_t>(axis));
  return {data.reshaped({outer, data.numel() / std::max<std::int64_t>(outer, 1)})};
}

std::vector<std::int64_t> axes_from(const Node& n, Inputs x, std::size_t input_index, const OpContext& ctx) {
  if (ctx.opset >= 13) {
    const Tensor* axes = opt(x, input_index);
    return axes ? to_ints(*axes) : std::vector<std::int64_t>{};
  }
  return n.attr_ints("axes");
}

std::vector<Tensor> op_unsqueeze(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& data = in(n, x, 0);
  auto axes = axes_from(n, x, 1, ctx);
  const auto out_rank = static_cast<std::int64_t>(data.shape().size() + axes.size());
  for (auto& a : axes) a = norm_axis(n, a, out_rank);
  std::sort(axes.begin(), axes.end());
  Shape out;
  std::size_t src = 0, ai = 0;
  for (std::int64_t d = 0; d < out_rank; ++d) {
    if (ai < axes.size() && axes[ai] == d) {
      out.push_back(1);
      ++ai;
    } else {
      out.push_back(data.shape()[src++]);
    }
  }
  return {data.reshaped(out)};
}

std::vector<Tensor> op_squeeze(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& data = in(n, x, 0);
  auto axes = axes_from(n, x, 1, ctx);
  for (auto& a : axes) a = norm_axis(n, a, data.rank());
  Shape out;
  for (std::int64_t d = 0; d < data.rank(); ++d) {
    const bool listed = std::find(axes.begin(), axes.end(), d) != axes.end();
    const std::int64_t dim = data.shape()[static_cast<std::size_t>(d)];
    if (listed && dim != 1) fail(n, "cannot squeeze a dimension that is not 1");
    if ((axes.empty() && dim == 1) || listed) continue;
    out.push_back(dim);
  }
  return {data.reshaped(out)};
}

std::vector<Tensor> op_concat(const Node& n, Inputs x, const OpContext&) {
  const Tensor& first = in(n, x, 0);
  const std::int64_t axis = norm_axis(n, n.attr_int("axis", 0), first.rank());
  Shape out = first.shape();
  out[static_cast<std::size_t>(axis)] = 0;
  bool any_float = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Tensor& t = in(n, x, i);
    if (t.rank() != first.rank()) fail(n, "concat inputs differ in rank");
    out[static_cast<std::size_t>(axis)] += t.shape()[static_cast<std::size_t>(axis)];
    any_float = any_float || t.is_float();
  }
  const std::int64_t outer = product(out, 0, static_cast<std::size_t>(axis));
  const std::int64_t inner = product(out, static_cast<std::size_t>(axis) + 1, out.size());
  Tensor result = Tensor::zeros(any_float ? DType::kFloat32 : first.dtype(), out);
  std::int64_t offset = 0;
  const std::int64_t out_block = out[static_cast<std::size_t>(axis)] * inner;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Tensor& t = in(n, x, i);
    const std::int64_t block = t.shape()[static_cast<std::size_t>(axis)] * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t k = 0; k < block; ++k) {
        const std::int64_t src = o * block + k;
        const std::int64_t dst = o * out_block + offset + k;
        if (any_float) {
          result.f32_mut()[static_cast<std::size_t>(dst)] = static_cast<float>(t.as_double(src));
        } else {
          result.i64_mut()[static_cast<std::size_t>(dst)] = t.as_int(src);
        }
      }
    }
    offset += block;
  }
  return {result};
}

std::vector<Tensor> op_transpose(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const auto rank = static_cast<std::size_t>(data.rank());
  auto perm = n.attr_ints("perm");
  if (perm.empty()) {
    perm.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) perm[i] = static_cast<std::int64_t>(rank - 1 - i);
  }
  if (perm.size() != rank) fail(n, "perm length does not match rank");
  Shape out(rank);
  const auto in_strides = row_major_strides(data.shape());
  std::vector<std::int64_t> src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = data.shape()[static_cast<std::size_t>(perm[i])];
    src_strides[i] = in_strides[static_cast<std::size_t>(perm[i])];
  }
  Tensor result = Tensor::zeros(data.dtype(), out);
  const std::int64_t total = data.numel();
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    if (data.is_float()) {
      result.f32_mut()[static_cast<std::size_t>(o)] = data.f32()[static_cast<std::size_t>(src)];
    } else {
      result.i64_mut()[static_cast<std::size_t>(o)] = data.i64()[static_cast<std::size_t>(src)];
    }
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += src_strides[d];
      if (idx[d] < out[d]) break;
      src -= src_strides[d] * out[d];
      idx[d] = 0;
    }
  }
  return {result};
}

std::vector<Tensor> op_gather(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const Tensor& indices = in(n, x, 1);
  const std::int64_t axis = norm_axis(n, n.attr_int("axis", 0), data.rank());
  const std::int64_t dim = data.shape()[static_cast<std::size_t>(axis)];
  Shape out(data.shape().begin(), data.shape().begin() + axis);
  out.insert(out.end(), indices.shape().begin(), indices.shape().end());
  out.insert(out.end(), data.shape().begin() + axis + 1, data.shape().end());
  const std::int64_t outer = product(data.shape(), 0, static_cast<std::size_t>(axis));
  const std::int64_t inner = product(data.shape(), static_cast<std::size_t>(axis) + 1, data.shape().size());
  const std::int64_t count = indices.numel();
  Tensor result = Tensor::zeros(data.dtype(), out);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t j = 0; j < count; ++j) {
      std::int64_t idx = indices.as_int(j);
      if (idx < 0) idx += dim;
      if (idx < 0 || idx >= dim) fail(n, fmt::format("gather index {} out of range [0, {})", indices.as_int(j), dim));
      const std::int64_t src = (o * dim + idx) * inner;
      const std::int64_t dst = (o * count + j) * inner;
      if (data.is_float()) {
        std::copy_n(data.f32().begin() + src, inner, result.f32_mut().begin() + dst);
      } else {
        std::copy_n(data.i64().begin() + src, inner, result.i64_mut().begin() + dst);
      }
    }
  }
  return {result};
}

std::vector<Tensor> op_slice(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const auto starts = to_ints(in(n, x, 1));
  const auto ends = to_ints(in(n, x, 2));
  std::vector<std::int64_t> axes;
  if (const Tensor* a = opt(x, 3)) {
    axes = to_ints(*a);
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) axes.push_back(static_cast<std::int64_t>(i));
  }
  std::vector<std::int64_t> steps(starts.size(), 1);
  if (const Tensor* s = opt(x, 4)) steps = to_ints(*s);
  if (ends.size() != starts.size() || axes.size() != starts.size() || steps.size() != starts.size()) {
    fail(n, "slice parameter lengths differ");
  }
  const auto rank = static_cast<std::size_t>(data.rank());
  std::vector<std::int64_t> first(rank, 0), step(rank, 1);
  Shape out = data.shape();
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto ax = static_cast<std::size_t>(norm_axis(n, axes[i], data.rank()));
    const std::int64_t dim = data.shape()[ax];
    const std::int64_t st = steps[i];
    if (st == 0) fail(n, "slice step must be non-zero");
    std::int64_t b = starts[i] < 0 ? starts[i] + dim : starts[i];
    std::int64_t e = ends[i] < 0 ? ends[i] + dim : ends[i];
    if (st > 0) {
      b = std::clamp<std::int64_t>(b, 0, dim);
      e = std::clamp<std::int64_t>(e, 0, dim);
      out[ax] = e > b ? (e - b + st - 1) / st : 0;
    } else {
      b = std::clamp<std::int64_t>(b, 0, dim - 1);
      e = std::clamp<std::int64_t>(e, -1, dim - 1);
      out[ax] = b > e ? (b - e - st - 1) / (-st) : 0;
    }
    first[ax] = b;
    step[ax] = st;
  }
  Tensor result = Tensor::zeros(data.dtype(), out);
  const std::int64_t total = element_count(out);
  const auto strides = row_major_strides(data.shape());
  std::vector<std::int64_t> idx(rank, 0);
  for (std::int64_t o = 0; o < total; ++o) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) src += (first[d] + idx[d] * step[d]) * strides[d];
    if (data.is_float()) {
      result.f32_mut()[static_cast<std::size_t>(o)] = data.f32()[static_cast<std::size_t>(src)];
    } else {
      result.i64_mut()[static_cast<std::size_t>(o)] = data.i64()[static_cast<std::size_t>(src)];
    }
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
  return {result};
}

std::vector<Tensor> op_expand(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const Shape out = broadcast_shape(n, data.shape(), to_ints(in(n, x, 1)));
  Tensor result = Tensor::zeros(data.dtype(), out);
  for_each_broadcast(out, data.shape(), out, [&](std::int64_t o, std::int64_t i, std::int64_t) {
    if (data.is_float()) {
      result.f32_mut()[static_cast<std::size_t>(o)] = data.f32()[static_cast<std::size_t>(i)];
    } else {
      result.i64_mut()[static_cast<std::size_t>(o)] = data.i64()[static_cast<std::size_t>(i)];
    }
  });
  return {result};
}

std::vector<Tensor> op_constant_of_shape(const Node& n, Inputs x, const OpContext&) {
  const Shape shape = to_ints(in(n, x, 0));
  const Tensor* value = n.attr_tensor("value");
  if (value == nullptr || value->is_float()) {
    const float v = value ? value->f32()[0] : 0.0f;
    return {Tensor::f32(shape, std::vector<float>(static_cast<std::size_t>(element_count(shape)), v))};
  }
  std::vector<std::int64_t> vals(static_cast<std::size_t>(element_count(shape)), value->i64()[0]);
  return {value->dtype() == DType::kBool ? Tensor::boolean(shape, std::move(vals))
                                          : Tensor::i64(shape, std::move(vals))};
}

std::vector<Tensor> op_range(const Node& n, Inputs x, const OpContext&) {
  const Tensor& start = in(n, x, 0);
  const Tensor& limit = in(n, x, 1);
  const Tensor& delta = in(n, x, 2);
  if (start.is_float()) {
    const double s = start.as_double(0), l = limit.as_double(0), d = delta.as_double(0);
    if (d == 0.0) fail(n, "range delta is zero");
    const auto count = static_cast<std::int64_t>(std::max(0.0, std::ceil((l - s) / d)));
    std::vector<float> r(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) r[static_cast<std::size_t>(i)] = static_cast<float>(s + static_cast<double>(i) * d);
    return {Tensor::f32({count}, std::move(r))};
  }
  const std::int64_t s = start.as_int(0), l = limit.as_int(0), d = delta.as_int(0);
  if (d == 0) fail(n, "range delta is zero");
  const std::int64_t count = std::max<std::int64_t>(0, (l - s + d + (d > 0 ? -1 : 1)) / d);
  std::vector<std::int64_t> r(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) r[static_cast<std::size_t>(i)] = s + i * d;
  return {Tensor::i64({count}, std::move(r))};
}

std::vector<Tensor> op_argmax(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  const std::int64_t axis = norm_axis(n, n.attr_int("axis", 0), data.rank());
  const bool keepdims = n.attr_int("keepdims", 1) != 0;
  const bool last = n.attr_int("select_last_index", 0) != 0;
  const std::int64_t outer = product(data.shape(), 0, static_cast<std::size_t>(axis));
  const std::int64_t len = data.shape()[static_cast<std::size_t>(axis)];
  const std::int64_t inner = product(data.shape(), static_cast<std::size_t>(axis) + 1, data.shape().size());
  Shape out = data.shape();
  if (keepdims) {
    out[static_cast<std::size_t>(axis)] = 1;
  } else {
    out.erase(out.begin() + axis);
  }
  std::vector<std::int64_t> r(static_cast<std::size_t>(outer * inner));
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      std::int64_t best = 0;
      double best_v = data.as_double(o * len * inner + i);
      for (std::int64_t a = 1; a < len; ++a) {
        const double v = data.as_double((o * len + a) * inner + i);
        if (v > best_v || (last && v == best_v)) {
          best = a;
          best_v = v;
        }
      }
      r[static_cast<std::size_t>(o * inner + i)] = best;
    }
  }
  return {Tensor::i64(out, std::move(r))};
}

std::vector<Tensor> op_reduce_mean(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& data = in(n, x, 0);
  std::vector<std::int64_t> axes;
  if (ctx.opset >= 18) {
    if (const Tensor* a = opt(x, 1)) axes = to_ints(*a);
  } else {
    axes = n.attr_ints("axes");
  }
  const bool keepdims = n.attr_int("keepdims", 1) != 0;
  if (axes.empty()) {
    if (n.attr_int("noop_with_empty_axes", 0) != 0) return {data};
    for (std::int64_t d = 0; d < data.rank(); ++d) axes.push_back(d);
  }
  std::vector<bool> reduce(static_cast<std::size_t>(data.rank()), false);
  for (auto a : axes) reduce[static_cast<std::size_t>(norm_axis(n, a, data.rank()))] = true;
  Shape kept;
  for (std::size_t d = 0; d < reduce.size(); ++d) kept.push_back(reduce[d] ? 1 : data.shape()[d]);
  std::vector<double> sums(static_cast<std::size_t>(element_count(kept)), 0.0);
  const auto out_strides = broadcast_strides(kept, data.shape());
  const auto rank = reduce.size();
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t dst = 0;
  for (std::int64_t i = 0; i < data.numel(); ++i) {
    sums[static_cast<std::size_t>(dst)] += data.as_double(i);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      dst += out_strides[d];
      if (idx[d] < data.shape()[d]) break;
      dst -= out_strides[d] * data.shape()[d];
      idx[d] = 0;
    }
  }
  const double count = static_cast<double>(data.numel()) / static_cast<double>(std::max<std::size_t>(sums.size(), 1));
  std::vector<float> r(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) r[i] = static_cast<float>(sums[i] / count);
  Shape out;
  for (std::size_t d = 0; d < rank; ++d) {
    if (!reduce[d]) {
      out.push_back(data.shape()[d]);
    } else if (keepdims) {
      out.push_back(1);
    }
  }
  return {Tensor::f32(out, std::move(r))};
}

// ---------------------------------------------------------------------------
// Dense math

std::vector<Tensor> op_matmul(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& a_in = in(n, x, 0);
  const Tensor& b_in = in(n, x, 1);
  if (!a_in.is_float() || !b_in.is_float()) fail(n, "only float32 MatMul is supported");
  Shape as = a_in.shape(), bs = b_in.shape();
  const bool a_vec = as.size() == 1, b_vec = bs.size() == 1;
  if (a_vec) as.insert(as.begin(), 1);
  if (b_vec) bs.push_back(1);
  if (as.size() < 2 || bs.size() < 2) fail(n, "scalar operands are not allowed");
  const std::int64_t m = as[as.size() - 2], k = as.back();
  const std::int64_t n_cols = bs.back();
  if (bs[bs.size() - 2] != k) {
    fail(n, fmt::format("inner dimensions differ: [{}] x [{}]", fmt::join(as, ","), fmt::join(bs, ",")));
  }
  const Shape a_batch(as.begin(), as.end() - 2);
  const Shape b_batch(bs.begin(), bs.end() - 2);
  const Shape batch = broadcast_shape(n, a_batch, b_batch);
  Shape out = batch;
  out.push_back(m);
  out.push_back(n_cols);
  std::vector<float> r(static_cast<std::size_t>(element_count(out)));
  const auto av = a_in.f32();
  const auto bv = b_in.f32();

  if (b_batch.empty()) {
    // Fold all leading dimensions of A into the row count.
    const std::int64_t rows = element_count(a_batch) * m;
    kernels::gemm(ctx.exec, {rows, n_cols, k}, av, bv, r);
  } else {
    const std::int64_t a_mat = m * k, b_mat = k * n_cols, o_mat = m * n_cols;
    for_each_broadcast(batch, a_batch, b_batch, [&](std::int64_t o, std::int64_t i, std::int64_t j) {
      kernels::gemm(ctx.exec, {m, n_cols, k}, av.subspan(static_cast<std::size_t>(i * a_mat), static_cast<std::size_t>(a_mat)),
                    bv.subspan(static_cast<std::size_t>(j * b_mat), static_cast<std::size_t>(b_mat)),
                    std::span<float>(r).subspan(static_cast<std::size_t>(o * o_mat), static_cast<std::size_t>(o_mat)));
    });
  }
  if (a_vec) out.erase(out.end() - 2);
  if (b_vec) out.pop_back();
  return {Tensor::f32(out, std::move(r))};
}

std::vector<Tensor> op_gemm(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& a = in(n, x, 0);
  const Tensor& b = in(n, x, 1);
  const Tensor* c = opt(x, 2);
  if (a.rank() != 2 || b.rank() != 2) fail(n, "Gemm operands must be matrices");
  kernels::GemmShape s;
  s.trans_a = n.attr_int("transA", 0) != 0;
  s.trans_b = n.attr_int("transB", 0) != 0;
  s.alpha = n.attr_float("alpha", 1.0f);
  s.beta = c ? n.attr_float("beta", 1.0f) : 0.0f;
  s.m = s.trans_a ? a.shape()[1] : a.shape()[0];
  s.k = s.trans_a ? a.shape()[0] : a.shape()[1];
  s.n = s.trans_b ? b.shape()[0] : b.shape()[1];
  const std::int64_t kb = s.trans_b ? b.shape()[1] : b.shape()[0];
  if (kb != s.k) fail(n, "Gemm inner dimensions differ");
  const Shape out{s.m, s.n};
  std::vector<float> r(static_cast<std::size_t>(s.m * s.n), 0.0f);
  if (c) {
    const Shape cb = broadcast_shape(n, c->shape(), out);
    if (cb != out) fail(n, "Gemm bias does not broadcast to the output");
    const auto cv = c->f32();
    for_each_broadcast(out, c->shape(), out, [&](std::int64_t o, std::int64_t i, std::int64_t) {
      r[static_cast<std::size_t>(o)] = cv[static_cast<std::size_t>(i)];
    });
  }
  kernels::gemm(ctx.exec, s, a.f32(), b.f32(), r);
  return {Tensor::f32(out, std::move(r))};
}

std::vector<Tensor> op_conv(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& input = in(n, x, 0);
  const Tensor& weight = in(n, x, 1);
  const Tensor* bias = opt(x, 2);
  if (input.rank() != 4 || weight.rank() != 4) fail(n, "only 2-D convolution is supported");
  const std::string auto_pad = n.has("auto_pad") ? std::get<std::string>(n.attributes.at("auto_pad")) : "NOTSET";
  if (auto_pad != "NOTSET" && auto_pad != "VALID") fail(n, "auto_pad " + auto_pad + " is not supported");

  kernels::Conv2dShape s;
  s.batch = input.shape()[0];
  s.in_channels = input.shape()[1];
  s.in_h = input.shape()[2];
  s.in_w = input.shape()[3];
  s.out_channels = weight.shape()[0];
  s.kernel_h = weight.shape()[2];
  s.kernel_w = weight.shape()[3];
  s.groups = n.attr_int("group", 1);
  if (s.groups <= 0 || s.in_channels % s.groups != 0 || s.out_channels % s.groups != 0 ||
      weight.shape()[1] * s.groups != s.in_channels) {
    fail(n, "channel/group configuration is inconsistent");
  }
  if (auto strides = n.attr_ints("strides"); strides.size() == 2) {
    s.stride_h = strides[0];
    s.stride_w = strides[1];
  }
  if (auto dil = n.attr_ints("dilations"); dil.size() == 2) {
    s.dilation_h = dil[0];
    s.dilation_w = dil[1];
  }
  if (auto pads = n.attr_ints("pads"); pads.size() == 4 && auto_pad == "NOTSET") {
    s.pad_top = pads[0];
    s.pad_left = pads[1];
    s.pad_bottom = pads[2];
    s.pad_right = pads[3];
  }
  if (s.out_h() <= 0 || s.out_w() <= 0) fail(n, "convolution output would be empty");
  const Shape out{s.batch, s.out_channels, s.out_h(), s.out_w()};
  std::vector<float> r(static_cast<std::size_t>(element_count(out)));
  kernels::conv2d(ctx.exec, s, input.f32(), weight.f32(), bias ? bias->f32() : std::span<const float>{}, r);
  return {Tensor::f32(out, std::move(r))};
}

std::vector<Tensor> op_layer_norm(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& data = in(n, x, 0);
  const Tensor& scale = in(n, x, 1);
  const Tensor* shift = opt(x, 2);
  const std::int64_t axis = norm_axis(n, n.attr_int("axis", -1), data.rank());
  const std::int64_t rows = product(data.shape(), 0, static_cast<std::size_t>(axis));
  const std::int64_t cols = product(data.shape(), static_cast<std::size_t>(axis), data.shape().size());
  if (scale.numel() != cols || (shift && shift->numel() != cols)) {
    fail(n, "scale/bias size does not match the normalized extent");
  }
  std::vector<float> r(static_cast<std::size_t>(data.numel()));
  kernels::layer_norm(ctx.exec, rows, cols, data.f32(), scale.f32(),
                      shift ? shift->f32() : std::span<const float>{}, n.attr_float("epsilon", 1e-5f), r);
  return {Tensor::f32(data.shape(), std::move(r))};
}

std::vector<Tensor> op_softmax(const Node& n, Inputs x, const OpContext& ctx) {
  const Tensor& data = in(n, x, 0);
  const std::int64_t rank = data.rank();
  std::int64_t outer, len, inner;
  if (ctx.opset >= 13) {
    const std::int64_t axis = norm_axis(n, n.attr_int("axis", -1), rank);
    outer = product(data.shape(), 0, static_cast<std::size_t>(axis));
    len = data.shape()[static_cast<std::size_t>(axis)];
    inner = product(data.shape(), static_cast<std::size_t>(axis) + 1, data.shape().size());
  } else {
    const std::int64_t axis = norm_axis(n, n.attr_int("axis", 1), rank);
    outer = product(data.shape(), 0, static_cast<std::size_t>(axis));
    len = product(data.shape(), static_cast<std::size_t>(axis), data.shape().size());
    inner = 1;
  }
  std::vector<float> r(static_cast<std::size_t>(data.numel()));
  kernels::softmax(ctx.exec, outer, len, inner, data.f32(), r);
  return {Tensor::f32(data.shape(), std::move(r))};
}

std::vector<Tensor> op_dropout(const Node& n, Inputs x, const OpContext&) {
  const Tensor& data = in(n, x, 0);
  std::vector<Tensor> outs{data};
  if (n.outputs.size() > 1) {
    outs.push_back(Tensor::boolean(data.shape(), std::vector<std::int64_t>(static_cast<std::size_t>(data.numel()), 1)));
  }
  return outs;
}

const std::map<std::string, OpFn>& registry() {
  static const std::map<std::string, OpFn> ops = {
      {"Abs", op_abs},
      {"Add", op_add},
      {"ArgMax", op_argmax},
      {"Cast", op_cast},
      {"Concat", op_concat},
      {"ConstantOfShape", op_constant_of_shape},
      {"Conv", op_conv},
      {"Div", op_div},
      {"Dropout", op_dropout},
      {"Equal", op_equal},
      {"Erf", op_erf},
      {"Exp", op_exp},
      {"Expand", op_expand},
      {"Flatten", op_flatten},
      {"Gather", op_gather},
      {"Gemm", op_gemm},
      {"Greater", op_greater},
      {"Identity", op_identity},
      {"LayerNormalization", op_layer_norm},
      {"Less", op_less},
      {"Log", op_log},
      {"MatMul", op_matmul},
      {"Max", op_max},
      {"Min", op_min},
      {"Mod", op_mod},
      {"Mul", op_mul},
      {"Neg", op_neg},
      {"Pow", op_pow},
      {"Range", op_range},
      {"Reciprocal", op_reciprocal},
      {"ReduceMean", op_reduce_mean},
      {"Relu", op_relu},
      {"Reshape", op_reshape},
      {"Shape", op_shape},
      {"Sigmoid", op_sigmoid},
      {"Slice", op_slice},
      {"Softmax", op_softmax},
      {"Sqrt", op_sqrt},
      {"Squeeze", op_squeeze},
      {"Sub", op_sub},
      {"Tanh", op_tanh},
      {"Transpose", op_transpose},
      {"Unsqueeze", op_unsqueeze},
      {"Where", op_where},
  };
  return ops;
}

}  // namespace

OpFn find_op(const std::string& op_type) {
  const auto& ops = registry();
  const auto it = ops.find(op_type);
  return it == ops.end() ? nullptr : it->second;
}

std::vector<std::string> op_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  names.push_back("Constant");
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace medzs::runtime::detail
