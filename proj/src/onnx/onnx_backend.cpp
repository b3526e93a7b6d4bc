// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include <climits>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <google/protobuf/io/coded_stream.h>

#include "graph.hpp"
#include "medzs/error.hpp"
#include "onnx_subset.pb.h"

namespace medzs::runtime {

namespace detail {

std::int64_t Node::attr_int(const std::string& key, std::int64_t fallback) const {
  const auto it = attributes.find(key);
  if (it == attributes.end()) return fallback;
  if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
  throw Error(ErrorCode::kBackend, fmt::format("{}: attribute '{}' is not an int", label(), key));
}

float Node::attr_float(const std::string& key, float fallback) const {
  const auto it = attributes.find(key);
  if (it == attributes.end()) return fallback;
  if (const auto* v = std::get_if<float>(&it->second)) return *v;
  throw Error(ErrorCode::kBackend, fmt::format("{}: attribute '{}' is not a float", label(), key));
}

std::vector<std::int64_t> Node::attr_ints(const std::string& key) const {
  const auto it = attributes.find(key);
  if (it == attributes.end()) return {};
  if (const auto* v = std::get_if<std::vector<std::int64_t>>(&it->second)) return *v;
  throw Error(ErrorCode::kBackend, fmt::format("{}: attribute '{}' is not an int list", label(), key));
}

const Tensor* Node::attr_tensor(const std::string& key) const {
  const auto it = attributes.find(key);
  if (it == attributes.end()) return nullptr;
  return std::get_if<Tensor>(&it->second);
}

std::string Node::label() const {
  return name.empty() ? op_type : fmt::format("{} ({})", op_type, name);
}

}  // namespace detail

namespace {

using detail::Node;

template <class T>
std::vector<T> raw_values(const std::string& raw, const std::string& what) {
  if (raw.size() % sizeof(T) != 0) {
    throw Error(ErrorCode::kBackend, fmt::format("tensor '{}': raw data size is not a multiple of {}", what, sizeof(T)));
  }
  std::vector<T> out(raw.size() / sizeof(T));
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

std::string read_external(const onnx::TensorProto& proto, const std::filesystem::path& base_dir) {
  std::string location;
  std::int64_t offset = 0, length = -1;
  for (const auto& kv : proto.external_data()) {
    if (kv.key() == "location") location = kv.value();
    if (kv.key() == "offset") offset = std::stoll(kv.value());
    if (kv.key() == "length") length = std::stoll(kv.value());
  }
  const auto path = base_dir / location;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, fmt::format("cannot open external tensor data '{}'", path.string()));
  f.seekg(0, std::ios::end);
  const std::int64_t size = f.tellg();
  if (length < 0) length = size - offset;
  if (offset < 0 || offset + length > size) {
    throw Error(ErrorCode::kBackend, fmt::format("external data range out of bounds in '{}'", path.string()));
  }
  std::string buf(static_cast<std::size_t>(length), '\0');
  f.seekg(offset);
  f.read(buf.data(), length);
  return buf;
}

Tensor convert_tensor(const onnx::TensorProto& proto, const std::filesystem::path& base_dir) {
  Shape shape(proto.dims().begin(), proto.dims().end());
  const std::int64_t count = element_count(shape);
  std::string raw = proto.raw_data();
  if (proto.data_location() == onnx::TensorProto::EXTERNAL) raw = read_external(proto, base_dir);
  const bool has_raw = proto.has_raw_data() || proto.data_location() == onnx::TensorProto::EXTERNAL;

  auto as_i64 = [&](auto&& vec) {
    return std::vector<std::int64_t>(vec.begin(), vec.end());
  };

  Tensor t;
  switch (proto.data_type()) {
    case onnx::TensorProto::FLOAT:
      t = Tensor::f32(shape, has_raw ? raw_values<float>(raw, proto.name())
                                     : std::vector<float>(proto.float_data().begin(), proto.float_data().end()));
      break;
    case onnx::TensorProto::DOUBLE: {
      const auto d = has_raw ? raw_values<double>(raw, proto.name())
                             : std::vector<double>(proto.double_data().begin(), proto.double_data().end());
      t = Tensor::f32(shape, std::vector<float>(d.begin(), d.end()));
      break;
    }
    case onnx::TensorProto::INT64:
      t = Tensor::i64(shape, has_raw ? raw_values<std::int64_t>(raw, proto.name()) : as_i64(proto.int64_data()));
      break;
    case onnx::TensorProto::INT32:
      t = Tensor::i64(shape, has_raw ? as_i64(raw_values<std::int32_t>(raw, proto.name())) : as_i64(proto.int32_data()));
      break;
    case onnx::TensorProto::INT8:
      t = Tensor::i64(shape, has_raw ? as_i64(raw_values<std::int8_t>(raw, proto.name())) : as_i64(proto.int32_data()));
      break;
    case onnx::TensorProto::UINT8:
      t = Tensor::i64(shape, has_raw ? as_i64(raw_values<std::uint8_t>(raw, proto.name())) : as_i64(proto.int32_data()));
      break;
    case onnx::TensorProto::BOOL:
      t = Tensor::boolean(shape, has_raw ? as_i64(raw_values<std::uint8_t>(raw, proto.name())) : as_i64(proto.int32_data()));
      break;
    default:
      throw Error(ErrorCode::kBackend,
                  fmt::format("tensor '{}': unsupported data type {}", proto.name(), proto.data_type()));
  }
  if (t.numel() != count) throw Error(ErrorCode::kBackend, fmt::format("tensor '{}': size mismatch", proto.name()));
  return t;
}

detail::AttributeValue convert_attribute(const onnx::AttributeProto& a, const std::filesystem::path& base_dir) {
  using T = onnx::AttributeProto;
  switch (a.type()) {
    case T::FLOAT: return a.f();
    case T::INT: return a.i();
    case T::STRING: return a.s();
    case T::TENSOR: return convert_tensor(a.t(), base_dir);
    case T::FLOATS: return std::vector<float>(a.floats().begin(), a.floats().end());
    case T::INTS: return std::vector<std::int64_t>(a.ints().begin(), a.ints().end());
    case T::STRINGS: return std::vector<std::string>(a.strings().begin(), a.strings().end());
    default: return std::monostate{};
  }
}

class OnnxSession final : public GraphSession {
 public:
  OnnxSession(const onnx::ModelProto& model, std::string identity, const std::filesystem::path& base_dir,
              kernels::Exec exec)
      : identity_(std::move(identity)) {
    ctx_.exec = exec;
    ctx_.opset = 0;
    for (const auto& op : model.opset_import()) {
      if (op.domain().empty() || op.domain() == "ai.onnx") ctx_.opset = op.version();
    }
    if (ctx_.opset == 0) ctx_.opset = 17;
    if (!model.has_graph()) fail("model has no graph");
    const auto& g = model.graph();

    for (const auto& init : g.initializer()) constants_.emplace(init.name(), convert_tensor(init, base_dir));
    for (const auto& vi : g.input()) {
      if (!constants_.count(vi.name())) inputs_.push_back(vi.name());
    }
    for (const auto& vi : g.output()) outputs_.push_back(vi.name());
    for (const auto* list : {&g.input(), &g.output()}) {
      for (const auto& vi : *list) {
        Shape dims;
        if (vi.has_type() && vi.type().has_tensor_type() && vi.type().tensor_type().has_shape()) {
          for (const auto& d : vi.type().tensor_type().shape().dim()) {
            dims.push_back(d.has_dim_value() ? d.dim_value() : -1);
          }
        }
        declared_.emplace(vi.name(), std::move(dims));
      }
    }

    std::unordered_set<std::string> defined(inputs_.begin(), inputs_.end());
    for (const auto& [name, t] : constants_) defined.insert(name);

    for (const auto& np : g.node()) {
      Node node;
      node.name = np.name();
      node.op_type = np.op_type();
      node.inputs.assign(np.input().begin(), np.input().end());
      node.outputs.assign(np.output().begin(), np.output().end());
      for (const auto& a : np.attribute()) node.attributes.emplace(a.name(), convert_attribute(a, base_dir));
      if (!np.domain().empty() && np.domain() != "ai.onnx") {
        fail(fmt::format("operator domain '{}' is not supported ({})", np.domain(), node.label()));
      }
      for (const auto& input : node.inputs) {
        if (!input.empty() && !defined.count(input)) {
          fail(fmt::format("{} reads '{}' before it is produced", node.label(), input));
        }
      }
      for (const auto& out : node.outputs) defined.insert(out);

      if (node.op_type == "Constant") {
        constants_.emplace(node.outputs.at(0), constant_value(node));
        continue;
      }
      auto fn = detail::find_op(node.op_type);
      if (fn == nullptr) fail(fmt::format("unsupported operator {}", node.label()));
      nodes_.push_back(std::move(node));
      fns_.push_back(fn);
    }
    for (const auto& out : outputs_) {
      if (!defined.count(out)) fail(fmt::format("graph output '{}' is never produced", out));
    }

    // Last node index reading each intermediate value, so buffers can be freed early.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (const auto& input : nodes_[i].inputs) last_use_[input] = i;
    }
  }

  TensorMap run(const TensorMap& inputs) const override {
    std::unordered_map<std::string, Tensor> values;
    for (const auto& name : inputs_) {
      const auto it = inputs.find(name);
      if (it == inputs.end()) fail(fmt::format("missing graph input '{}'", name));
      values.emplace(name, it->second);
    }
    std::unordered_set<std::string> keep(outputs_.begin(), outputs_.end());

    std::vector<const Tensor*> args;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& node = nodes_[i];
      args.clear();
      for (const auto& name : node.inputs) {
        if (name.empty()) {
          args.push_back(nullptr);
          continue;
        }
        if (auto it = values.find(name); it != values.end()) {
          args.push_back(&it->second);
        } else if (auto ct = constants_.find(name); ct != constants_.end()) {
          args.push_back(&ct->second);
        } else {
          fail(fmt::format("{}: value '{}' is unavailable", node.label(), name));
        }
      }
      std::vector<Tensor> produced;
      try {
        produced = fns_[i](node, args, ctx_);
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", identity_, e.what()));
      }
      if (produced.size() < node.outputs.size()) {
        // Optional trailing outputs (e.g. LayerNormalization mean/inv-std) are not materialised.
        for (std::size_t o = produced.size(); o < node.outputs.size(); ++o) {
          if (!node.outputs[o].empty() && last_use_.count(node.outputs[o])) {
            fail(fmt::format("{}: optional output '{}' is consumed but not produced", node.label(), node.outputs[o]));
          }
        }
      }
      for (std::size_t o = 0; o < produced.size() && o < node.outputs.size(); ++o) {
        if (!node.outputs[o].empty()) values.insert_or_assign(node.outputs[o], std::move(produced[o]));
      }
      for (const auto& name : node.inputs) {
        if (keep.count(name)) continue;
        if (auto it = last_use_.find(name); it != last_use_.end() && it->second == i) values.erase(name);
      }
    }

    TensorMap result;
    for (const auto& name : outputs_) {
      if (auto it = values.find(name); it != values.end()) {
        result.emplace(name, std::move(it->second));
      } else {
        result.emplace(name, constants_.at(name));
      }
    }
    return result;
  }

  const std::string& identity() const override { return identity_; }
  std::vector<std::string> input_names() const override { return inputs_; }
  std::vector<std::string> output_names() const override { return outputs_; }
  Shape declared_shape(std::string_view name) const override {
    const auto it = declared_.find(std::string(name));
    return it == declared_.end() ? Shape{} : it->second;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kBackend, fmt::format("{}: {}", identity_, what));
  }

  Tensor constant_value(const Node& node) const {
    if (const Tensor* t = node.attr_tensor("value")) return *t;
    if (node.has("value_float")) return Tensor::f32({}, {node.attr_float("value_float", 0.0f)});
    if (node.has("value_int")) return Tensor::i64({}, {node.attr_int("value_int", 0)});
    if (node.has("value_floats")) {
      auto v = std::get<std::vector<float>>(node.attributes.at("value_floats"));
      const auto n = static_cast<std::int64_t>(v.size());
      return Tensor::f32({n}, std::move(v));
    }
    if (node.has("value_ints")) {
      auto v = node.attr_ints("value_ints");
      const auto n = static_cast<std::int64_t>(v.size());
      return Tensor::i64({n}, std::move(v));
    }
    fail(fmt::format("{} has no supported value attribute", node.label()));
  }

  std::string identity_;
  detail::OpContext ctx_;
  std::unordered_map<std::string, Tensor> constants_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::unordered_map<std::string, Shape> declared_;
  std::vector<Node> nodes_;
  std::vector<detail::OpFn> fns_;
  std::unordered_map<std::string, std::size_t> last_use_;
};

}  // namespace

std::unique_ptr<GraphSession> OnnxBackend::load(const std::filesystem::path& file) const {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, fmt::format("cannot open graph file '{}'", file.string()));
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_from_bytes(ss.str(), file.filename().string(), file.parent_path());
}

std::unique_ptr<GraphSession> OnnxBackend::load_from_bytes(std::string_view bytes, std::string identity,
                                                           const std::filesystem::path& base_dir) const {
  onnx::ModelProto model;
  google::protobuf::io::CodedInputStream stream(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                                static_cast<int>(bytes.size()));
  stream.SetTotalBytesLimit(INT_MAX);
  if (!model.ParseFromCodedStream(&stream) || !stream.ConsumedEntireMessage()) {
    throw Error(ErrorCode::kBackend, fmt::format("{}: not a valid ONNX model", identity));
  }
  return std::make_unique<OnnxSession>(model, std::move(identity), base_dir, exec_);
}

std::vector<std::string> supported_onnx_ops() { return detail::op_names(); }

}  // namespace medzs::runtime
