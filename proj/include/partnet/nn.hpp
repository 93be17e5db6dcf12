#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/ops.hpp"
#include "partnet/rng.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

enum class Family { kSimpleCnn, kWideResnet, kDensenetBc };

inline std::string family_str(Family f) {
  switch (f) {
    case Family::kSimpleCnn: return "simple-cnn";
    case Family::kWideResnet: return "wide-resnet";
    case Family::kDensenetBc: return "densenet-bc";
  }
  return "?";
}

inline Family family_from_str(const std::string& s) {
  if (s == "simple-cnn") return Family::kSimpleCnn;
  if (s == "wide-resnet") return Family::kWideResnet;
  if (s == "densenet-bc") return Family::kDensenetBc;
  throw std::invalid_argument("unknown architecture family: " + s);
}

struct ArchitectureSpec {
  Family family = Family::kSimpleCnn;
  int depth = 4;        // conv layer count for simple-cnn, total depth otherwise
  int width = 1;        // widen factor (WRN) or growth rate (densenet)
  int num_classes = 10;
  int in_channels = 3;
  int in_height = 32;
  int in_width = 32;
};

enum class ParamRole { kConvWeight, kConvBias, kFcWeight, kFcBias, kBnGamma, kBnBeta };

struct ParamInfo {
  std::string name;
  Shape shape;
  std::string block;  // one of conv1, block1, block2, block3, fc
  ParamRole role = ParamRole::kConvWeight;
  int fan_in = 1;

  bool is_bn() const {
    return role == ParamRole::kBnGamma || role == ParamRole::kBnBeta;
  }
  bool is_bias() const {
    return role == ParamRole::kConvBias || role == ParamRole::kFcBias;
  }
  std::size_t numel() const { return shape_numel(shape); }
};

// One step of the forward program. Parameters are referenced by index into
// the model's parameter list, operands by value id.
struct Instr {
  enum Kind { kConv, kBn, kRelu, kAdd, kConcat, kAvgPool, kGap, kFlatten, kLinear };
  Kind kind;
  int a = -1, b = -1;
  int w = -1, bias = -1, gamma = -1, beta = -1;
  int stride = 1, pad = 0, pool_k = 2;
  int bn_state = -1;
};

struct Graph {
  ArchitectureSpec spec;
  std::vector<ParamInfo> infos;
  std::vector<Instr> program;
  std::vector<int> bn_channels;
  int output_value = 0;
};

namespace detail {

class GraphBuilder {
 public:
  explicit GraphBuilder(const ArchitectureSpec& spec) { g_.spec = spec; }

  // Value id 0 is the input batch.
  int input() { return next_value_++; }

  int param(std::string name, Shape shape, std::string block, ParamRole role,
            int fan_in) {
    g_.infos.push_back({std::move(name), std::move(shape), std::move(block), role, fan_in});
    return static_cast<int>(g_.infos.size()) - 1;
  }

  int conv(int x, const std::string& name, const std::string& block, int cin,
           int cout, int k, int stride, int pad) {
    Instr in;
    in.kind = Instr::kConv;
    in.a = x;
    in.w = param(name + ".weight", {cout, cin, k, k}, block, ParamRole::kConvWeight,
                 cin * k * k);
    in.stride = stride;
    in.pad = pad;
    return emit(in);
  }

  int bn(int x, const std::string& name, const std::string& block, int channels) {
    Instr in;
    in.kind = Instr::kBn;
    in.a = x;
    in.gamma = param(name + ".gamma", {channels}, block, ParamRole::kBnGamma, 1);
    in.beta = param(name + ".beta", {channels}, block, ParamRole::kBnBeta, 1);
    in.bn_state = static_cast<int>(g_.bn_channels.size());
    g_.bn_channels.push_back(channels);
    return emit(in);
  }

  int relu(int x) { return emit({Instr::kRelu, x}); }
  int add(int x, int y) {
    Instr in;
    in.kind = Instr::kAdd;
    in.a = x;
    in.b = y;
    return emit(in);
  }
  int concat(int x, int y) {
    Instr in;
    in.kind = Instr::kConcat;
    in.a = x;
    in.b = y;
    return emit(in);
  }
  int avg_pool(int x, int k) {
    Instr in;
    in.kind = Instr::kAvgPool;
    in.a = x;
    in.pool_k = k;
    return emit(in);
  }
  int gap(int x) { return emit({Instr::kGap, x}); }
  int flatten(int x) { return emit({Instr::kFlatten, x}); }

  int fc(int x, const std::string& name, int din, int dout) {
    Instr in;
    in.kind = Instr::kLinear;
    in.a = x;
    in.w = param(name + ".weight", {dout, din}, "fc", ParamRole::kFcWeight, din);
    in.bias = param(name + ".bias", {dout}, "fc", ParamRole::kFcBias, din);
    return emit(in);
  }

  Graph finish(int output) {
    g_.output_value = output;
    return std::move(g_);
  }

 private:
  int emit(Instr in) {
    g_.program.push_back(in);
    return next_value_++;
  }

  Graph g_;
  int next_value_ = 0;
};

inline Graph build_simple_cnn(const ArchitectureSpec& spec) {
  if (spec.depth < 0) throw std::invalid_argument("simple-cnn: depth must be >= 0");
  GraphBuilder b(spec);
  int x = b.input();
  // Channel plan 16 -> 32 -> 64 -> 64 -> ... per design.
  int cin = spec.in_channels;
  for (int i = 0; i < spec.depth; ++i) {
    const int cout = i == 0 ? 16 : (i == 1 ? 32 : 64);
    std::string layer = "conv" + std::to_string(i + 1);
    std::string block;
    if (i == 0) {
      block = "conv1";
    } else {
      block = "block" + std::to_string(1 + ((i - 1) * 3) / (spec.depth - 1));
    }
    x = b.conv(x, layer, block, cin, cout, 3, 1, 1);
    x = b.bn(x, layer + ".bn", block, cout);
    x = b.relu(x);
    cin = cout;
  }
  if (spec.depth == 0) {
    // Degenerate case: logistic regression on the flattened input.
    x = b.flatten(x);
    x = b.fc(x, "fc", spec.in_channels * spec.in_height * spec.in_width,
             spec.num_classes);
  } else {
    x = b.gap(x);
    x = b.fc(x, "fc", cin, spec.num_classes);
  }
  return b.finish(x);
}

inline Graph build_wide_resnet(const ArchitectureSpec& spec) {
  if (spec.depth < 10 || (spec.depth - 4) % 6 != 0) {
    throw std::invalid_argument("wide-resnet: depth must satisfy (depth-4) % 6 == 0");
  }
  if (spec.width < 1) throw std::invalid_argument("wide-resnet: widen factor must be >= 1");
  const int n = (spec.depth - 4) / 6;
  const int widths[3] = {16 * spec.width, 32 * spec.width, 64 * spec.width};
  GraphBuilder b(spec);
  int x = b.input();
  x = b.conv(x, "conv1", "conv1", spec.in_channels, 16, 3, 1, 1);
  int cin = 16;
  // Pre-activation basic blocks; shortcut is a 1x1 conv exactly when the
  // shape changes, and gets no special partition status.
  for (int g = 0; g < 3; ++g) {
    const std::string block = "block" + std::to_string(g + 1);
    const int cout = widths[g];
    for (int u = 0; u < n; ++u) {
      const std::string unit = block + ".unit" + std::to_string(u + 1);
      const int stride = (g > 0 && u == 0) ? 2 : 1;
      int pre = b.relu(b.bn(x, unit + ".bn1", block, cin));
      int y = b.conv(pre, unit + ".conv1", block, cin, cout, 3, stride, 1);
      y = b.relu(b.bn(y, unit + ".bn2", block, cout));
      y = b.conv(y, unit + ".conv2", block, cout, cout, 3, 1, 1);
      int shortcut = (cin != cout || stride != 1)
                         ? b.conv(pre, unit + ".shortcut", block, cin, cout, 1, stride, 0)
                         : x;
      x = b.add(y, shortcut);
      cin = cout;
    }
  }
  x = b.relu(b.bn(x, "bn_final", "block3", cin));
  x = b.gap(x);
  x = b.fc(x, "fc", cin, spec.num_classes);
  return b.finish(x);
}

inline Graph build_densenet_bc(const ArchitectureSpec& spec) {
  if (spec.depth < 10 || (spec.depth - 4) % 6 != 0) {
    throw std::invalid_argument("densenet-bc: depth must satisfy (depth-4) % 6 == 0");
  }
  if (spec.width < 1) throw std::invalid_argument("densenet-bc: growth rate must be >= 1");
  const int layers_per_block = (spec.depth - 4) / 6;
  const int growth = spec.width;
  GraphBuilder b(spec);
  int x = b.input();
  int c = 2 * growth;
  x = b.conv(x, "conv1", "conv1", spec.in_channels, c, 3, 1, 1);
  for (int g = 0; g < 3; ++g) {
    const std::string block = "block" + std::to_string(g + 1);
    for (int u = 0; u < layers_per_block; ++u) {
      const std::string unit = block + ".unit" + std::to_string(u + 1);
      // Bottleneck: 1x1 to 4*growth, then 3x3 to growth, concatenated.
      int y = b.relu(b.bn(x, unit + ".bn1", block, c));
      y = b.conv(y, unit + ".conv1", block, c, 4 * growth, 1, 1, 0);
      y = b.relu(b.bn(y, unit + ".bn2", block, 4 * growth));
      y = b.conv(y, unit + ".conv2", block, 4 * growth, growth, 3, 1, 1);
      x = b.concat(x, y);
      c += growth;
    }
    if (g < 2) {
      // Transition with compression 0.5. The transition is labeled with the
      // preceding block for partition purposes.
      const std::string trans = "trans" + std::to_string(g + 1);
      const int cout = c / 2;
      int y = b.relu(b.bn(x, trans + ".bn", block, c));
      y = b.conv(y, trans + ".conv", block, c, cout, 1, 1, 0);
      x = b.avg_pool(y, 2);
      c = cout;
    }
  }
  x = b.relu(b.bn(x, "bn_final", "block3", c));
  x = b.gap(x);
  x = b.fc(x, "fc", c, spec.num_classes);
  return b.finish(x);
}

}  // namespace detail

inline Graph build_graph(const ArchitectureSpec& spec) {
  switch (spec.family) {
    case Family::kSimpleCnn: return detail::build_simple_cnn(spec);
    case Family::kWideResnet: return detail::build_wide_resnet(spec);
    case Family::kDensenetBc: return detail::build_densenet_bc(spec);
  }
  throw std::invalid_argument("unknown family");
}

// Parameter listing without instantiating any weights; supports the
// full-scale counting-only specs.
inline std::vector<ParamInfo> enumerate_params(const ArchitectureSpec& spec) {
  return build_graph(spec).infos;
}

inline std::size_t total_param_count(const ArchitectureSpec& spec) {
  std::size_t n = 0;
  for (const auto& info : enumerate_params(spec)) n += info.numel();
  return n;
}

class Model {
 public:
  Model() = default;

  Graph graph;
  std::vector<Tensor<float>> params;              // parallel to graph.infos
  std::vector<RunningStats<float>> bn_states;     // parallel to graph.bn_channels

  const ArchitectureSpec& spec() const { return graph.spec; }
  const std::vector<ParamInfo>& infos() const { return graph.infos; }

  int param_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }

  Tensor<float>& param(const std::string& name) { return params[param_index(name)]; }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.numel();
    return n;
  }

  void build_index() {
    index_.clear();
    for (std::size_t i = 0; i < graph.infos.size(); ++i) {
      if (!index_.emplace(graph.infos[i].name, static_cast<int>(i)).second) {
        throw std::logic_error("duplicate parameter name " + graph.infos[i].name);
      }
    }
  }

  Tensor<float> forward(const Tensor<float>& batch, Mode mode) {
    const auto& s = graph.spec;
    if (batch.rank() != 4 || batch.dim(1) != s.in_channels ||
        batch.dim(2) != s.in_height || batch.dim(3) != s.in_width) {
      throw std::invalid_argument("forward: batch shape " + shape_str(batch.shape()) +
                                  " does not match architecture input");
    }
    std::vector<Tensor<float>> values(graph.program.size() + 1);
    values[0] = batch;
    int vid = 1;
    for (const auto& in : graph.program) {
      switch (in.kind) {
        case Instr::kConv:
          values[vid] = conv2d(values[in.a], params[in.w], Tensor<float>{}, in.stride, in.pad);
          break;
        case Instr::kBn:
          values[vid] = batchnorm2d(values[in.a], params[in.gamma], params[in.beta],
                                    bn_states[in.bn_state], mode);
          break;
        case Instr::kRelu:
          values[vid] = relu(values[in.a]);
          break;
        case Instr::kAdd:
          values[vid] = add(values[in.a], values[in.b]);
          break;
        case Instr::kConcat:
          values[vid] = concat_channels(values[in.a], values[in.b]);
          break;
        case Instr::kAvgPool:
          values[vid] = avg_pool2d(values[in.a], in.pool_k);
          break;
        case Instr::kGap:
          values[vid] = global_avg_pool(values[in.a]);
          break;
        case Instr::kFlatten: {
          const auto& v = values[in.a];
          values[vid] = v.reshape({v.dim(0), static_cast<int>(v.numel()) / v.dim(0)});
          break;
        }
        case Instr::kLinear:
          values[vid] = linear(values[in.a], params[in.w], params[in.bias]);
          break;
      }
      ++vid;
    }
    return values[graph.output_value];
  }

 private:
  std::map<std::string, int> index_;
};

// Instantiate a model with all parameters initialized: kaiming-normal conv
// and fc weights, zero biases, gamma = 1, beta = 0. Initialization order is
// the enumeration order, so a seed pins every weight.
inline Model build_model(const ArchitectureSpec& spec, Rng& rng) {
  Model m;
  m.graph = build_graph(spec);
  m.params.reserve(m.graph.infos.size());
  for (const auto& info : m.graph.infos) {
    switch (info.role) {
      case ParamRole::kConvWeight:
      case ParamRole::kFcWeight:
        m.params.push_back(init_kaiming<float>(info.shape, info.fan_in, rng));
        break;
      case ParamRole::kBnGamma: {
        Tensor<float> t(info.shape);
        std::fill(t.data().begin(), t.data().end(), 1.0f);
        m.params.push_back(std::move(t));
        break;
      }
      default:
        m.params.emplace_back(info.shape);  // zeros
    }
    m.params.back().set_requires_grad(true);
  }
  for (int c : m.graph.bn_channels) m.bn_states.emplace_back(c);
  m.build_index();
  return m;
}

}  // namespace partnet
