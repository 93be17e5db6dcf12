#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/nn.hpp"

namespace partnet {

enum class PartitionKind { kFull, kFractional, kIntegerK, kBlocks, kBnOnly };
enum class FixedMode { kRandom, kZero };

inline std::string fixed_mode_str(FixedMode m) {
  return m == FixedMode::kRandom ? "random" : "zero";
}

inline FixedMode fixed_mode_from_str(const std::string& s) {
  if (s == "random") return FixedMode::kRandom;
  if (s == "zero") return FixedMode::kZero;
  throw std::invalid_argument("unknown fixed_mode: " + s);
}

// Declarative split of the parameter set into learned and fixed weights.
struct PartitionSpec {
  PartitionKind kind = PartitionKind::kFull;
  double p = 1.0;                // fractional
  int dim_slice = 1;             // fractional: 1..4 axis of the filter tensor
  int k = 1;                     // integer_k
  std::set<std::string> blocks;  // blocks mode
  FixedMode fixed_mode = FixedMode::kRandom;

  static PartitionSpec full() { return {}; }
  static PartitionSpec fractional(double p, int dim_slice = 1,
                                  FixedMode mode = FixedMode::kRandom) {
    PartitionSpec s;
    s.kind = PartitionKind::kFractional;
    s.p = p;
    s.dim_slice = dim_slice;
    s.fixed_mode = mode;
    return s;
  }
  static PartitionSpec integer_k(int k, FixedMode mode = FixedMode::kRandom) {
    PartitionSpec s;
    s.kind = PartitionKind::kIntegerK;
    s.k = k;
    s.fixed_mode = mode;
    return s;
  }
  static PartitionSpec block_set(std::set<std::string> blocks,
                                 FixedMode mode = FixedMode::kRandom) {
    PartitionSpec s;
    s.kind = PartitionKind::kBlocks;
    s.blocks = std::move(blocks);
    s.fixed_mode = mode;
    return s;
  }
  static PartitionSpec bn_only(FixedMode mode = FixedMode::kRandom) {
    PartitionSpec s;
    s.kind = PartitionKind::kBnOnly;
    s.fixed_mode = mode;
    return s;
  }

  void validate() const {
    static const std::set<std::string> valid_blocks = {"conv1", "block1", "block2",
                                                       "block3", "fc"};
    switch (kind) {
      case PartitionKind::kFractional:
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("partition: p must be in [0,1]");
        if (dim_slice < 1 || dim_slice > 4) {
          throw std::invalid_argument("partition: dim_slice must be in {1,2,3,4}");
        }
        break;
      case PartitionKind::kIntegerK:
        if (k < 1) throw std::invalid_argument("partition: k must be >= 1");
        break;
      case PartitionKind::kBlocks:
        if (blocks.empty()) throw std::invalid_argument("partition: blocks set is empty");
        for (const auto& b : blocks) {
          if (!valid_blocks.count(b)) throw std::invalid_argument("partition: unknown block " + b);
        }
        break;
      default:
        break;
    }
  }

  std::string descriptor() const {
    switch (kind) {
      case PartitionKind::kFull: return "full";
      case PartitionKind::kFractional: {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "fractional(p=%g,dim=%d)", p, dim_slice);
        return buf;
      }
      case PartitionKind::kIntegerK: return "integer_k(" + std::to_string(k) + ")";
      case PartitionKind::kBlocks: {
        std::string s = "blocks{";
        bool first = true;
        for (const auto& b : blocks) {
          if (!first) s += "+";
          s += b;
          first = false;
        }
        return s + "}";
      }
      case PartitionKind::kBnOnly: return "bn_only";
    }
    return "?";
  }
};

namespace detail {

// Learned extent of one parameter tensor: either everything, nothing, or a
// prefix slice along a single axis. Subset choice is always the first
// entries along the chosen axis, never random.
struct Extent {
  enum Kind { kAll, kNone, kPrefix } kind = kAll;
  int axis = 0;
  int count = 0;
};

// floor(p * dim) with a tiny slack so exact multiples (0.7 * 10) are not
// truncated by binary rounding; 0.06 * 16 must still yield 0.
inline int fractional_count(double p, int dim) {
  return static_cast<int>(p * dim + 1e-9);
}

inline Extent learned_extent(const ParamInfo& info, const PartitionSpec& spec) {
  using E = Extent;
  switch (spec.kind) {
    case PartitionKind::kFull:
      return {E::kAll};
    case PartitionKind::kBnOnly:
      return {info.is_bn() ? E::kAll : E::kNone};
    case PartitionKind::kBlocks:
      // The selected blocks plus every BN parameter network-wide.
      return {info.is_bn() || spec.blocks.count(info.block) ? E::kAll : E::kNone};
    case PartitionKind::kIntegerK: {
      if (info.is_bn() || info.role == ParamRole::kFcWeight ||
          info.role == ParamRole::kFcBias) {
        return {E::kAll};
      }
      // First min(k, O) filters of each conv layer, with their biases.
      const int o = info.shape[0];
      return {E::kPrefix, 0, std::min(spec.k, o)};
    }
    case PartitionKind::kFractional: {
      if (info.is_bn() || info.role == ParamRole::kFcWeight ||
          info.role == ParamRole::kFcBias) {
        return {E::kAll};  // fc layers are kept intact; BN is always learned
      }
      if (info.role == ParamRole::kConvBias) {
        // Bias splits only along the first dimension.
        if (spec.dim_slice != 1) return {E::kAll};
        return {E::kPrefix, 0, fractional_count(spec.p, info.shape[0])};
      }
      const int axis = spec.dim_slice - 1;
      int count = fractional_count(spec.p, info.shape[axis]);
      if (spec.dim_slice >= 3) count = std::max(count, 1);  // min slice size 1
      return {E::kPrefix, axis, count};
    }
  }
  return {E::kAll};
}

inline std::size_t learned_count(const ParamInfo& info, const Extent& e) {
  switch (e.kind) {
    case Extent::kAll: return info.numel();
    case Extent::kNone: return 0;
    case Extent::kPrefix:
      return info.numel() / static_cast<std::size_t>(info.shape[e.axis]) *
             static_cast<std::size_t>(e.count);
  }
  return 0;
}

}  // namespace detail

// Resolved boolean learn-masks, one per parameter tensor. 1 = learned,
// 0 = fixed. Immutable after construction.
struct MaskSet {
  std::map<std::string, std::vector<std::uint8_t>> masks;

  const std::vector<std::uint8_t>& at(const std::string& name) const {
    auto it = masks.find(name);
    if (it == masks.end()) throw std::out_of_range("no mask for parameter " + name);
    return it->second;
  }

  std::size_t learned_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : masks)
      for (auto v : m) n += v;
    return n;
  }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : masks) n += m.size();
    return n;
  }
};

inline MaskSet build_masks(const std::vector<ParamInfo>& infos,
                           const PartitionSpec& spec) {
  spec.validate();
  MaskSet out;
  for (const auto& info : infos) {
    const auto e = detail::learned_extent(info, spec);
    std::vector<std::uint8_t> mask(info.numel());
    switch (e.kind) {
      case detail::Extent::kAll:
        std::fill(mask.begin(), mask.end(), std::uint8_t{1});
        break;
      case detail::Extent::kNone:
        break;
      case detail::Extent::kPrefix: {
        std::size_t stride = 1;
        for (std::size_t d = static_cast<std::size_t>(e.axis) + 1; d < info.shape.size(); ++d)
          stride *= static_cast<std::size_t>(info.shape[d]);
        const std::size_t dim = static_cast<std::size_t>(info.shape[e.axis]);
        for (std::size_t i = 0; i < mask.size(); ++i) {
          mask[i] = (i / stride) % dim < static_cast<std::size_t>(e.count) ? 1 : 0;
        }
        break;
      }
    }
    if (!out.masks.emplace(info.name, std::move(mask)).second) {
      throw std::logic_error("duplicate parameter name " + info.name);
    }
  }
  return out;
}

inline MaskSet build_masks(const Model& model, const PartitionSpec& spec) {
  return build_masks(model.infos(), spec);
}

// Enforce the fixed-weight regime on a freshly initialized model. In zero
// mode the fixed entries are overwritten with exact zeros; in random mode
// they keep their initialization. Frozen BN parameters sit at gamma = 1,
// beta = 0 in either mode. Running statistics are untouched.
inline void apply_fixed_mode(Model& model, const MaskSet& masks, FixedMode mode) {
  for (std::size_t i = 0; i < model.infos().size(); ++i) {
    const auto& info = model.infos()[i];
    const auto& mask = masks.at(info.name);
    auto& data = model.params[i].data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (mask[j]) continue;
      if (info.role == ParamRole::kBnGamma) {
        data[j] = 1.0f;
      } else if (info.role == ParamRole::kBnBeta) {
        data[j] = 0.0f;
      } else if (mode == FixedMode::kZero) {
        data[j] = 0.0f;
      }
    }
  }
}

// Effective-parameter accounting without instantiating any weights.
inline std::pair<std::size_t, std::size_t> count_params(ArchitectureSpec arch,
                                                        const PartitionSpec& partition,
                                                        int num_classes) {
  partition.validate();
  arch.num_classes = num_classes;
  std::size_t total = 0, effective = 0;
  for (const auto& info : enumerate_params(arch)) {
    total += info.numel();
    effective += detail::learned_count(info, detail::learned_extent(info, partition));
  }
  return {total, effective};
}

}  // namespace partnet
