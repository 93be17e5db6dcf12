#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "partnet/ensemble.hpp"
#include "partnet/nn.hpp"
#include "partnet/optim.hpp"
#include "partnet/partition.hpp"

namespace partnet {

// Raised on malformed configuration; mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DataKind { kSynthetic, kCifar10 };

struct DataConfig {
  DataKind kind = DataKind::kSynthetic;
  std::string cifar10_dir;
  int classes = 10;
  int per_class = 32;       // training samples per class (synthetic)
  int test_per_class = 16;  // test samples per class (synthetic)
  int channels = 3, height = 16, width = 16;
  double noise_sigma = 0.25;
};

enum class SweepAxis { kNone, kFractions, kIntegerKs, kDimSlices, kBlocks };
enum class SweepFixedMode { kRandom, kZero, kBoth };

struct SweepConfig {
  SweepAxis axis = SweepAxis::kNone;
  std::vector<double> fractions;
  std::vector<int> ks;
  std::vector<int> dim_slices;
  std::vector<std::string> blocks;
  SweepFixedMode fixed_mode = SweepFixedMode::kRandom;
  std::vector<std::uint64_t> seeds = {1};
};

// Everything a run needs; parsed from a flat JSON object with dotted keys.
// Unknown keys are hard errors so partition typos cannot silently change an
// experiment.
struct RunConfig {
  ArchitectureSpec arch;
  PartitionSpec partition;
  OptimConfig optim;
  DataConfig data;
  EnsembleConfig ensemble;
  SweepConfig sweep;
  std::uint64_t seed = 1;
};

namespace detail {

inline double as_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key " + key + " must be a number");
  return v.get<double>();
}

inline int as_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key " + key + " must be an integer");
  return v.get<int>();
}

inline std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key " + key + " must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key " + key + " must be a boolean");
  return v.get<bool>();
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  bool schedule_set = false;
  for (const auto& [key, v] : j.items()) {
    using detail::as_bool;
    using detail::as_int;
    using detail::as_number;
    using detail::as_string;
    if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(as_int(v, key));
    } else if (key == "arch.family") {
      try {
        c.arch.family = family_from_str(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "arch.depth") {
      c.arch.depth = as_int(v, key);
    } else if (key == "arch.width") {
      c.arch.width = as_int(v, key);
    } else if (key == "arch.num_classes") {
      c.arch.num_classes = as_int(v, key);
    } else if (key == "arch.input_channels") {
      c.arch.in_channels = as_int(v, key);
    } else if (key == "arch.input_height") {
      c.arch.in_height = as_int(v, key);
    } else if (key == "arch.input_width") {
      c.arch.in_width = as_int(v, key);
    } else if (key == "partition.kind") {
      const std::string k = as_string(v, key);
      if (k == "full") c.partition.kind = PartitionKind::kFull;
      else if (k == "fractional") c.partition.kind = PartitionKind::kFractional;
      else if (k == "integer_k") c.partition.kind = PartitionKind::kIntegerK;
      else if (k == "blocks") c.partition.kind = PartitionKind::kBlocks;
      else if (k == "bn_only") c.partition.kind = PartitionKind::kBnOnly;
      else throw ConfigError("unknown partition.kind: " + k);
    } else if (key == "partition.p") {
      c.partition.p = as_number(v, key);
    } else if (key == "partition.dim_slice") {
      c.partition.dim_slice = as_int(v, key);
    } else if (key == "partition.k") {
      c.partition.k = as_int(v, key);
    } else if (key == "partition.blocks") {
      if (!v.is_array()) throw ConfigError("partition.blocks must be an array of strings");
      for (const auto& b : v) c.partition.blocks.insert(as_string(b, key));
    } else if (key == "partition.fixed_mode") {
      try {
        c.partition.fixed_mode = fixed_mode_from_str(as_string(v, key));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "optim.lr") {
      c.optim.lr = as_number(v, key);
    } else if (key == "optim.momentum") {
      c.optim.momentum = as_number(v, key);
    } else if (key == "optim.weight_decay") {
      c.optim.weight_decay = as_number(v, key);
    } else if (key == "optim.epochs") {
      c.optim.epochs = as_int(v, key);
    } else if (key == "optim.batch_size") {
      c.optim.batch_size = as_int(v, key);
    } else if (key == "optim.augment") {
      c.optim.augment = as_bool(v, key);
    } else if (key == "optim.schedule") {
      if (!v.is_array()) throw ConfigError("optim.schedule must be an array of [epoch, multiplier]");
      c.optim.schedule.clear();
      for (const auto& step : v) {
        if (!step.is_array() || step.size() != 2) {
          throw ConfigError("optim.schedule entries must be [epoch, multiplier]");
        }
        c.optim.schedule.emplace_back(step[0].get<int>(), step[1].get<double>());
      }
      schedule_set = true;
    } else if (key == "data.kind") {
      const std::string k = as_string(v, key);
      if (k == "synthetic") c.data.kind = DataKind::kSynthetic;
      else if (k == "cifar10") c.data.kind = DataKind::kCifar10;
      else throw ConfigError("unknown data.kind: " + k);
    } else if (key == "data.cifar10_dir") {
      c.data.cifar10_dir = as_string(v, key);
    } else if (key == "data.classes") {
      c.data.classes = as_int(v, key);
    } else if (key == "data.per_class") {
      c.data.per_class = as_int(v, key);
    } else if (key == "data.test_per_class") {
      c.data.test_per_class = as_int(v, key);
    } else if (key == "data.channels") {
      c.data.channels = as_int(v, key);
    } else if (key == "data.height") {
      c.data.height = as_int(v, key);
    } else if (key == "data.width") {
      c.data.width = as_int(v, key);
    } else if (key == "data.noise_sigma") {
      c.data.noise_sigma = as_number(v, key);
    } else if (key == "ensemble.size") {
      c.ensemble.size = as_int(v, key);
    } else if (key == "ensemble.member_kind") {
      const std::string k = as_string(v, key);
      if (k == "fc_only") c.ensemble.member_kind = MemberKind::kFcOnly;
      else if (k == "share_conv") c.ensemble.member_kind = MemberKind::kShareConv;
      else if (k == "full") c.ensemble.member_kind = MemberKind::kFull;
      else throw ConfigError("unknown ensemble.member_kind: " + k);
    } else if (key == "ensemble.share_r") {
      c.ensemble.share_r = as_number(v, key);
    } else if (key == "ensemble.base_epochs") {
      c.ensemble.base_epochs = as_int(v, key);
    } else if (key == "ensemble.member_epochs") {
      c.ensemble.member_epochs = as_int(v, key);
    } else if (key == "ensemble.seeds") {
      if (!v.is_array()) throw ConfigError("ensemble.seeds must be an array");
      c.ensemble.seeds.clear();
      for (const auto& s : v) c.ensemble.seeds.push_back(static_cast<std::uint64_t>(s.get<std::int64_t>()));
    } else if (key == "sweep.axis") {
      const std::string k = as_string(v, key);
      if (k == "fractions") c.sweep.axis = SweepAxis::kFractions;
      else if (k == "integer_ks") c.sweep.axis = SweepAxis::kIntegerKs;
      else if (k == "dim_slices") c.sweep.axis = SweepAxis::kDimSlices;
      else if (k == "blocks") c.sweep.axis = SweepAxis::kBlocks;
      else throw ConfigError("unknown sweep.axis: " + k);
    } else if (key == "sweep.fractions") {
      if (!v.is_array()) throw ConfigError("sweep.fractions must be an array");
      c.sweep.fractions.clear();
      for (const auto& s : v) c.sweep.fractions.push_back(s.get<double>());
    } else if (key == "sweep.ks") {
      if (!v.is_array()) throw ConfigError("sweep.ks must be an array");
      c.sweep.ks.clear();
      for (const auto& s : v) c.sweep.ks.push_back(s.get<int>());
    } else if (key == "sweep.dim_slices") {
      if (!v.is_array()) throw ConfigError("sweep.dim_slices must be an array");
      c.sweep.dim_slices.clear();
      for (const auto& s : v) c.sweep.dim_slices.push_back(s.get<int>());
    } else if (key == "sweep.blocks") {
      if (!v.is_array()) throw ConfigError("sweep.blocks must be an array");
      c.sweep.blocks.clear();
      for (const auto& s : v) c.sweep.blocks.push_back(s.get<std::string>());
    } else if (key == "sweep.fixed_mode") {
      const std::string k = as_string(v, key);
      if (k == "random") c.sweep.fixed_mode = SweepFixedMode::kRandom;
      else if (k == "zero") c.sweep.fixed_mode = SweepFixedMode::kZero;
      else if (k == "both") c.sweep.fixed_mode = SweepFixedMode::kBoth;
      else throw ConfigError("unknown sweep.fixed_mode: " + k);
    } else if (key == "sweep.seeds") {
      if (!v.is_array()) throw ConfigError("sweep.seeds must be an array");
      c.sweep.seeds.clear();
      for (const auto& s : v) c.sweep.seeds.push_back(static_cast<std::uint64_t>(s.get<std::int64_t>()));
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  if (!schedule_set) c.optim.schedule = default_schedule(c.optim.epochs);
  try {
    c.partition.validate();
    c.optim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

// Fully resolved config (all defaults filled in). Re-running from the echo
// reproduces the run.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["arch.family"] = family_str(c.arch.family);
  j["arch.depth"] = c.arch.depth;
  j["arch.width"] = c.arch.width;
  j["arch.num_classes"] = c.arch.num_classes;
  j["arch.input_channels"] = c.arch.in_channels;
  j["arch.input_height"] = c.arch.in_height;
  j["arch.input_width"] = c.arch.in_width;
  switch (c.partition.kind) {
    case PartitionKind::kFull: j["partition.kind"] = "full"; break;
    case PartitionKind::kFractional: j["partition.kind"] = "fractional"; break;
    case PartitionKind::kIntegerK: j["partition.kind"] = "integer_k"; break;
    case PartitionKind::kBlocks: j["partition.kind"] = "blocks"; break;
    case PartitionKind::kBnOnly: j["partition.kind"] = "bn_only"; break;
  }
  j["partition.p"] = c.partition.p;
  j["partition.dim_slice"] = c.partition.dim_slice;
  j["partition.k"] = c.partition.k;
  j["partition.blocks"] = std::vector<std::string>(c.partition.blocks.begin(),
                                                   c.partition.blocks.end());
  j["partition.fixed_mode"] = fixed_mode_str(c.partition.fixed_mode);
  j["optim.lr"] = c.optim.lr;
  j["optim.momentum"] = c.optim.momentum;
  j["optim.weight_decay"] = c.optim.weight_decay;
  j["optim.epochs"] = c.optim.epochs;
  j["optim.batch_size"] = c.optim.batch_size;
  j["optim.augment"] = c.optim.augment;
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& [e, m] : c.optim.schedule) sched.push_back({e, m});
  j["optim.schedule"] = sched;
  j["data.kind"] = c.data.kind == DataKind::kSynthetic ? "synthetic" : "cifar10";
  if (!c.data.cifar10_dir.empty()) j["data.cifar10_dir"] = c.data.cifar10_dir;
  j["data.classes"] = c.data.classes;
  j["data.per_class"] = c.data.per_class;
  j["data.test_per_class"] = c.data.test_per_class;
  j["data.channels"] = c.data.channels;
  j["data.height"] = c.data.height;
  j["data.width"] = c.data.width;
  j["data.noise_sigma"] = c.data.noise_sigma;
  if (!c.ensemble.seeds.empty()) {
    j["ensemble.size"] = c.ensemble.size;
    switch (c.ensemble.member_kind) {
      case MemberKind::kFcOnly: j["ensemble.member_kind"] = "fc_only"; break;
      case MemberKind::kShareConv: j["ensemble.member_kind"] = "share_conv"; break;
      case MemberKind::kFull: j["ensemble.member_kind"] = "full"; break;
    }
    j["ensemble.share_r"] = c.ensemble.share_r;
    j["ensemble.base_epochs"] = c.ensemble.base_epochs;
    j["ensemble.member_epochs"] = c.ensemble.member_epochs;
    j["ensemble.seeds"] = c.ensemble.seeds;
  }
  if (c.sweep.axis != SweepAxis::kNone) {
    switch (c.sweep.axis) {
      case SweepAxis::kFractions: j["sweep.axis"] = "fractions"; break;
      case SweepAxis::kIntegerKs: j["sweep.axis"] = "integer_ks"; break;
      case SweepAxis::kDimSlices: j["sweep.axis"] = "dim_slices"; break;
      case SweepAxis::kBlocks: j["sweep.axis"] = "blocks"; break;
      default: break;
    }
    if (!c.sweep.fractions.empty()) j["sweep.fractions"] = c.sweep.fractions;
    if (!c.sweep.ks.empty()) j["sweep.ks"] = c.sweep.ks;
    if (!c.sweep.dim_slices.empty()) j["sweep.dim_slices"] = c.sweep.dim_slices;
    if (!c.sweep.blocks.empty()) j["sweep.blocks"] = c.sweep.blocks;
    switch (c.sweep.fixed_mode) {
      case SweepFixedMode::kRandom: j["sweep.fixed_mode"] = "random"; break;
      case SweepFixedMode::kZero: j["sweep.fixed_mode"] = "zero"; break;
      case SweepFixedMode::kBoth: j["sweep.fixed_mode"] = "both"; break;
    }
    j["sweep.seeds"] = c.sweep.seeds;
  }
  return j;
}

}  // namespace partnet
