#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/optim.hpp"

namespace partnet {

enum class MemberKind { kFcOnly, kShareConv, kFull };

inline std::string member_kind_str(MemberKind k, double r = 0.0) {
  switch (k) {
    case MemberKind::kFcOnly: return "fc_only";
    case MemberKind::kShareConv: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "share_conv(%g)", r);
      return buf;
    }
    case MemberKind::kFull: return "full";
  }
  return "?";
}

struct EnsembleConfig {
  int size = 5;
  MemberKind member_kind = MemberKind::kShareConv;
  double share_r = 0.9;  // fraction of conv weights shared across members
  int base_epochs = 1;
  int member_epochs = 1;
  std::vector<std::uint64_t> seeds;  // one per member, distinct

  void validate() const {
    if (size < 2) throw std::invalid_argument("ensemble: size must be >= 2");
    if (member_kind == MemberKind::kShareConv && (share_r < 0.0 || share_r > 1.0)) {
      throw std::invalid_argument("ensemble: share R must be in [0,1]");
    }
    if (static_cast<int>(seeds.size()) != size) {
      throw std::invalid_argument("ensemble: need one seed per member");
    }
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (static_cast<int>(uniq.size()) != size) {
      throw std::invalid_argument("ensemble: member seeds must be distinct");
    }
    if (base_epochs < 0 || member_epochs < 1) {
      throw std::invalid_argument("ensemble: bad epoch counts");
    }
  }
};

// Mask of the per-member relearned subset: the fc layer for fc_only; fc plus
// the first floor((1-R)*O) filters of every conv layer for share_conv(R);
// everything for full. BN parameters stay shared except in full mode.
inline MaskSet member_mask(const std::vector<ParamInfo>& infos,
                           const EnsembleConfig& cfg) {
  MaskSet out;
  for (const auto& info : infos) {
    std::vector<std::uint8_t> mask(info.numel(), 0);
    const bool is_fc =
        info.role == ParamRole::kFcWeight || info.role == ParamRole::kFcBias;
    switch (cfg.member_kind) {
      case MemberKind::kFull:
        std::fill(mask.begin(), mask.end(), std::uint8_t{1});
        break;
      case MemberKind::kFcOnly:
        if (is_fc) std::fill(mask.begin(), mask.end(), std::uint8_t{1});
        break;
      case MemberKind::kShareConv: {
        if (is_fc) {
          std::fill(mask.begin(), mask.end(), std::uint8_t{1});
        } else if (info.role == ParamRole::kConvWeight ||
                   info.role == ParamRole::kConvBias) {
          const int o = info.shape[0];
          const int relearn = partnet::detail::fractional_count(1.0 - cfg.share_r, o);
          const std::size_t per_filter = info.numel() / static_cast<std::size_t>(o);
          std::fill(mask.begin(), mask.begin() + relearn * per_filter, std::uint8_t{1});
        }
        break;
      }
    }
    out.masks.emplace(info.name, std::move(mask));
  }
  return out;
}

// Shared backbone plus per-member overrides. A member's parameter set is the
// backbone overlaid with its delta; delta keys are exactly the parameters
// with at least one relearned entry.
struct Ensemble {
  Model backbone;
  MaskSet relearn_mask;
  EnsembleConfig cfg;

  struct Member {
    std::uint64_t seed = 0;
    std::map<std::string, std::vector<float>> delta;
    std::vector<RunningStats<float>> bn_states;
    double train_accuracy = 0.0;
  };
  std::vector<Member> members;

  // Learned-entry accounting: backbone size plus each member's relearned
  // element count. Counted from the masks, never estimated.
  std::size_t stored_params() const {
    std::size_t n = backbone.total_params();
    n += static_cast<std::size_t>(members.size()) * relearn_mask.learned_count();
    return n;
  }
};

// Materialize member i as a standalone model sharing nothing mutable with
// the ensemble.
inline Model materialize_member(const Ensemble& ens, int i) {
  Model m;
  m.graph = ens.backbone.graph;
  m.params.reserve(ens.backbone.params.size());
  for (std::size_t p = 0; p < ens.backbone.params.size(); ++p) {
    const auto& name = ens.backbone.infos()[p].name;
    auto it = ens.members[i].delta.find(name);
    const auto& src =
        it != ens.members[i].delta.end() ? it->second : ens.backbone.params[p].data();
    Tensor<float> t(ens.backbone.infos()[p].shape, src);
    t.set_requires_grad(true);
    m.params.push_back(std::move(t));
  }
  m.bn_states = ens.members[i].bn_states;
  m.build_index();
  return m;
}

// Train the shared base with a full partition, then each member from the
// base with its relearned subset reinitialized under a distinct seed and a
// distinct data order.
inline Ensemble train_ensemble(const ArchitectureSpec& arch, const Dataset& data,
                               const EnsembleConfig& cfg, const OptimConfig& optim_cfg) {
  cfg.validate();
  optim_cfg.validate();
  Ensemble ens;
  ens.cfg = cfg;

  Rng base_rng(optim_cfg.seed);
  ens.backbone = build_model(arch, base_rng);
  {
    const MaskSet full = build_masks(ens.backbone, PartitionSpec::full());
    OptimState state = OptimState::init(ens.backbone, full);
    for (int e = 0; e < cfg.base_epochs; ++e) {
      train_epoch(ens.backbone, data, full, state, optim_cfg, lr_at_epoch(optim_cfg, e),
                  base_rng);
    }
  }

  ens.relearn_mask = member_mask(ens.backbone.infos(), cfg);

  for (int i = 0; i < cfg.size; ++i) {
    Rng rng(cfg.seeds[i]);
    Model m;
    m.graph = ens.backbone.graph;
    m.params.reserve(ens.backbone.params.size());
    for (const auto& p : ens.backbone.params) {
      Tensor<float> t(p.shape(), p.data());
      t.set_requires_grad(true);
      m.params.push_back(std::move(t));
    }
    m.bn_states = ens.backbone.bn_states;
    m.build_index();

    // Reinitialize the relearned entries from scratch under the member seed.
    for (std::size_t p = 0; p < m.infos().size(); ++p) {
      const auto& info = m.infos()[p];
      const auto& mask = ens.relearn_mask.at(info.name);
      bool any = false;
      for (auto v : mask)
        if (v) { any = true; break; }
      if (!any) continue;
      Tensor<float> fresh;
      switch (info.role) {
        case ParamRole::kConvWeight:
        case ParamRole::kFcWeight:
          fresh = init_kaiming<float>(info.shape, info.fan_in, rng);
          break;
        case ParamRole::kBnGamma: {
          fresh = Tensor<float>(info.shape);
          std::fill(fresh.data().begin(), fresh.data().end(), 1.0f);
          break;
        }
        default:
          fresh = Tensor<float>(info.shape);  // zeros
      }
      auto& data_vec = m.params[p].data();
      for (std::size_t j = 0; j < data_vec.size(); ++j) {
        if (mask[j]) data_vec[j] = fresh.data()[j];
      }
    }

    OptimState state = OptimState::init(m, ens.relearn_mask);
    Ensemble::Member member;
    member.seed = cfg.seeds[i];
    for (int e = 0; e < cfg.member_epochs; ++e) {
      auto metrics = train_epoch(m, data, ens.relearn_mask, state, optim_cfg,
                                 lr_at_epoch(optim_cfg, e), rng);
      member.train_accuracy = metrics.accuracy;
    }
    for (std::size_t p = 0; p < m.infos().size(); ++p) {
      const auto& name = m.infos()[p].name;
      const auto& mask = ens.relearn_mask.at(name);
      bool any = false;
      for (auto v : mask)
        if (v) { any = true; break; }
      if (any) member.delta.emplace(name, m.params[p].data());
    }
    member.bn_states = m.bn_states;
    ens.members.push_back(std::move(member));
  }
  return ens;
}

// Arithmetic mean of the members' softmax outputs; rows sum to 1.
inline std::vector<float> predict_ensemble(const Ensemble& ens,
                                           const Tensor<float>& batch) {
  if (ens.members.empty()) throw std::invalid_argument("predict_ensemble: no members");
  std::vector<float> avg;
  for (int i = 0; i < static_cast<int>(ens.members.size()); ++i) {
    Model m = materialize_member(ens, i);
    Tensor<float> logits = m.forward(batch, Mode::kEval);
    std::vector<float> probs = softmax_rows(logits);
    if (avg.empty()) avg.assign(probs.size(), 0.0f);
    for (std::size_t j = 0; j < probs.size(); ++j) avg[j] += probs[j];
  }
  const float inv = 1.0f / static_cast<float>(ens.members.size());
  for (auto& v : avg) v *= inv;
  return avg;
}

struct EnsembleReport {
  double mean_member_accuracy = 0.0;
  double ensemble_accuracy = 0.0;
  std::size_t stored_params = 0;
  std::vector<double> member_accuracies;
};

inline EnsembleReport ensemble_report(const Ensemble& ens, const Dataset& test,
                                      int batch_size = 128) {
  EnsembleReport rep;
  rep.stored_params = ens.stored_params();
  for (int i = 0; i < static_cast<int>(ens.members.size()); ++i) {
    Model m = materialize_member(ens, i);
    rep.member_accuracies.push_back(evaluate(m, test, batch_size));
    rep.mean_member_accuracy += rep.member_accuracies.back();
  }
  rep.mean_member_accuracy /= static_cast<double>(ens.members.size());

  Rng unused(0);
  int correct = 0;
  for (const auto& idx : batch_indices(test.size(), batch_size, false, unused)) {
    const std::vector<float> probs = predict_ensemble(ens, test.batch(idx));
    const int c = test.class_count;
    const std::vector<int> labels = test.batch_labels(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (argmax_row(probs, static_cast<int>(i), c) == labels[i]) ++correct;
    }
  }
  rep.ensemble_accuracy = static_cast<double>(correct) / test.size();
  return rep;
}

}  // namespace partnet
