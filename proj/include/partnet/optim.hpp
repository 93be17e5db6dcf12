#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/data.hpp"
#include "partnet/nn.hpp"
#include "partnet/partition.hpp"

namespace partnet {

// Raised when training hits non-finite numbers; mapped to exit code 3 by
// the CLI.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // (epoch, multiplier) steps; epochs strictly increasing. Defaults to x0.1
  // at 1/3 and 2/3 of the run when left empty and resolved via
  // default_schedule().
  std::vector<std::pair<int, double>> schedule;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool augment = false;

  void validate() const {
    if (lr <= 0) throw std::invalid_argument("optim: lr must be positive");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("optim: momentum must be in [0,1)");
    if (weight_decay < 0) throw std::invalid_argument("optim: weight_decay must be >= 0");
    if (epochs < 1) throw std::invalid_argument("optim: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("optim: batch_size must be >= 1");
    for (std::size_t i = 1; i < schedule.size(); ++i) {
      if (schedule[i].first <= schedule[i - 1].first) {
        throw std::invalid_argument("optim: schedule epochs must be strictly increasing");
      }
    }
  }
};

inline std::vector<std::pair<int, double>> default_schedule(int epochs) {
  std::vector<std::pair<int, double>> sched;
  for (int e : {epochs / 3, 2 * epochs / 3}) {
    // Skip milestones that collapse to the start of the run or onto each
    // other when the run is only a few epochs long.
    if (e > 0 && (sched.empty() || e > sched.back().first)) sched.emplace_back(e, 0.1);
  }
  return sched;
}

inline double lr_at_epoch(const OptimConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (const auto& [e, mult] : cfg.schedule) {
    if (epoch >= e && e > 0) lr *= mult;
  }
  return lr;
}

// Gradients keyed by parameter name, shapes matching the parameters.
using GradientSet = std::map<std::string, std::vector<float>>;

inline GradientSet collect_gradients(const Model& model) {
  GradientSet grads;
  for (std::size_t i = 0; i < model.infos().size(); ++i) {
    const auto& p = model.params[i];
    if (!p.requires_grad()) continue;
    std::vector<float> g = p.grad();
    if (g.empty()) g.assign(p.numel(), 0.0f);
    grads.emplace(model.infos()[i].name, std::move(g));
  }
  return grads;
}

// Momentum buffers, present only for parameters with at least one learned
// entry.
struct OptimState {
  std::map<std::string, std::vector<float>> velocity;

  static OptimState init(const Model& model, const MaskSet& masks) {
    OptimState s;
    for (const auto& info : model.infos()) {
      const auto& mask = masks.at(info.name);
      bool any = false;
      for (auto v : mask)
        if (v) { any = true; break; }
      if (any) s.velocity.emplace(info.name, std::vector<float>(mask.size(), 0.0f));
    }
    return s;
  }
};

// Masked momentum-SGD update: for learned entries g <- grad + wd*w,
// v <- mu*v + g, w <- w - lr*v. Fixed entries are bitwise untouched and
// their velocity stays zero; decay is masked along with the update.
inline void sgd_step(Model& model, const GradientSet& grads, const MaskSet& masks,
                     OptimState& state, const OptimConfig& cfg, double lr) {
  const float mu = static_cast<float>(cfg.momentum);
  const float wd = static_cast<float>(cfg.weight_decay);
  const float flr = static_cast<float>(lr);
  for (std::size_t i = 0; i < model.infos().size(); ++i) {
    const auto& name = model.infos()[i].name;
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    auto vit = state.velocity.find(name);
    if (vit == state.velocity.end()) continue;  // no learned entries
    const auto& mask = masks.at(name);
    const auto& g = git->second;
    auto& v = vit->second;
    auto& w = model.params[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!mask[j]) continue;
      if (!std::isfinite(g[j])) {
        throw NumericError("non-finite gradient in parameter " + name);
      }
      const float eff = g[j] + wd * w[j];
      v[j] = mu * v[j] + eff;
      w[j] -= flr * v[j];
    }
  }
}

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline int argmax_row(const std::vector<float>& data, int row, int cols) {
  int best = 0;
  for (int j = 1; j < cols; ++j) {
    if (data[static_cast<std::size_t>(row) * cols + j] >
        data[static_cast<std::size_t>(row) * cols + best]) {
      best = j;
    }
  }
  return best;
}

// One full shuffled pass over the dataset with masked SGD updates.
inline EpochMetrics train_epoch(Model& model, const Dataset& data,
                                const MaskSet& masks, OptimState& state,
                                const OptimConfig& cfg, double lr, Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  double loss_sum = 0.0;
  int correct = 0;
  for (const auto& idx : batch_indices(data.size(), cfg.batch_size, true, rng)) {
    Tensor<float> batch = data.batch(idx);
    if (cfg.augment) batch = augment(batch, rng);
    const std::vector<int> labels = data.batch_labels(idx);
    for (auto& p : model.params) p.zero_grad();
    Tensor<float> logits = model.forward(batch, Mode::kTrain);
    Tensor<float> loss = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(loss.item())) {
      throw NumericError("non-finite training loss");
    }
    backward(loss);
    sgd_step(model, collect_gradients(model), masks, state, cfg, lr);
    loss_sum += static_cast<double>(loss.item()) * idx.size();
    const int c = logits.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (argmax_row(logits.data(), static_cast<int>(i), c) == labels[i]) ++correct;
    }
  }
  return {loss_sum / data.size(), static_cast<double>(correct) / data.size()};
}

// Eval-mode top-1 accuracy over the full set.
inline double evaluate(Model& model, const Dataset& data, int batch_size = 128) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  Rng unused(0);
  int correct = 0;
  for (const auto& idx : batch_indices(data.size(), batch_size, false, unused)) {
    Tensor<float> logits = model.forward(data.batch(idx), Mode::kEval);
    const int c = logits.dim(1);
    const std::vector<int> labels = data.batch_labels(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (argmax_row(logits.data(), static_cast<int>(i), c) == labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / data.size();
}

// Mean eval-mode loss over the full set.
inline double evaluate_loss(Model& model, const Dataset& data, int batch_size = 128) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
  Rng unused(0);
  double loss_sum = 0.0;
  for (const auto& idx : batch_indices(data.size(), batch_size, false, unused)) {
    Tensor<float> logits = model.forward(data.batch(idx), Mode::kEval);
    Tensor<float> loss = softmax_cross_entropy(logits, data.batch_labels(idx));
    loss_sum += static_cast<double>(loss.item()) * idx.size();
  }
  return loss_sum / data.size();
}

}  // namespace partnet
