#pragma once

#include <chrono>
#include <string>
#include <utility>

#include "partnet/analysis.hpp"
#include "partnet/config.hpp"
#include "partnet/data.hpp"
#include "partnet/ensemble.hpp"
#include "partnet/optim.hpp"
#include "partnet/partition.hpp"

namespace partnet {

// Dataset seed is derived from the run seed so model initialization and data
// generation have independent streams.
inline std::uint64_t data_seed(std::uint64_t run_seed) {
  return run_seed ^ 0x9e3779b97f4a7c15ULL;
}

inline std::pair<Dataset, Dataset> make_datasets(const DataConfig& cfg,
                                                 std::uint64_t run_seed) {
  if (cfg.kind == DataKind::kCifar10) {
    return load_cifar10(cfg.cifar10_dir);
  }
  Rng rng(data_seed(run_seed));
  return synth_train_test(cfg.classes, cfg.per_class, cfg.test_per_class,
                          cfg.channels, cfg.height, cfg.width, cfg.noise_sigma, rng);
}

struct RunResult {
  RunReport report;
  Model model;
  MaskSet masks;
  double final_val_accuracy = 0.0;
};

// One full training run: build, partition, train, evaluate per epoch.
// Deterministic per (config, seed); wall time is recorded only when
// `reference` is false so reference-mode CSV output is byte-stable.
inline RunResult run_training(const RunConfig& cfg, const Dataset& train,
                              const Dataset& test, const std::string& run_id,
                              bool reference = true) {
  cfg.partition.validate();
  cfg.optim.validate();
  ArchitectureSpec arch = cfg.arch;
  arch.num_classes = train.class_count;
  arch.in_channels = train.channels;
  arch.in_height = train.height;
  arch.in_width = train.width;

  RunResult out;
  Rng rng(cfg.seed);
  out.model = build_model(arch, rng);
  out.masks = build_masks(out.model, cfg.partition);
  apply_fixed_mode(out.model, out.masks, cfg.partition.fixed_mode);

  out.report.run_id = run_id;
  out.report.partition_desc = cfg.partition.descriptor() + "/" +
                              fixed_mode_str(cfg.partition.fixed_mode);
  out.report.total_params = out.model.total_params();
  out.report.effective_params = out.masks.learned_count();

  OptimState state = OptimState::init(out.model, out.masks);
  for (int e = 0; e < cfg.optim.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochMetrics m = train_epoch(out.model, train, out.masks, state, cfg.optim,
                                 lr_at_epoch(cfg.optim, e), rng);
    EpochRow row;
    row.epoch = e;
    row.train_loss = m.loss;
    row.train_acc = m.accuracy;
    row.val_acc = evaluate(out.model, test);
    row.val_loss = evaluate_loss(out.model, test);
    if (!reference) {
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    out.report.epochs.push_back(row);
    out.final_val_accuracy = row.val_acc;
  }
  out.report.layers = weight_stats(out.model, out.masks);
  return out;
}

inline RunResult run_training(const RunConfig& cfg, const std::string& run_id,
                              bool reference = true) {
  auto [train, test] = make_datasets(cfg.data, cfg.seed);
  return run_training(cfg, train, test, run_id, reference);
}

}  // namespace partnet
