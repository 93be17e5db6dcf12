// Experiment runner: config-driven training, parameter counting, cheap
// ensembles, gradient checks, and partition sweeps. All subcommands are
// deterministic per (config, seed) in reference mode.
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "partnet/partnet.hpp"

namespace {

using namespace partnet;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericFailure = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::int64_t> seed_override;
  bool reference = false;
};

RunConfig load_run_config(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.seed_override) cfg.seed = static_cast<std::uint64_t>(*args.seed_override);
  return cfg;
}

void write_config_echo(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir + "/config_echo.json");
  f << config_to_json(cfg).dump(2) << "\n";
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  write_config_echo(cfg, args.out_dir);
  RunResult result = run_training(cfg, "train-seed" + std::to_string(cfg.seed),
                                  args.reference);
  write_report(result.report, args.out_dir);
  save_checkpoint(args.out_dir + "/model.ckpt", result.model, result.masks);
  std::printf("final_top1_accuracy %s\n", format_float(result.final_val_accuracy).c_str());
  return kExitOk;
}

int cmd_count(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  auto [total, effective] =
      count_params(cfg.arch, cfg.partition, cfg.arch.num_classes);
  std::printf("architecture %s depth=%d width=%d classes=%d\n",
              family_str(cfg.arch.family).c_str(), cfg.arch.depth, cfg.arch.width,
              cfg.arch.num_classes);
  std::printf("partition %s\n", cfg.partition.descriptor().c_str());
  std::printf("total_params %zu\n", total);
  std::printf("effective_params %zu\n", effective);
  return kExitOk;
}

int cmd_ensemble(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  if (cfg.ensemble.seeds.empty()) {
    for (int i = 0; i < cfg.ensemble.size; ++i) {
      cfg.ensemble.seeds.push_back(cfg.seed * 1000 + i + 1);
    }
  }
  try {
    cfg.ensemble.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_config_echo(cfg, args.out_dir);
  cfg.optim.seed = cfg.seed;
  auto [train, test] = make_datasets(cfg.data, cfg.seed);
  ArchitectureSpec arch = cfg.arch;
  arch.num_classes = train.class_count;
  arch.in_channels = train.channels;
  arch.in_height = train.height;
  arch.in_width = train.width;
  Ensemble ens = train_ensemble(arch, train, cfg.ensemble, cfg.optim);
  EnsembleReport rep = ensemble_report(ens, test);

  std::filesystem::create_directories(args.out_dir);
  std::ofstream f(args.out_dir + "/ensemble.csv");
  f << "row,model_type,stored_params,mean_accuracy,ensemble_accuracy\n";
  f << "summary," << member_kind_str(cfg.ensemble.member_kind, cfg.ensemble.share_r)
    << ',' << rep.stored_params << ',' << format_float(rep.mean_member_accuracy)
    << ',' << format_float(rep.ensemble_accuracy) << '\n';
  for (std::size_t i = 0; i < rep.member_accuracies.size(); ++i) {
    f << "member" << i << ','
      << member_kind_str(cfg.ensemble.member_kind, cfg.ensemble.share_r) << ",,"
      << format_float(rep.member_accuracies[i]) << ",\n";
  }
  std::printf("stored_params %zu\n", rep.stored_params);
  std::printf("mean_member_accuracy %s\n", format_float(rep.mean_member_accuracy).c_str());
  std::printf("ensemble_accuracy %s\n", format_float(rep.ensemble_accuracy).c_str());
  return kExitOk;
}

int cmd_gradcheck() {
  constexpr double kThreshold = 1e-4;
  const auto results = gradcheck_suite();
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-24s max_rel_err %.3e %s\n", r.op.c_str(), r.max_rel_err,
                r.max_rel_err < kThreshold ? "ok" : "FAIL");
    if (r.max_rel_err >= kThreshold) {
      std::fprintf(stderr, "gradcheck failed for op %s\n", r.op.c_str());
      ok = false;
    }
  }
  return ok ? kExitOk : kExitCheckFailure;
}

struct SweepPoint {
  PartitionSpec partition;
  std::size_t effective = 0;
  double fraction_of_total = 0.0;  // for the log fit
  std::vector<double> accs;        // per seed
};

int cmd_sweep(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  write_config_echo(cfg, args.out_dir);

  std::vector<FixedMode> modes;
  switch (cfg.sweep.fixed_mode) {
    case SweepFixedMode::kRandom: modes = {FixedMode::kRandom}; break;
    case SweepFixedMode::kZero: modes = {FixedMode::kZero}; break;
    case SweepFixedMode::kBoth: modes = {FixedMode::kRandom, FixedMode::kZero}; break;
  }

  // Resolve the sweep axis into partition specs.
  std::vector<PartitionSpec> points;
  switch (cfg.sweep.axis) {
    case SweepAxis::kFractions:
      for (double p : cfg.sweep.fractions) {
        points.push_back(PartitionSpec::fractional(p, cfg.partition.dim_slice));
      }
      break;
    case SweepAxis::kIntegerKs:
      for (int k : cfg.sweep.ks) points.push_back(PartitionSpec::integer_k(k));
      break;
    case SweepAxis::kDimSlices: {
      if (cfg.sweep.fractions.empty()) {
        throw ConfigError("sweep.fractions required for a dim_slices sweep");
      }
      // Budget-matching: dim 1 sets the target effective count at each
      // fraction; other dims get the p that comes closest.
      for (double f : cfg.sweep.fractions) {
        const auto target =
            count_params(cfg.arch, PartitionSpec::fractional(f, 1), cfg.arch.num_classes)
                .second;
        for (int dim : cfg.sweep.dim_slices) {
          if (dim == 1) {
            points.push_back(PartitionSpec::fractional(f, 1));
            continue;
          }
          double best_p = f;
          std::size_t best_err = static_cast<std::size_t>(-1);
          for (int i = 1; i <= 1000; ++i) {
            const double p = i / 1000.0;
            const auto eff =
                count_params(cfg.arch, PartitionSpec::fractional(p, dim),
                             cfg.arch.num_classes)
                    .second;
            const std::size_t err = eff > target ? eff - target : target - eff;
            if (err < best_err) {
              best_err = err;
              best_p = p;
            }
          }
          points.push_back(PartitionSpec::fractional(best_p, dim));
        }
      }
      break;
    }
    case SweepAxis::kBlocks:
      for (const auto& b : cfg.sweep.blocks) {
        points.push_back(PartitionSpec::block_set({b}));
      }
      break;
    case SweepAxis::kNone:
      throw ConfigError("sweep.axis is required for the sweep subcommand");
  }
  if (points.empty()) throw ConfigError("sweep axis resolved to zero points");

  std::filesystem::create_directories(args.out_dir);
  std::ofstream f(args.out_dir + "/sweep.csv");
  f << "partition,fixed_mode,effective_params,total_params";
  for (std::size_t s = 0; s < cfg.sweep.seeds.size(); ++s) f << ",acc_seed" << s;
  f << ",mean_acc\n";

  for (FixedMode mode : modes) {
    std::vector<std::pair<double, double>> fit_points;
    for (const auto& base_point : points) {
      PartitionSpec part = base_point;
      part.fixed_mode = mode;
      std::size_t effective = 0, total = 0;
      double acc_sum = 0.0;
      std::vector<double> accs;
      for (std::uint64_t seed : cfg.sweep.seeds) {
        RunConfig run_cfg = cfg;
        run_cfg.partition = part;
        run_cfg.seed = seed;
        RunResult r = run_training(run_cfg,
                                   part.descriptor() + "/" + fixed_mode_str(mode) +
                                       "/seed" + std::to_string(seed),
                                   true);
        effective = r.report.effective_params;
        total = r.report.total_params;
        accs.push_back(r.final_val_accuracy);
        acc_sum += r.final_val_accuracy;
        std::fprintf(stderr, "sweep %s %s seed=%llu acc=%.4f\n",
                     part.descriptor().c_str(), fixed_mode_str(mode).c_str(),
                     static_cast<unsigned long long>(seed), r.final_val_accuracy);
      }
      const double mean = acc_sum / static_cast<double>(accs.size());
      f << part.descriptor() << ',' << fixed_mode_str(mode) << ',' << effective << ','
        << total;
      for (double a : accs) f << ',' << format_float(a);
      f << ',' << format_float(mean) << '\n';
      if (part.kind == PartitionKind::kFractional && total > 0) {
        fit_points.emplace_back(static_cast<double>(effective) / total, mean);
      }
    }
    if (fit_points.size() >= 2) {
      const FitResult fit = fit_log_curve(fit_points);
      f << "logfit(a=" << format_float(fit.slope) << ";b=" << format_float(fit.intercept)
        << ";residual=" << format_float(fit.residual) << ")," << fixed_mode_str(mode)
        << ",,,\n";
    }
  }
  std::printf("sweep complete: %zu points x %zu seeds x %zu modes\n", points.size(),
              cfg.sweep.seeds.size(), modes.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partnet: partial-learning experiments for convolutional networks"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", args.config_path, "config file (flat JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed_override, "seed override");
    sub->add_flag("--reference", args.reference,
                  "force the single-threaded deterministic reference mode");
  };

  auto* train = app.add_subcommand("train", "train one model per the config");
  add_common(train, true);
  auto* count = app.add_subcommand("count", "print total and effective parameter counts");
  add_common(count, true);
  auto* ensemble = app.add_subcommand("ensemble", "train a shared-backbone ensemble");
  add_common(ensemble, true);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all ops");
  add_common(gradcheck, false);
  auto* sweep = app.add_subcommand("sweep", "train across a partition sweep axis");
  add_common(sweep, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (count->parsed()) return cmd_count(args);
    if (ensemble->parsed()) return cmd_ensemble(args);
    if (gradcheck->parsed()) return cmd_gradcheck();
    if (sweep->parsed()) return cmd_sweep(args);
  } catch (const partnet::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const partnet::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailure;
  }
  return kExitOk;
}
