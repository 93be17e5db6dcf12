#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/nn.hpp"
#include "partnet/partition.hpp"

namespace partnet {

// Locale-independent decimal rendering, 9 significant digits (full float
// round-trip precision).
inline std::string format_float(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

// Per-layer magnitude statistics, split by mask side. A side with zero
// entries reports absent stats. Variance is the population variance of the
// raw signed weights.
struct LayerStats {
  std::string layer;
  std::size_t learned_count = 0;
  std::size_t fixed_count = 0;
  std::optional<double> learned_mean_abs, learned_var;
  std::optional<double> fixed_mean_abs, fixed_var;
};

namespace detail {

struct SideAccum {
  double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    sum_abs += std::abs(v);
    sum_sq += v * v;
    ++n;
  }
  std::optional<double> mean_abs() const {
    if (n == 0) return std::nullopt;
    return sum_abs / static_cast<double>(n);
  }
  std::optional<double> variance() const {
    if (n == 0) return std::nullopt;
    const double m = sum / static_cast<double>(n);
    return sum_sq / static_cast<double>(n) - m * m;
  }
};

}  // namespace detail

// Statistics over the conv-layer weight tensors only, computed separately
// for the learned and fixed sides of the mask.
inline std::vector<LayerStats> weight_stats(const Model& model, const MaskSet& masks) {
  std::vector<LayerStats> out;
  for (std::size_t i = 0; i < model.infos().size(); ++i) {
    const auto& info = model.infos()[i];
    if (info.role != ParamRole::kConvWeight) continue;
    const auto& mask = masks.at(info.name);
    const auto& data = model.params[i].data();
    detail::SideAccum learned, fixed;
    for (std::size_t j = 0; j < data.size(); ++j) {
      (mask[j] ? learned : fixed).add(data[j]);
    }
    LayerStats s;
    s.layer = info.name;
    s.learned_count = learned.n;
    s.fixed_count = fixed.n;
    s.learned_mean_abs = learned.mean_abs();
    s.learned_var = learned.variance();
    s.fixed_mean_abs = fixed.mean_abs();
    s.fixed_var = fixed.variance();
    out.push_back(std::move(s));
  }
  return out;
}

// Least-squares fit of accuracy ~ a * ln(fraction) + b.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // sum of squared residuals
  int points = 0;
};

inline FitResult fit_log_curve(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) {
    throw std::invalid_argument("fit_log_curve: need at least 2 points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [f, acc] : points) {
    if (f <= 0.0) throw std::invalid_argument("fit_log_curve: fraction must be > 0");
    const double x = std::log(f);
    sx += x;
    sy += acc;
    sxx += x * x;
    sxy += x * acc;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  FitResult r;
  r.points = static_cast<int>(points.size());
  if (std::abs(denom) < 1e-30) {
    // All x identical; slope undefined, report the mean as intercept.
    r.slope = 0.0;
    r.intercept = sy / n;
  } else {
    r.slope = (n * sxy - sx * sy) / denom;
    r.intercept = (sy - r.slope * sx) / n;
  }
  for (const auto& [f, acc] : points) {
    const double e = acc - (r.slope * std::log(f) + r.intercept);
    r.residual += e * e;
  }
  return r;
}

// ---------------------------------------------------------------------------
// CSV reports. runs.csv: one row per epoch; layers.csv: one row per conv
// layer. Column order is fixed and a header row is always present.
// ---------------------------------------------------------------------------

struct EpochRow {
  int epoch = 0;
  double train_loss = 0, train_acc = 0;
  double val_loss = 0, val_acc = 0;
  double wall_time_s = 0;  // zeroed in reference mode to keep output byte-stable
};

struct RunReport {
  std::string run_id;
  std::string partition_desc;
  std::size_t effective_params = 0;
  std::size_t total_params = 0;
  std::vector<EpochRow> epochs;
  std::vector<LayerStats> layers;
};

inline void write_runs_csv(const RunReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "run_id,partition,effective_params,total_params,epoch,"
       "train_loss,train_acc,val_loss,val_acc,wall_time_s\n";
  for (const auto& e : r.epochs) {
    f << r.run_id << ',' << r.partition_desc << ',' << r.effective_params << ','
      << r.total_params << ',' << e.epoch << ',' << format_float(e.train_loss)
      << ',' << format_float(e.train_acc) << ',' << format_float(e.val_loss) << ','
      << format_float(e.val_acc) << ',' << format_float(e.wall_time_s) << '\n';
  }
}

inline void write_layers_csv(const std::vector<LayerStats>& layers,
                             const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "layer,learned_count,fixed_count,learned_mean_abs,learned_var,"
       "fixed_mean_abs,fixed_var\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_float(*v) : std::string();
  };
  for (const auto& s : layers) {
    f << s.layer << ',' << s.learned_count << ',' << s.fixed_count << ','
      << cell(s.learned_mean_abs) << ',' << cell(s.learned_var) << ','
      << cell(s.fixed_mean_abs) << ',' << cell(s.fixed_var) << '\n';
  }
}

inline void write_report(const RunReport& r, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_runs_csv(r, out_dir + "/runs.csv");
  write_layers_csv(r.layers, out_dir + "/layers.csv");
}

}  // namespace partnet
