#pragma once

#include <string>
#include <vector>

#include "partnet/gradcheck.hpp"
#include "partnet/ops.hpp"
#include "partnet/rng.hpp"

namespace partnet {

struct GradCheckEntry {
  std::string op;
  double max_rel_err = 0.0;
};

namespace detail {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = scale * rng.normal();
  return Tensor<double>(shape, std::move(data));
}

inline std::vector<double> random_coeffs(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  return w;
}

}  // namespace detail

// Finite-difference check of every differentiable op, >= `probes` random
// probes each, double precision throughout. `conv_backward_scale` != 1
// corrupts the conv2d backward pass (negative-control fixture).
inline std::vector<GradCheckEntry> gradcheck_suite(std::uint64_t seed = 42,
                                                   int probes = 10,
                                                   double eps = 1e-4,
                                                   double conv_backward_scale = 1.0) {
  Rng rng(seed);
  std::vector<GradCheckEntry> results;

  auto run = [&](const std::string& name, auto make_case) {
    double worst = 0.0;
    for (int probe = 0; probe < probes; ++probe) {
      auto [fn, params] = make_case();
      worst = std::max(worst, grad_check(fn, params, eps));
    }
    results.push_back({name, worst});
  };

  using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
  using Case = std::pair<Fn, std::vector<Tensor<double>>>;

  run("conv2d", [&]() -> Case {
    const int n = 2, ci = 3, h = 5, w = 5, o = 4, k = 3;
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int pad = static_cast<int>(rng.uniform_int(2));
    const int hout = (h + 2 * pad - k) / stride + 1;
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * o * hout * hout, rng);
    std::vector<Tensor<double>> params = {
        detail::random_tensor({n, ci, h, w}, rng),
        detail::random_tensor({o, ci, k, k}, rng),
        detail::random_tensor({o}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      Tensor<double> y = conv2d(p[0], p[1], p[2], stride, pad);
      if (conv_backward_scale != 1.0) y = scale_backward(y, conv_backward_scale);
      return weighted_sum(y, coeffs);
    };
    return {fn, params};
  });

  run("batchnorm2d", [&]() -> Case {
    const int n = 3, c = 2, h = 4, w = 4;
    const bool train = rng.bernoulli(0.5);
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * c * h * w, rng);
    std::vector<Tensor<double>> params = {detail::random_tensor({n, c, h, w}, rng),
                                          detail::random_tensor({c}, rng),
                                          detail::random_tensor({c}, rng)};
    // Seed eval-mode stats with plausible values.
    auto stats = std::make_shared<RunningStats<double>>(c);
    for (int j = 0; j < c; ++j) {
      stats->mean[j] = rng.normal();
      stats->var[j] = 1.0 + rng.uniform();
    }
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      RunningStats<double> local = *stats;  // forward must not drift stats between calls
      Tensor<double> y = batchnorm2d(p[0], p[1], p[2], local,
                                     train ? Mode::kTrain : Mode::kEval);
      return weighted_sum(y, coeffs);
    };
    return {fn, params};
  });

  run("relu", [&]() -> Case {
    // Probe away from the kink: |x| >= 0.05.
    Shape shape{4, 7};
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) {
      const double x = rng.normal();
      v = x >= 0 ? x + 0.05 : x - 0.05;
    }
    auto coeffs = detail::random_coeffs(data.size(), rng);
    std::vector<Tensor<double>> params = {Tensor<double>(shape, std::move(data))};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(relu(p[0]), coeffs);
    };
    return {fn, params};
  });

  run("linear", [&]() -> Case {
    const int n = 3, d = 5, c = 4;
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * c, rng);
    std::vector<Tensor<double>> params = {detail::random_tensor({n, d}, rng),
                                          detail::random_tensor({c, d}, rng),
                                          detail::random_tensor({c}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(linear(p[0], p[1], p[2]), coeffs);
    };
    return {fn, params};
  });

  run("global_avg_pool", [&]() -> Case {
    const int n = 2, c = 3, h = 4, w = 5;
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * c, rng);
    std::vector<Tensor<double>> params = {detail::random_tensor({n, c, h, w}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(global_avg_pool(p[0]), coeffs);
    };
    return {fn, params};
  });

  run("avg_pool2d", [&]() -> Case {
    const int n = 2, c = 2, h = 6, w = 6;
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * c * 9, rng);
    std::vector<Tensor<double>> params = {detail::random_tensor({n, c, h, w}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(avg_pool2d(p[0], 2), coeffs);
    };
    return {fn, params};
  });

  run("add", [&]() -> Case {
    Shape shape{3, 4};
    auto coeffs = detail::random_coeffs(shape_numel(shape), rng);
    std::vector<Tensor<double>> params = {detail::random_tensor(shape, rng),
                                          detail::random_tensor(shape, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(add(p[0], p[1]), coeffs);
    };
    return {fn, params};
  });

  run("concat_channels", [&]() -> Case {
    const int n = 2, h = 3, w = 3;
    auto coeffs = detail::random_coeffs(static_cast<std::size_t>(n) * 5 * h * w, rng);
    std::vector<Tensor<double>> params = {detail::random_tensor({n, 2, h, w}, rng),
                                          detail::random_tensor({n, 3, h, w}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return weighted_sum(concat_channels(p[0], p[1]), coeffs);
    };
    return {fn, params};
  });

  run("softmax_cross_entropy", [&]() -> Case {
    const int n = 4, c = 5;
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(c));
    std::vector<Tensor<double>> params = {detail::random_tensor({n, c}, rng, 2.0)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      return softmax_cross_entropy(p[0], labels);
    };
    return {fn, params};
  });

  // Composite: conv + relu + global pool + linear + cross-entropy, gradients
  // through the whole chain.
  run("composite", [&]() -> Case {
    const int n = 4, ci = 3, h = 5, w = 5, o = 4, k = 3, classes = 3;
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(classes));
    std::vector<Tensor<double>> params = {
        detail::random_tensor({n, ci, h, w}, rng),
        detail::random_tensor({o, ci, k, k}, rng),
        detail::random_tensor({o}, rng),
        detail::random_tensor({classes, o}, rng),
        detail::random_tensor({classes}, rng)};
    Fn fn = [=](const std::vector<Tensor<double>>& p) {
      Tensor<double> y = conv2d(p[0], p[1], p[2], 1, 1);
      y = relu(y);
      Tensor<double> feat = global_avg_pool(y);
      return softmax_cross_entropy(linear(feat, p[3], p[4]), labels);
    };
    return {fn, params};
  });

  return results;
}

}  // namespace partnet
