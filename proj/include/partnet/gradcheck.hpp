#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "partnet/tensor.hpp"

namespace partnet {

// Central-difference gradient oracle. `fn` must rebuild its computation from
// the given leaf tensors on every call; runs in double precision only.
inline double grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>>& params, double eps = 1e-4) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor<double> loss = fn(params);
  if (!std::isfinite(loss.item())) {
    throw std::runtime_error("grad_check: non-finite loss");
  }
  backward(loss);

  double max_rel = 0.0;
  for (auto& p : params) {
    p.impl()->ensure_grad();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double analytic = p.grad()[i];
      const double orig = p.data()[i];
      p.data()[i] = orig + eps;
      const double fp = fn(params).item();
      p.data()[i] = orig - eps;
      const double fm = fn(params).item();
      p.data()[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("grad_check: non-finite perturbed loss");
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace partnet
