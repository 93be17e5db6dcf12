#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "partnet/tensor.hpp"

namespace partnet {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::make_result(
      a.shape(), std::move(out), {a.impl(), b.impl()}, [](TensorImpl<T>& self) {
        for (auto& p : self.parents) {
          p->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  // Subgradient at 0 is 0: backward gates on the output being positive.
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x.impl()}, [](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          if (self.value[i] > T(0)) p.grad[i] += self.grad[i];
      });
}

// Affine map: input (N,D) x weights (C,D)^T + bias (C) -> (N,C).
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weights,
                 const Tensor<T>& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1) {
    throw std::invalid_argument("linear: expected input (N,D), weights (C,D), bias (C)");
  }
  const int n = input.dim(0), d = input.dim(1);
  const int c = weights.dim(0);
  if (weights.dim(1) != d || bias.dim(0) != c) {
    throw std::invalid_argument("linear: shape mismatch " + shape_str(input.shape()) +
                                " x " + shape_str(weights.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    const T* xi = input.data().data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < c; ++j) {
      const T* wj = weights.data().data() + static_cast<std::size_t>(j) * d;
      T acc = bias.data()[j];
      for (int k = 0; k < d; ++k) acc += xi[k] * wj[k];
      out[static_cast<std::size_t>(i) * c + j] = acc;
    }
  }
  return Tensor<T>::make_result(
      Shape{n, c}, std::move(out), {input.impl(), weights.impl(), bias.impl()},
      [n, d, c](TensorImpl<T>& self) {
        auto& xi = *self.parents[0];
        auto& wi = *self.parents[1];
        auto& bi = *self.parents[2];
        xi.ensure_grad();
        wi.ensure_grad();
        bi.ensure_grad();
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < c; ++j) {
            const T g = self.grad[static_cast<std::size_t>(i) * c + j];
            if (g == T(0)) continue;
            bi.grad[j] += g;
            const T* x = xi.value.data() + static_cast<std::size_t>(i) * d;
            const T* w = wi.value.data() + static_cast<std::size_t>(j) * d;
            T* gx = xi.grad.data() + static_cast<std::size_t>(i) * d;
            T* gw = wi.grad.data() + static_cast<std::size_t>(j) * d;
            for (int k = 0; k < d; ++k) {
              gx[k] += g * w[k];
              gw[k] += g * x[k];
            }
          }
        }
      });
}

namespace detail {

// Patch matrix layout: (C*k*k) rows x (Hout*Wout) columns, row-major.
template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, int stride, int pad,
            int hout, int wout, T* col) {
  const int cols = hout * wout;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * cols;
        for (int oh = 0; oh < hout; ++oh) {
          const int ih = oh * stride - pad + ki;
          for (int ow = 0; ow < wout; ++ow) {
            const int iw = ow * stride - pad + kj;
            row[oh * wout + ow] =
                (ih >= 0 && ih < h && iw >= 0 && iw < w)
                    ? img[(static_cast<std::size_t>(c) * h + ih) * w + iw]
                    : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accum(const T* col, int channels, int h, int w, int k, int stride,
                  int pad, int hout, int wout, T* img) {
  const int cols = hout * wout;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * cols;
        for (int oh = 0; oh < hout; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          for (int ow = 0; ow < wout; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= w) continue;
            img[(static_cast<std::size_t>(c) * h + ih) * w + iw] += row[oh * wout + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D cross-correlation. input (N,I,H,W), filters (O,I,k,k), optional bias (O)
// (pass an undefined tensor for bias-free layers). Realized as im2col times
// the flattened filter matrix.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& filters,
                 const Tensor<T>& bias, int stride, int pad) {
  if (input.rank() != 4 || filters.rank() != 4) {
    throw std::invalid_argument("conv2d: input and filters must be 4-D");
  }
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
  const int n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int o = filters.dim(0), k = filters.dim(2);
  if (filters.dim(1) != ci) {
    throw std::invalid_argument("conv2d: channel mismatch, input has " +
                                std::to_string(ci) + " filters expect " +
                                std::to_string(filters.dim(1)));
  }
  if (filters.dim(3) != k) throw std::invalid_argument("conv2d: non-square kernel");
  if (h + 2 * pad < k || w + 2 * pad < k) {
    throw std::invalid_argument("conv2d: spatial dims smaller than kernel");
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != o)) {
    throw std::invalid_argument("conv2d: bias shape mismatch");
  }
  const int hout = (h + 2 * pad - k) / stride + 1;
  const int wout = (w + 2 * pad - k) / stride + 1;
  const int ckk = ci * k * k;
  const int cols = hout * wout;

  std::vector<T> out(static_cast<std::size_t>(n) * o * cols, T(0));
  std::vector<T> col(static_cast<std::size_t>(ckk) * cols);
  for (int b = 0; b < n; ++b) {
    const T* img = input.data().data() + static_cast<std::size_t>(b) * ci * h * w;
    detail::im2col(img, ci, h, w, k, stride, pad, hout, wout, col.data());
    T* dst = out.data() + static_cast<std::size_t>(b) * o * cols;
    for (int f = 0; f < o; ++f) {
      const T* wf = filters.data().data() + static_cast<std::size_t>(f) * ckk;
      T* of = dst + static_cast<std::size_t>(f) * cols;
      if (has_bias) {
        const T bv = bias.data()[f];
        for (int j = 0; j < cols; ++j) of[j] = bv;
      }
      for (int r = 0; r < ckk; ++r) {
        const T wv = wf[r];
        if (wv == T(0)) continue;
        const T* cr = col.data() + static_cast<std::size_t>(r) * cols;
        for (int j = 0; j < cols; ++j) of[j] += wv * cr[j];
      }
    }
  }

  std::vector<std::shared_ptr<TensorImpl<T>>> parents = {input.impl(), filters.impl()};
  if (has_bias) parents.push_back(bias.impl());
  return Tensor<T>::make_result(
      Shape{n, o, hout, wout}, std::move(out), std::move(parents),
      [n, ci, h, w, o, k, stride, pad, hout, wout, has_bias](TensorImpl<T>& self) {
        auto& xi = *self.parents[0];
        auto& wi = *self.parents[1];
        xi.ensure_grad();
        wi.ensure_grad();
        TensorImpl<T>* bi = nullptr;
        if (has_bias) {
          bi = self.parents[2].get();
          bi->ensure_grad();
        }
        const int ckk = ci * k * k;
        const int cols = hout * wout;
        std::vector<T> col(static_cast<std::size_t>(ckk) * cols);
        std::vector<T> dcol(static_cast<std::size_t>(ckk) * cols);
        for (int b = 0; b < n; ++b) {
          const T* img = xi.value.data() + static_cast<std::size_t>(b) * ci * h * w;
          detail::im2col(img, ci, h, w, k, stride, pad, hout, wout, col.data());
          const T* gout = self.grad.data() + static_cast<std::size_t>(b) * o * cols;
          std::fill(dcol.begin(), dcol.end(), T(0));
          for (int f = 0; f < o; ++f) {
            const T* gf = gout + static_cast<std::size_t>(f) * cols;
            if (bi) {
              T acc = T(0);
              for (int j = 0; j < cols; ++j) acc += gf[j];
              bi->grad[f] += acc;
            }
            const T* wf = wi.value.data() + static_cast<std::size_t>(f) * ckk;
            T* gw = wi.grad.data() + static_cast<std::size_t>(f) * ckk;
            for (int r = 0; r < ckk; ++r) {
              const T* cr = col.data() + static_cast<std::size_t>(r) * cols;
              T* dr = dcol.data() + static_cast<std::size_t>(r) * cols;
              T acc = T(0);
              const T wv = wf[r];
              for (int j = 0; j < cols; ++j) {
                acc += gf[j] * cr[j];
                dr[j] += wv * gf[j];
              }
              gw[r] += acc;
            }
          }
          T* gimg = xi.grad.data() + static_cast<std::size_t>(b) * ci * h * w;
          detail::col2im_accum(dcol.data(), ci, h, w, k, stride, pad, hout, wout, gimg);
        }
      });
}

// Per-channel running estimates of a batchnorm layer. Updated on every
// train-mode pass, never part of the learned parameter set.
template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  explicit RunningStats(int channels = 0)
      : mean(static_cast<std::size_t>(channels), T(0)),
        var(static_cast<std::size_t>(channels), T(1)) {}
};

enum class Mode { kTrain, kEval };

// Spatial batch normalization over (N,C,H,W). Train mode normalizes by batch
// statistics (population variance) and updates the running estimates by EMA;
// eval mode normalizes by the running estimates.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, RunningStats<T>& stats, Mode mode,
                      T eps = T(1e-5), T momentum = T(0.1)) {
  if (input.rank() != 4) throw std::invalid_argument("batchnorm2d: input must be 4-D");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (gamma.numel() != static_cast<std::size_t>(c) ||
      beta.numel() != static_cast<std::size_t>(c) ||
      stats.mean.size() != static_cast<std::size_t>(c)) {
    throw std::invalid_argument("batchnorm2d: channel count mismatch");
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t per_channel = static_cast<std::size_t>(n) * plane;

  std::vector<T> mean(c), invstd(c);
  if (mode == Mode::kTrain) {
    for (int j = 0; j < c; ++j) {
      T m = T(0);
      for (int b = 0; b < n; ++b) {
        const T* p = input.data().data() + (static_cast<std::size_t>(b) * c + j) * plane;
        for (std::size_t i = 0; i < plane; ++i) m += p[i];
      }
      m /= static_cast<T>(per_channel);
      T v = T(0);
      for (int b = 0; b < n; ++b) {
        const T* p = input.data().data() + (static_cast<std::size_t>(b) * c + j) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = p[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<T>(per_channel);
      mean[j] = m;
      invstd[j] = T(1) / std::sqrt(v + eps);
      stats.mean[j] = (T(1) - momentum) * stats.mean[j] + momentum * m;
      stats.var[j] = (T(1) - momentum) * stats.var[j] + momentum * v;
    }
  } else {
    for (int j = 0; j < c; ++j) {
      mean[j] = stats.mean[j];
      invstd[j] = T(1) / std::sqrt(stats.var[j] + eps);
    }
  }

  std::vector<T> out(input.numel());
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < c; ++j) {
      const T* p = input.data().data() + (static_cast<std::size_t>(b) * c + j) * plane;
      T* q = out.data() + (static_cast<std::size_t>(b) * c + j) * plane;
      const T g = gamma.data()[j], bt = beta.data()[j];
      for (std::size_t i = 0; i < plane; ++i)
        q[i] = (p[i] - mean[j]) * invstd[j] * g + bt;
    }
  }

  const bool train = mode == Mode::kTrain;
  return Tensor<T>::make_result(
      input.shape(), std::move(out),
      {input.impl(), gamma.impl(), beta.impl()},
      [n, c, plane, per_channel, mean, invstd, train](TensorImpl<T>& self) {
        auto& xi = *self.parents[0];
        auto& gi = *self.parents[1];
        auto& bi = *self.parents[2];
        xi.ensure_grad();
        gi.ensure_grad();
        bi.ensure_grad();
        for (int j = 0; j < c; ++j) {
          const T g = gi.value[j];
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + j) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T dy = self.grad[off + i];
              const T xhat = (xi.value[off + i] - mean[j]) * invstd[j];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat;
            }
          }
          gi.grad[j] += sum_dy_xhat;
          bi.grad[j] += sum_dy;
          const T m = static_cast<T>(per_channel);
          for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + j) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T dy = self.grad[off + i];
              if (train) {
                const T xhat = (xi.value[off + i] - mean[j]) * invstd[j];
                xi.grad[off + i] +=
                    g * invstd[j] / m * (m * dy - sum_dy - xhat * sum_dy_xhat);
              } else {
                xi.grad[off + i] += g * invstd[j] * dy;
              }
            }
          }
        }
      });
}

// Per-channel spatial mean: (N,C,H,W) -> (N,C).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  if (input.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be 4-D");
  const int n = input.dim(0), c = input.dim(1);
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  std::vector<T> out(static_cast<std::size_t>(n) * c);
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    const T* p = input.data().data() + nc * plane;
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[nc] = acc / static_cast<T>(plane);
  }
  return Tensor<T>::make_result(
      Shape{n, c}, std::move(out), {input.impl()}, [plane](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
          const T g = self.grad[nc] / static_cast<T>(plane);
          T* gp = p.grad.data() + nc * plane;
          for (std::size_t i = 0; i < plane; ++i) gp[i] += g;
        }
      });
}

// Non-overlapping average pooling with kernel == stride (floor on remainder).
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int k) {
  if (input.rank() != 4) throw std::invalid_argument("avg_pool2d: input must be 4-D");
  if (k < 1) throw std::invalid_argument("avg_pool2d: kernel must be >= 1");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int hout = h / k, wout = w / k;
  if (hout < 1 || wout < 1) throw std::invalid_argument("avg_pool2d: input too small");
  std::vector<T> out(static_cast<std::size_t>(n) * c * hout * wout);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int nc = 0; nc < n * c; ++nc) {
    const T* p = input.data().data() + static_cast<std::size_t>(nc) * h * w;
    T* q = out.data() + static_cast<std::size_t>(nc) * hout * wout;
    for (int oh = 0; oh < hout; ++oh) {
      for (int ow = 0; ow < wout; ++ow) {
        T acc = T(0);
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) acc += p[(oh * k + i) * w + ow * k + j];
        q[oh * wout + ow] = acc * inv;
      }
    }
  }
  return Tensor<T>::make_result(
      Shape{n, c, hout, wout}, std::move(out), {input.impl()},
      [n, c, h, w, k, hout, wout, inv](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int nc = 0; nc < n * c; ++nc) {
          T* gp = p.grad.data() + static_cast<std::size_t>(nc) * h * w;
          const T* gq = self.grad.data() + static_cast<std::size_t>(nc) * hout * wout;
          for (int oh = 0; oh < hout; ++oh) {
            for (int ow = 0; ow < wout; ++ow) {
              const T g = gq[oh * wout + ow] * inv;
              for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) gp[(oh * k + i) * w + ow * k + j] += g;
            }
          }
        }
      });
}

// Concatenate along the channel dimension: (N,Ca,H,W) ++ (N,Cb,H,W).
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw std::invalid_argument("concat_channels: incompatible shapes");
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  std::vector<T> out(static_cast<std::size_t>(n) * (ca + cb) * plane);
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.data().data() + static_cast<std::size_t>(i) * ca * plane, ca * plane,
                out.data() + static_cast<std::size_t>(i) * (ca + cb) * plane);
    std::copy_n(b.data().data() + static_cast<std::size_t>(i) * cb * plane, cb * plane,
                out.data() + (static_cast<std::size_t>(i) * (ca + cb) + ca) * plane);
  }
  return Tensor<T>::make_result(
      Shape{n, ca + cb, a.dim(2), a.dim(3)}, std::move(out),
      {a.impl(), b.impl()}, [n, ca, cb, plane](TensorImpl<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        for (int i = 0; i < n; ++i) {
          const T* g = self.grad.data() + static_cast<std::size_t>(i) * (ca + cb) * plane;
          T* ga = pa.grad.data() + static_cast<std::size_t>(i) * ca * plane;
          T* gb = pb.grad.data() + static_cast<std::size_t>(i) * cb * plane;
          for (std::size_t j = 0; j < static_cast<std::size_t>(ca) * plane; ++j)
            ga[j] += g[j];
          for (std::size_t j = 0; j < static_cast<std::size_t>(cb) * plane; ++j)
            gb[j] += g[static_cast<std::size_t>(ca) * plane + j];
        }
      });
}

// Mean cross-entropy of softmax(logits) against integer labels, stabilized
// by per-row max subtraction. Returns a scalar tensor.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_cross_entropy: logits must be (N,C)");
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  }
  std::vector<T> probs(logits.numel());
  T loss = T(0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::out_of_range("softmax_cross_entropy: label " +
                              std::to_string(labels[i]) + " out of range");
    }
    const T* row = logits.data().data() + static_cast<std::size_t>(i) * c;
    T mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T denom = T(0);
    for (int j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    const T logdenom = std::log(denom);
    T* prow = probs.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) prow[j] = std::exp(row[j] - mx) / denom;
    loss += -(row[labels[i]] - mx - logdenom);
  }
  loss /= static_cast<T>(n);
  return Tensor<T>::make_result(
      Shape{}, std::vector<T>{loss}, {logits.impl()},
      [n, c, probs = std::move(probs), labels](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        const T g = self.grad[0] / static_cast<T>(n);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < c; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * c + j;
            p.grad[idx] += g * (probs[idx] - (j == labels[i] ? T(1) : T(0)));
          }
        }
      });
}

// Scalar reduction sum_i w[i] * x[i]; reduces any op output to a scalar
// loss for gradient probing.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const std::vector<T>& w) {
  if (w.size() != x.numel()) throw std::invalid_argument("weighted_sum: size mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x.data()[i];
  return Tensor<T>::make_result(
      Shape{}, std::vector<T>{acc}, {x.impl()}, [w](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < w.size(); ++i) p.grad[i] += self.grad[0] * w[i];
      });
}

// Forward identity whose backward multiplies the incoming gradient by a
// constant. With scale != 1 this deliberately corrupts the analytic
// gradient; used as a negative control for the gradient-check suite.
template <typename T>
Tensor<T> scale_backward(const Tensor<T>& x, T scale) {
  return Tensor<T>::make_result(
      x.shape(), x.data(), {x.impl()}, [scale](TensorImpl<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          p.grad[i] += scale * self.grad[i];
      });
}

// Softmax probabilities (forward only; used for ensemble averaging).
template <typename T>
std::vector<T> softmax_rows(const Tensor<T>& logits) {
  const int n = logits.dim(0), c = logits.dim(1);
  std::vector<T> probs(logits.numel());
  for (int i = 0; i < n; ++i) {
    const T* row = logits.data().data() + static_cast<std::size_t>(i) * c;
    T mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T denom = T(0);
    for (int j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    for (int j = 0; j < c; ++j)
      probs[static_cast<std::size_t>(i) * c + j] = std::exp(row[j] - mx) / denom;
  }
  return probs;
}

}  // namespace partnet
