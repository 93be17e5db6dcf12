#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/rng.hpp"
#include "partnet/tensor.hpp"

namespace partnet {

// Per-channel CIFAR-10 normalization constants (mean, std over the training
// set, pixels in [0,1]).
inline constexpr float kCifarMean[3] = {0.4914f, 0.4822f, 0.4465f};
inline constexpr float kCifarStd[3] = {0.2470f, 0.2435f, 0.2616f};

struct Dataset {
  std::vector<float> images;  // N*C*H*W row-major
  std::vector<int> labels;
  int channels = 0, height = 0, width = 0;
  int class_count = 0;

  int size() const { return static_cast<int>(labels.size()); }
  std::size_t image_size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  const float* image(int i) const { return images.data() + i * image_size(); }

  Tensor<float> batch(const std::vector<int>& indices) const {
    Tensor<float> out({static_cast<int>(indices.size()), channels, height, width});
    for (std::size_t i = 0; i < indices.size(); ++i) {
      std::copy_n(image(indices[i]), image_size(), out.data().data() + i * image_size());
    }
    return out;
  }

  std::vector<int> batch_labels(const std::vector<int>& indices) const {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
    return out;
  }
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary format: records of 3073 bytes, 1 label byte followed by
// three 1024-byte channel planes (R, G, B), row-major 32x32.
// ---------------------------------------------------------------------------

constexpr int kCifarRecordBytes = 3073;

struct RawCifarBatch {
  std::vector<std::uint8_t> pixels;  // N * 3072
  std::vector<int> labels;
};

inline RawCifarBatch load_cifar10_file_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw std::runtime_error("cifar10 format error: " + path + " has " +
                             std::to_string(bytes.size()) +
                             " bytes, not a multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  RawCifarBatch out;
  out.labels.resize(n);
  out.pixels.resize(n * 3072);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data()) +
                      i * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw std::runtime_error("cifar10 format error: label byte " +
                               std::to_string(rec[0]) + " > 9 in " + path);
    }
    out.labels[i] = rec[0];
    std::copy_n(rec + 1, 3072, out.pixels.data() + i * 3072);
  }
  return out;
}

inline void write_cifar10_file(const std::string& path, const RawCifarBatch& batch) {
  if (batch.pixels.size() != batch.labels.size() * 3072) {
    throw std::invalid_argument("write_cifar10_file: pixel/label size mismatch");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    if (batch.labels[i] < 0 || batch.labels[i] > 9) {
      throw std::invalid_argument("write_cifar10_file: label out of range");
    }
    const auto label = static_cast<char>(batch.labels[i]);
    f.write(&label, 1);
    f.write(reinterpret_cast<const char*>(batch.pixels.data() + i * 3072), 3072);
  }
}

inline Dataset cifar_batches_to_dataset(const std::vector<RawCifarBatch>& batches,
                                        bool normalize = true) {
  Dataset d;
  d.channels = 3;
  d.height = 32;
  d.width = 32;
  d.class_count = 10;
  std::size_t n = 0;
  for (const auto& b : batches) n += b.labels.size();
  d.images.resize(n * 3072);
  d.labels.reserve(n);
  std::size_t off = 0;
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      d.labels.push_back(b.labels[i]);
      const std::uint8_t* src = b.pixels.data() + i * 3072;
      float* dst = d.images.data() + off;
      for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < 1024; ++j) {
          float v = static_cast<float>(src[c * 1024 + j]) / 255.0f;
          if (normalize) v = (v - kCifarMean[c]) / kCifarStd[c];
          dst[c * 1024 + j] = v;
        }
      }
      off += 3072;
    }
  }
  return d;
}

// Loads the standard train (data_batch_1..5.bin) and test (test_batch.bin)
// splits from a directory of CIFAR-10 binary batch files.
inline std::pair<Dataset, Dataset> load_cifar10(const std::string& dir,
                                                bool normalize = true) {
  std::vector<RawCifarBatch> train;
  for (int i = 1; i <= 5; ++i) {
    train.push_back(load_cifar10_file_raw(dir + "/data_batch_" + std::to_string(i) + ".bin"));
  }
  std::vector<RawCifarBatch> test = {load_cifar10_file_raw(dir + "/test_batch.bin")};
  return {cifar_batches_to_dataset(train, normalize),
          cifar_batches_to_dataset(test, normalize)};
}

// ---------------------------------------------------------------------------
// Synthetic classification task: one fixed unit-norm random template per
// class, samples are template + Gaussian noise clamped to [-1, 1]. Labels
// are balanced and stored class-by-class.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<float>> synth_templates(int class_count,
                                                       std::size_t dim, Rng& rng) {
  std::vector<std::vector<float>> templates(class_count);
  for (auto& t : templates) {
    t.resize(dim);
    double norm2 = 0.0;
    for (auto& v : t) {
      v = static_cast<float>(rng.normal());
      norm2 += static_cast<double>(v) * v;
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    for (auto& v : t) v *= inv;
  }
  return templates;
}

inline Dataset synth_dataset(int class_count, int n_per_class, int channels,
                             int height, int width, double noise_sigma, Rng& rng) {
  if (class_count < 2) throw std::invalid_argument("synth_dataset: class_count must be >= 2");
  if (n_per_class < 1) throw std::invalid_argument("synth_dataset: n_per_class must be >= 1");
  Dataset d;
  d.channels = channels;
  d.height = height;
  d.width = width;
  d.class_count = class_count;
  const std::size_t dim = static_cast<std::size_t>(channels) * height * width;
  const auto templates = synth_templates(class_count, dim, rng);
  d.images.resize(static_cast<std::size_t>(class_count) * n_per_class * dim);
  d.labels.resize(static_cast<std::size_t>(class_count) * n_per_class);
  std::size_t off = 0;
  for (int c = 0; c < class_count; ++c) {
    for (int s = 0; s < n_per_class; ++s) {
      float* img = d.images.data() + off * dim;
      for (std::size_t j = 0; j < dim; ++j) {
        const float v = templates[c][j] +
                        static_cast<float>(noise_sigma * rng.normal());
        img[j] = std::clamp(v, -1.0f, 1.0f);
      }
      d.labels[off] = c;
      ++off;
    }
  }
  return d;
}

// Train/test split over the same class templates.
inline std::pair<Dataset, Dataset> synth_train_test(int class_count,
                                                    int n_train_per_class,
                                                    int n_test_per_class, int channels,
                                                    int height, int width,
                                                    double noise_sigma, Rng& rng) {
  if (class_count < 2) throw std::invalid_argument("synth_train_test: class_count must be >= 2");
  const std::size_t dim = static_cast<std::size_t>(channels) * height * width;
  const auto templates = synth_templates(class_count, dim, rng);
  auto fill = [&](int n_per_class) {
    Dataset d;
    d.channels = channels;
    d.height = height;
    d.width = width;
    d.class_count = class_count;
    d.images.resize(static_cast<std::size_t>(class_count) * n_per_class * dim);
    d.labels.resize(static_cast<std::size_t>(class_count) * n_per_class);
    std::size_t off = 0;
    for (int c = 0; c < class_count; ++c) {
      for (int s = 0; s < n_per_class; ++s) {
        float* img = d.images.data() + off * dim;
        for (std::size_t j = 0; j < dim; ++j) {
          const float v = templates[c][j] + static_cast<float>(noise_sigma * rng.normal());
          img[j] = std::clamp(v, -1.0f, 1.0f);
        }
        d.labels[off] = c;
        ++off;
      }
    }
    return d;
  };
  Dataset train = fill(n_train_per_class);
  Dataset test = fill(n_test_per_class);
  return {std::move(train), std::move(test)};
}

// Independent oracle for the synthetic task: argmax over template dot
// products. Used by tests to bound the task difficulty.
inline double nearest_template_accuracy(const Dataset& d,
                                        const std::vector<std::vector<float>>& templates) {
  int correct = 0;
  for (int i = 0; i < d.size(); ++i) {
    const float* img = d.image(i);
    int best = 0;
    double best_dot = -1e30;
    for (std::size_t c = 0; c < templates.size(); ++c) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d.image_size(); ++j) dot += img[j] * templates[c][j];
      if (dot > best_dot) {
        best_dot = dot;
        best = static_cast<int>(c);
      }
    }
    if (best == d.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / d.size();
}

// ---------------------------------------------------------------------------
// Augmentation: reflect-pad 4, random crop back to the original size,
// horizontal flip with probability 0.5.
// ---------------------------------------------------------------------------

namespace detail {

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace detail

// Deterministic core: crop offset (dx, dy) in [0, 2*pad] and explicit flip.
inline Tensor<float> augment_with(const Tensor<float>& batch, int dx, int dy,
                                  bool flip, int pad = 4) {
  const int n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor<float> out(batch.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const float* src = batch.data().data() +
                         (static_cast<std::size_t>(b) * c + ch) * h * w;
      float* dst = out.data().data() + (static_cast<std::size_t>(b) * c + ch) * h * w;
      for (int y = 0; y < h; ++y) {
        const int sy = detail::reflect_index(y + dy - pad, h);
        for (int x = 0; x < w; ++x) {
          int sx = detail::reflect_index(x + dx - pad, w);
          if (flip) sx = w - 1 - sx;
          dst[y * w + x] = src[sy * w + sx];
        }
      }
    }
  }
  return out;
}

// Per-sample random crop + flip. Draw order per sample: dx, dy, flip.
inline Tensor<float> augment(const Tensor<float>& batch, Rng& rng, int pad = 4) {
  const int n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor<float> out(batch.shape());
  const std::size_t sample = static_cast<std::size_t>(c) * h * w;
  for (int b = 0; b < n; ++b) {
    const int dx = static_cast<int>(rng.uniform_int(2 * pad + 1));
    const int dy = static_cast<int>(rng.uniform_int(2 * pad + 1));
    const bool flip = rng.bernoulli(0.5);
    Tensor<float> one({1, c, h, w},
                      std::vector<float>(batch.data().begin() + b * sample,
                                         batch.data().begin() + (b + 1) * sample));
    Tensor<float> aug = augment_with(one, dx, dy, flip, pad);
    std::copy_n(aug.data().data(), sample, out.data().data() + b * sample);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch iteration: every index exactly once per epoch, last batch may be
// smaller, shuffle permutation drawn from the given rng.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<int>> batch_indices(int n, int batch_size,
                                                   bool shuffle, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_indices: batch_size must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<int>> batches;
  for (int i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + batch_size));
  }
  return batches;
}

}  // namespace partnet
