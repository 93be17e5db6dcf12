#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "partnet/nn.hpp"
#include "partnet/partition.hpp"

namespace partnet {

// Versioned binary checkpoint: magic, version, architecture echo, raw
// little-endian f32 parameter tensors, BN running stats, and the bit-packed
// learn masks. The masks are part of the experiment's identity and must
// survive a reload.

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kCheckpointMagic[8] = {'P', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Model& model,
                            const MaskSet& masks) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(f, kCheckpointVersion);

  const auto& spec = model.spec();
  detail::write_string(f, family_str(spec.family));
  detail::write_pod(f, static_cast<std::int32_t>(spec.depth));
  detail::write_pod(f, static_cast<std::int32_t>(spec.width));
  detail::write_pod(f, static_cast<std::int32_t>(spec.num_classes));
  detail::write_pod(f, static_cast<std::int32_t>(spec.in_channels));
  detail::write_pod(f, static_cast<std::int32_t>(spec.in_height));
  detail::write_pod(f, static_cast<std::int32_t>(spec.in_width));

  detail::write_pod(f, static_cast<std::uint64_t>(model.params.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& info = model.infos()[i];
    detail::write_string(f, info.name);
    detail::write_pod(f, static_cast<std::uint32_t>(info.shape.size()));
    for (int d : info.shape) detail::write_pod(f, static_cast<std::int64_t>(d));
    const auto& data = model.params[i].data();
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  }

  detail::write_pod(f, static_cast<std::uint64_t>(model.bn_states.size()));
  for (const auto& s : model.bn_states) {
    detail::write_pod(f, static_cast<std::uint64_t>(s.mean.size()));
    f.write(reinterpret_cast<const char*>(s.mean.data()),
            static_cast<std::streamsize>(s.mean.size() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(s.var.data()),
            static_cast<std::streamsize>(s.var.size() * sizeof(float)));
  }

  // Bit-packed masks, in parameter order.
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& mask = masks.at(model.infos()[i].name);
    std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (mask[j]) packed[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
    f.write(reinterpret_cast<const char*>(packed.data()),
            static_cast<std::streamsize>(packed.size()));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

inline std::pair<Model, MaskSet> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = detail::read_pod<std::uint32_t>(f);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  ArchitectureSpec spec;
  spec.family = family_from_str(detail::read_string(f));
  spec.depth = detail::read_pod<std::int32_t>(f);
  spec.width = detail::read_pod<std::int32_t>(f);
  spec.num_classes = detail::read_pod<std::int32_t>(f);
  spec.in_channels = detail::read_pod<std::int32_t>(f);
  spec.in_height = detail::read_pod<std::int32_t>(f);
  spec.in_width = detail::read_pod<std::int32_t>(f);

  Model model;
  model.graph = build_graph(spec);
  const auto n_params = detail::read_pod<std::uint64_t>(f);
  if (n_params != model.graph.infos.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    const auto& info = model.graph.infos[i];
    const std::string name = detail::read_string(f);
    if (name != info.name) {
      throw std::runtime_error("checkpoint: parameter order mismatch at " + name);
    }
    const auto rank = detail::read_pod<std::uint32_t>(f);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(detail::read_pod<std::int64_t>(f));
    if (shape != info.shape) {
      throw std::runtime_error("checkpoint: shape mismatch at " + name);
    }
    std::vector<float> data(shape_numel(shape));
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: truncated tensor " + name);
    Tensor<float> t(shape, std::move(data));
    t.set_requires_grad(true);
    model.params.push_back(std::move(t));
  }

  const auto n_bn = detail::read_pod<std::uint64_t>(f);
  if (n_bn != model.graph.bn_channels.size()) {
    throw std::runtime_error("checkpoint: BN state count mismatch");
  }
  for (std::size_t i = 0; i < n_bn; ++i) {
    const auto ch = detail::read_pod<std::uint64_t>(f);
    RunningStats<float> s(static_cast<int>(ch));
    f.read(reinterpret_cast<char*>(s.mean.data()),
           static_cast<std::streamsize>(ch * sizeof(float)));
    f.read(reinterpret_cast<char*>(s.var.data()),
           static_cast<std::streamsize>(ch * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: truncated BN state");
    model.bn_states.push_back(std::move(s));
  }

  MaskSet masks;
  for (std::size_t i = 0; i < n_params; ++i) {
    const auto& info = model.graph.infos[i];
    const std::size_t n = info.numel();
    std::vector<std::uint8_t> packed((n + 7) / 8);
    f.read(reinterpret_cast<char*>(packed.data()),
           static_cast<std::streamsize>(packed.size()));
    if (!f) throw std::runtime_error("checkpoint: truncated mask for " + info.name);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t j = 0; j < n; ++j) {
      mask[j] = (packed[j / 8] >> (j % 8)) & 1u;
    }
    masks.masks.emplace(info.name, std::move(mask));
  }
  model.build_index();
  return {std::move(model), std::move(masks)};
}

}  // namespace partnet
