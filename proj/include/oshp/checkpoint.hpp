#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "oshp/config.hpp"

// Versioned binary checkpoint: resolved config text, epoch/iteration
// counters, rng state, every named parameter tensor and the prototype bank.
// Raw little-endian doubles, so reload reproduces eval output bit-for-bit.

namespace oshp {

struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  std::uint64_t iteration = 0;
  std::uint64_t rng_state = 0;
  std::unique_ptr<EopNet> model;
};

namespace detail {

constexpr char kCkptMagic[8] = {'O', 'S', 'H', 'P', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint64_t read_u64(std::istream& f) {
  std::uint64_t v;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline void write_str(std::ostream& f, const std::string& s) {
  write_u64(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_str(std::istream& f) {
  std::string s(read_u64(f), '\0');
  f.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
inline void write_tensor(std::ostream& f, const Tensor& t) {
  write_u64(f, static_cast<std::uint64_t>(t.shape.h));
  write_u64(f, static_cast<std::uint64_t>(t.shape.w));
  write_u64(f, static_cast<std::uint64_t>(t.shape.c));
  f.write(reinterpret_cast<const char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}
inline Tensor read_tensor(std::istream& f) {
  Shape s;
  s.h = static_cast<int>(read_u64(f));
  s.w = static_cast<int>(read_u64(f));
  s.c = static_cast<int>(read_u64(f));
  Tensor t(s);
  f.read(reinterpret_cast<char*>(t.v.data()),
         static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  return t;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(detail::kCkptMagic, 8);
  detail::write_str(f, serialize_config(ck.config));
  detail::write_u64(f, static_cast<std::uint64_t>(ck.epoch));
  detail::write_u64(f, ck.iteration);
  detail::write_u64(f, ck.rng_state);

  detail::write_u64(f, ck.model->params.items.size());
  for (const auto& [name, p] : ck.model->params.items) {
    detail::write_str(f, name);
    detail::write_tensor(f, p->value);
  }

  const auto& bank = ck.model->bank;
  detail::write_u64(f, bank.entries.size());
  for (const auto& [key, vec] : bank.entries) {
    detail::write_u64(f, static_cast<std::uint64_t>(key.first));
    detail::write_u64(f, static_cast<std::uint64_t>(key.second));
    detail::write_tensor(f, vec);
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw std::runtime_error(path + ": not an oshp checkpoint");

  Checkpoint ck;
  ck.config = parse_config_text(detail::read_str(f));
  ck.epoch = static_cast<int>(detail::read_u64(f));
  ck.iteration = detail::read_u64(f);
  ck.rng_state = detail::read_u64(f);

  ck.model = std::make_unique<EopNet>(ck.config.model_config(), /*seed=*/1);
  const std::uint64_t n = detail::read_u64(f);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = detail::read_str(f);
    Tensor t = detail::read_tensor(f);
    bool found = false;
    for (auto& [pname, p] : ck.model->params.items)
      if (pname == name) {
        if (!(p->value.shape == t.shape))
          throw std::runtime_error("checkpoint: shape mismatch for " + name);
        p->value = std::move(t);
        found = true;
        break;
      }
    if (!found) throw std::runtime_error("checkpoint: unknown parameter " + name);
  }

  const std::uint64_t nb = detail::read_u64(f);
  for (std::uint64_t i = 0; i < nb; ++i) {
    const int space = static_cast<int>(detail::read_u64(f));
    const int cls = static_cast<int>(detail::read_u64(f));
    ck.model->bank.entries[{space, cls}] = detail::read_tensor(f);
  }
  if (!f) throw std::runtime_error(path + ": truncated checkpoint");
  return ck;
}

}  // namespace oshp
