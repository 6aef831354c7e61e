#pragma once

// Binary checkpoint files. Layout: magic, format version, component tag,
// parameter count, then per parameter (sorted by name): name, shape,
// little-endian f64 data. Optimizer state reuses the same record layout.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/optim.hpp"

namespace rpa {

namespace ckpt_detail {

constexpr char kMagic[8] = {'R', 'P', 'A', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  write_u64(os, u);
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  const std::uint64_t u = read_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline std::string read_str(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

inline void write_array(std::ostream& os, const std::string& name,
                        const std::vector<int>& shape, const std::vector<real>& data) {
  write_str(os, name);
  write_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) write_u64(os, static_cast<std::uint64_t>(d));
  for (real x : data) write_f64(os, static_cast<double>(x));
}

}  // namespace ckpt_detail

// component distinguishes policy checkpoints from env-model checkpoints so
// the two parameter sets can never be loaded into each other.
inline void save_checkpoint(const std::string& path, const std::string& component,
                            const ParameterStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  using namespace ckpt_detail;
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_str(os, component);
  write_u64(os, store.params.size());
  for (const auto& [name, p] : store.params) write_array(os, name, p->shape, p->data);
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

// Loads into a fresh store; shapes come from the file.
inline ParameterStore load_checkpoint(const std::string& path, const std::string& component) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  using namespace ckpt_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unknown checkpoint version " + std::to_string(version));
  const std::string comp = read_str(is);
  if (comp != component)
    throw std::runtime_error("checkpoint component mismatch: expected '" + component +
                             "', file has '" + comp + "'");
  const std::uint64_t count = read_u64(is);
  ParameterStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_str(is);
    const std::uint32_t ndim = read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u64(is));
    auto v = ad::make_value(shape, true);
    for (auto& x : v->data) x = static_cast<real>(read_f64(is));
    store.add(name, std::move(v));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return store;
}

// Training state: parameters plus Adam moments and the iteration counter,
// enough to resume a run bit-identically.
inline void save_train_state(const std::string& path, const std::string& component,
                             const ParameterStore& store, const AdamState& adam,
                             long iteration) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open train state for writing: " + path);
  using namespace ckpt_detail;
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_str(os, component + "+opt");
  write_u64(os, static_cast<std::uint64_t>(iteration));
  write_u64(os, static_cast<std::uint64_t>(adam.step));
  write_u64(os, store.params.size());
  for (const auto& [name, p] : store.params) {
    write_array(os, name, p->shape, p->data);
    const auto it = adam.moments.find(name);
    if (it == adam.moments.end() || it->second.m.size() != p->size()) {
      write_array(os, name + "#m", p->shape, std::vector<real>(p->size(), real(0)));
      write_array(os, name + "#v", p->shape, std::vector<real>(p->size(), real(0)));
    } else {
      write_array(os, name + "#m", p->shape, it->second.m);
      write_array(os, name + "#v", p->shape, it->second.v);
    }
  }
  if (!os) throw std::runtime_error("train state write failed: " + path);
}

struct TrainState {
  ParameterStore store;
  AdamState adam;
  long iteration = 0;
};

inline TrainState load_train_state(const std::string& path, const std::string& component) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open train state: " + path);
  using namespace ckpt_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (read_u32(is) != kVersion) throw std::runtime_error("unknown train state version");
  const std::string comp = read_str(is);
  if (comp != component + "+opt")
    throw std::runtime_error("train state component mismatch: " + comp);
  TrainState st;
  st.iteration = static_cast<long>(read_u64(is));
  st.adam.step = static_cast<long>(read_u64(is));
  const std::uint64_t count = read_u64(is);
  auto read_array = [&](std::vector<int>& shape, std::vector<real>& data) {
    const std::string name = read_str(is);
    const std::uint32_t ndim = read_u32(is);
    shape.resize(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u64(is));
    data.resize(ad::shape_numel(shape));
    for (auto& x : data) x = static_cast<real>(read_f64(is));
    return name;
  };
  for (std::uint64_t i = 0; i < count; ++i) {
    std::vector<int> shape;
    std::vector<real> data;
    const std::string name = read_array(shape, data);
    auto v = ad::make_value(shape, true);
    v->data = std::move(data);
    st.store.add(name, std::move(v));
    auto& mom = st.adam.moments[name];
    read_array(shape, mom.m);
    read_array(shape, mom.v);
  }
  if (!is) throw std::runtime_error("truncated train state: " + path);
  return st;
}

}  // namespace rpa
