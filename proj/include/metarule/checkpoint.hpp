#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/optimizer.hpp"
#include "metarule/policy.hpp"

namespace metarule {

// Byte layout, all integers and floats little-endian:
//   "METARULE"                      8 bytes
//   version                         u32 (= 1)
//   seed, step                      u64, u64
//   meta count                      u32, then per entry: u32 len + key, u32 len + value
//   tensor count                    u32, then per tensor:
//     u32 len + name, u32 rank (= 2), u64 rows, u64 cols, rows*cols f64 row-major
// Model tensors come first in a fixed order; Adam moments follow as
// "adam.m/<name>" and "adam.v/<name>" when present.
struct Checkpoint {
  static constexpr char kMagic[8] = {'M', 'E', 'T', 'A', 'R', 'U', 'L', 'E'};
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  ModelParams model{PolicyParams::zeros(), CriticParams::zeros()};
  std::optional<AdamState> adam;
  std::map<std::string, std::string> meta;
};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::string bytes() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("checkpoint truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos_ + n > data_.size()) throw IoError("checkpoint truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

inline void write_tensors(ByteWriter& w, const std::vector<ConstNamedView>& views, const std::string& prefix) {
  for (const auto& v : views) {
    w.str(prefix + v.name);
    w.u32(2);
    w.u64(static_cast<std::uint64_t>(v.rows));
    w.u64(static_cast<std::uint64_t>(v.cols));
    w.raw(v.data.data(), v.data.size() * sizeof(double));
  }
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.raw(Checkpoint::kMagic, sizeof Checkpoint::kMagic);
  w.u32(Checkpoint::kVersion);
  w.u64(ck.seed);
  w.u64(ck.step);
  auto meta = ck.meta;
  if (ck.adam) meta["adam.steps"] = std::to_string(ck.adam->steps);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  const auto model = tensor_views(ck.model);
  const std::size_t count = model.size() * (ck.adam ? 3 : 1);
  w.u32(static_cast<std::uint32_t>(count));
  detail::write_tensors(w, model, "");
  if (ck.adam) {
    detail::write_tensors(w, tensor_views(ck.adam->first), "adam.m/");
    detail::write_tensors(w, tensor_views(ck.adam->second), "adam.v/");
  }
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, Checkpoint::kMagic, sizeof magic) != 0) throw IoError("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.seed = r.u64();
  ck.step = r.u64();
  const std::uint32_t meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }

  AdamState adam;
  std::map<std::string, NamedView> slots;
  for (auto& v : tensor_views(ck.model)) slots.emplace(v.name, v);
  for (auto& v : tensor_views(adam.first)) slots.emplace("adam.m/" + v.name, v);
  for (auto& v : tensor_views(adam.second)) slots.emplace("adam.v/" + v.name, v);

  std::map<std::string, bool> seen;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    auto it = slots.find(name);
    if (it == slots.end()) throw IoError("unknown tensor '" + name + "'");
    if (seen[name]) throw IoError("duplicate tensor '" + name + "'");
    seen[name] = true;
    if (r.u32() != 2) throw IoError("tensor '" + name + "' has unsupported rank");
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != static_cast<std::uint64_t>(it->second.rows) || cols != static_cast<std::uint64_t>(it->second.cols)) {
      throw DimensionError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    r.raw(it->second.data.data(), it->second.data.size() * sizeof(double));
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint");
  for (const auto& v : tensor_views(ck.model)) {
    if (!seen[v.name]) throw IoError("missing tensor '" + v.name + "'");
  }
  const bool has_adam = seen.count("adam.m/" + tensor_views(ck.model).front().name) > 0;
  if (has_adam) {
    for (const auto& [name, view] : slots) {
      if (!seen[name]) throw IoError("missing tensor '" + name + "'");
    }
    auto it = ck.meta.find("adam.steps");
    if (it == ck.meta.end()) throw IoError("adam state without step count");
    adam.steps = std::stoull(it->second);
    ck.meta.erase(it);
    ck.adam = std::move(adam);
  }
  if (!all_finite(ck.model.policy) || !all_finite(ck.model.critic)) throw NumericError("checkpoint holds non-finite weights");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint to '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace metarule
