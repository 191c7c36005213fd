#include "ats/params.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "ats/errors.hpp"

namespace ats {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
  if (!t.requires_grad()) throw ContractError("parameter " + name + " must require grad");
  return params_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, t] : params_) t.zero_grad();
}

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor constant_param(Shape shape, double value) {
  return Tensor::filled(std::move(shape), value, true);
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'T', 'S', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ValidationError("truncated checkpoint: " + path.string());
  }
  return v;
}

void put_f64(std::ostream& os, double d) { put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d)); }

std::string get_bytes(std::istream& is, std::uint64_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw ValidationError("truncated checkpoint: " + path.string());
  }
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                      const std::string& metadata) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open checkpoint for writing: " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(os, metadata.size());
    os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    put<std::uint64_t>(os, params.size());
    std::uint64_t offset = 0;
    for (const auto& [name, t] : params) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
      for (auto d : t.shape()) put<std::uint64_t>(os, d);
      put<std::uint64_t>(os, offset);
      put<std::uint64_t>(os, t.numel());
      offset += t.numel() * sizeof(double);
    }
    for (const auto& [_, t] : params)
      for (double v : t.data()) put_f64(os, v);
    if (!os) throw ValidationError("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValidationError("not a checkpoint file (bad magic): " + path.string());
  }
  Checkpoint ck;
  ck.metadata = get_bytes(is, get<std::uint64_t>(is, path), path);
  const auto count = get<std::uint64_t>(is, path);
  struct Pending {
    std::uint64_t offset, count;
  };
  std::vector<Pending> pending;
  for (std::uint64_t e = 0; e < count; ++e) {
    CheckpointEntry entry;
    entry.name = get_bytes(is, get<std::uint32_t>(is, path), path);
    const auto rank = get<std::uint32_t>(is, path);
    for (std::uint32_t r = 0; r < rank; ++r) entry.shape.push_back(get<std::uint64_t>(is, path));
    Pending p{get<std::uint64_t>(is, path), get<std::uint64_t>(is, path)};
    if (p.count != numel(entry.shape)) {
      throw ValidationError("checkpoint entry " + entry.name + " has inconsistent element count");
    }
    pending.push_back(p);
    ck.entries.push_back(std::move(entry));
  }
  const auto data_start = is.tellg();
  for (std::size_t e = 0; e < ck.entries.size(); ++e) {
    is.seekg(data_start + static_cast<std::streamoff>(pending[e].offset));
    auto& buf = ck.entries[e].data;
    buf.resize(pending[e].count);
    for (auto& v : buf) v = std::bit_cast<double>(get<std::uint64_t>(is, path));
  }
  return ck;
}

void load_into(const Checkpoint& ckpt, ParamStore& params) {
  std::set<std::string> seen;
  for (const auto& e : ckpt.entries) {
    if (!params.contains(e.name)) {
      throw ValidationError("checkpoint parameter " + e.name + " does not exist in the model");
    }
    Tensor& t = params.get(e.name);
    if (t.shape() != e.shape) {
      throw ValidationError("checkpoint parameter " + e.name + " has shape " + shape_str(e.shape) +
                            " but the configured model expects " + shape_str(t.shape()));
    }
    std::copy(e.data.begin(), e.data.end(), t.mutable_data().begin());
    seen.insert(e.name);
  }
  for (const auto& [name, _] : params) {
    if (!seen.count(name)) throw ValidationError("checkpoint is missing parameter " + name);
  }
}

}  // namespace ats
