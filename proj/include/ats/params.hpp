#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ats/rng.hpp"
#include "ats/tensor.hpp"

namespace ats {

// All learnable tensors of a model, keyed by stable dotted names. Iteration
// order is the lexicographic name order, which fixes the order of optimizer
// updates and checkpoint entries.
class ParamStore {
 public:
  // Registers a new trainable leaf. Names must be unique.
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  void zero_grads();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
};

// Initializers used across modules.
Tensor normal_param(Shape shape, double stddev, Rng& rng);
Tensor constant_param(Shape shape, double value);

// ---- checkpoint ------------------------------------------------------------
// Layout (all integers little-endian):
//   magic "ATSCKPT1" (8 bytes)
//   u64 metadata_length, metadata bytes (UTF-8 JSON, may be empty)
//   u64 entry_count
//   entry_count x { u32 name_length, name bytes, u32 rank, rank x u64 dims,
//                   u64 byte_offset, u64 element_count }
//   data section: f64 little-endian buffers; byte_offset is relative to the
//   start of the data section.
// See docs/checkpoint-format.md.

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  std::string metadata;
  std::vector<CheckpointEntry> entries;
};

void write_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                      const std::string& metadata);
Checkpoint read_checkpoint(const std::filesystem::path& path);
// Copies checkpoint buffers into an existing store; names and shapes must agree exactly.
void load_into(const Checkpoint& ckpt, ParamStore& params);

}  // namespace ats
