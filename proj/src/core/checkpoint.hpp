#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace phg {

// Checkpoint container: magic "HGCK", u16 format version, then a u32-count
// prefixed list of entries (u32-length path, u8 dtype tag, u32 ndims, u32
// dims, little-endian payload). Dtype tags: 0 = f64, 1 = f32, 2 = raw bytes.
// The run configuration rides along as a reserved "__config__" byte entry.

struct CheckpointEntry {
  uint8_t dtype = 0;
  std::vector<uint32_t> dims;
  std::vector<double> scalars;  // dtype 0/1
  std::vector<uint8_t> bytes;   // dtype 2
};

struct Checkpoint {
  std::string config_json;
  std::map<std::string, CheckpointEntry> tensors;
};

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& config_json, const std::string& dtype = "f64");
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into an already-built parameter set; throws on
// missing paths or shape mismatches instead of reshaping silently.
void fill_parameters(ParameterSet& params, const Checkpoint& ck);

}  // namespace phg
