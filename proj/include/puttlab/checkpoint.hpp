#pragma once

#include <string>

#include "puttlab/nets.hpp"

namespace puttlab::nets {

// Checkpoint layout (little-endian):
//   magic "PUTT" | u32 version | u32 json_len | ArchConfig JSON |
//   u32 tensor_count | per tensor: u32 name_len, name, u32 rank, u64 dims[],
//   f64 payload[] | u32 CRC32 of everything prior.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

std::string arch_to_json_string(const ArchConfig& arch);
ArchConfig arch_from_json_string(const std::string& text);

}  // namespace puttlab::nets
