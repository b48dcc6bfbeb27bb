#pragma once

#include <cstdint>
#include <string>

#include "echofight/layers.hpp"

namespace echofight::nn {

// Checkpoints are a pair of files:
//   <base>.manifest  text key-value: version, seed, round, then one
//                    "tensor <layer path> <dims...>" line per parameter
//   <base>.bin       the parameters as little-endian float32 blobs,
//                    concatenated in manifest order
struct CheckpointInfo {
  uint64_t seed = 0;
  int64_t round = 0;
  std::string encoder;  // encoder kind tag, verified by the loader when set
};

void save_checkpoint(const std::string& base, const ParamStore& params, const CheckpointInfo& info);

// Verifies the manifest against the store (every name, shape and the blob
// size) before writing anything into the parameters.
CheckpointInfo load_checkpoint(const std::string& base, const ParamStore& params);

// Reads just the manifest header (for mismatch diagnostics).
CheckpointInfo peek_checkpoint(const std::string& base);

}  // namespace echofight::nn
