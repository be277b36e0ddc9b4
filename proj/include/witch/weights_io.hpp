#pragma once

#include <stdexcept>
#include <string>

#include "witch/model.hpp"

namespace witch {

struct WeightsIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Bad magic, unsupported version, or truncated/overlong payload.
struct WeightsFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Layer shapes that do not chain, reported with the offending layer.
struct WeightsShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Self-describing little-endian binary weight file:
//
//   bytes 0..7   magic "WITCHWB1"
//   u32          format version (currently 1)
//   u32 ndim, i32 dims...   input shape
//   u32          class count
//   u32          layer count
//   per layer:
//     u32 kind tag, u32 padding tag
//     u32 ndim, i32 dims..., f32 data...   weights (ndim 0 when absent)
//     u32 ndim, i32 dims..., f32 data...   bias
//
// Floats are stored bit-exact, so load(save(m)) reproduces m exactly.
void save_weights(const Model& model, const std::string& path);
Model load_weights(const std::string& path);

}  // namespace witch
