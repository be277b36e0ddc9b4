#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "witch/rng.hpp"
#include "witch/tensor.hpp"

namespace witch {

// IDX loading failures, one type per failure mode.
struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxIoError : IdxError {
  using IdxError::IdxError;
};
struct IdxMagicError : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncatedError : IdxError {
  using IdxError::IdxError;
};

struct RawImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // count*rows*cols, row-major
};

// IDX image container: big-endian magic 0x00000803, count, rows, cols,
// then unsigned bytes. Gzip-wrapped files are detected by magic sniffing
// and inflated transparently.
RawImages load_idx_images(const std::string& path);

// IDX label container: big-endian magic 0x00000801, count, then one
// unsigned byte per label.
std::vector<int> load_idx_labels(const std::string& path);

// Exactly v / 255 per pixel; output shape (N, H, W, 1).
Tensor normalize(const RawImages& raw);

// Back to byte scale (unrounded).
inline float denormalize(float v) { return v * 255.0f; }

struct LabeledDataset {
  Tensor images;  // (N, H, W, C), scalars in [0, 1]
  std::vector<int> labels;
  int class_count = 0;

  int count() const { return images.shape.empty() ? 0 : images.shape[0]; }
  std::vector<int> image_shape() const {
    return {images.shape[1], images.shape[2], images.shape[3]};
  }
  Tensor image(int i) const;
  int label(int i) const { return labels[static_cast<std::size_t>(i)]; }
};

// Validates the dataset invariants: counts match, labels < class_count,
// pixels within [0, 1]. Violations are rejected loudly.
LabeledDataset make_dataset(Tensor images, std::vector<int> labels, int class_count);

LabeledDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                int class_count = 10);

// First-n evaluation subset.
LabeledDataset subset(const LabeledDataset& ds, int first_n);

// Gaussian blobs with class means spread on a sphere around the range
// center, clipped to [0, 1]. Deterministic under seed.
LabeledDataset synthetic_blobs(int classes, int dims, int count, std::uint64_t seed,
                               float sigma = 0.06f, float radius = 0.35f);

// Deterministic 28x28x1 ten-class digit stand-in: seven-segment glyphs with
// a small random shift, per-segment stroke intensity and pixel noise.
// Difficulty is set by the contrast knobs. The dimmest stroke must clear
// the l-inf 0.3 crossover (stroke - 0.3 > background + 0.3) or no robust
// decision boundary exists and hardening collapses; the spread between
// stroke_min and stroke_max then leaves a band of boundary-near examples
// for attacks to work on.
struct SyntheticDigitsConfig {
  float background = 0.05f;
  float stroke_min = 0.70f;  // per-segment intensity drawn from this range
  float stroke_max = 0.95f;
  float noise_sigma = 0.02f;
  int max_shift = 2;
};
LabeledDataset synthetic_digits(int count, std::uint64_t seed,
                                const SyntheticDigitsConfig& cfg = {});

}  // namespace witch
