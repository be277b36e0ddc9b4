#include "witch/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace witch {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803u;
constexpr std::uint32_t kLabelsMagic = 0x00000801u;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxIoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IdxIoError("read failure on '" + path + "'");
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& path) {
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw IdxIoError("zlib init failure");
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 15];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IdxIoError("gzip decompression failed for '" + path + "'");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  const std::string& path;
  std::size_t pos = 0;

  std::uint32_t read_be32(const char* what) {
    if (pos + 4 > bytes.size())
      throw IdxTruncatedError("'" + path + "' truncated reading " + std::string(what) +
                              ": expected " + std::to_string(pos + 4) + " bytes, got " +
                              std::to_string(bytes.size()));
    std::uint32_t v = (std::uint32_t(bytes[pos]) << 24) | (std::uint32_t(bytes[pos + 1]) << 16) |
                      (std::uint32_t(bytes[pos + 2]) << 8) | std::uint32_t(bytes[pos + 3]);
    pos += 4;
    return v;
  }

  const std::uint8_t* read_payload(std::size_t n) {
    if (pos + n > bytes.size())
      throw IdxTruncatedError("'" + path + "' truncated payload: expected " +
                              std::to_string(pos + n) + " bytes, got " +
                              std::to_string(bytes.size()));
    const std::uint8_t* p = bytes.data() + pos;
    pos += n;
    return p;
  }
};

std::vector<std::uint8_t> read_maybe_gzipped(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path);
  return bytes;
}

}  // namespace

RawImages load_idx_images(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_maybe_gzipped(path);
  ByteReader r{bytes, path};
  std::uint32_t magic = r.read_be32("magic");
  if (magic != kImagesMagic) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", magic);
    throw IdxMagicError("'" + path + "' has magic " + hex + ", expected 0x00000803 (images)");
  }
  RawImages raw;
  raw.count = static_cast<int>(r.read_be32("count"));
  raw.rows = static_cast<int>(r.read_be32("rows"));
  raw.cols = static_cast<int>(r.read_be32("cols"));
  std::size_t n = std::size_t(raw.count) * std::size_t(raw.rows) * std::size_t(raw.cols);
  const std::uint8_t* p = r.read_payload(n);
  raw.pixels.assign(p, p + n);
  return raw;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_maybe_gzipped(path);
  ByteReader r{bytes, path};
  std::uint32_t magic = r.read_be32("magic");
  if (magic != kLabelsMagic) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", magic);
    throw IdxMagicError("'" + path + "' has magic " + hex + ", expected 0x00000801 (labels)");
  }
  std::uint32_t count = r.read_be32("count");
  const std::uint8_t* p = r.read_payload(count);
  return std::vector<int>(p, p + count);
}

Tensor normalize(const RawImages& raw) {
  require(raw.count >= 1 && raw.rows > 0 && raw.cols > 0, "empty image batch");
  Tensor t({raw.count, raw.rows, raw.cols, 1});
  for (std::size_t i = 0; i < raw.pixels.size(); ++i)
    t.data[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  return t;
}

Tensor LabeledDataset::image(int i) const {
  require(i >= 0 && i < count(), "image index out of range");
  std::vector<int> s = image_shape();
  std::int64_t n = shape_numel(s);
  Tensor out(s);
  std::copy_n(images.data.begin() + static_cast<std::size_t>(i) * n, n, out.data.begin());
  return out;
}

LabeledDataset make_dataset(Tensor images, std::vector<int> labels, int class_count) {
  require(images.shape.size() == 4, "dataset images must be (N,H,W,C)");
  require(images.shape[0] == static_cast<int>(labels.size()),
          "image count " + std::to_string(images.shape[0]) + " != label count " +
              std::to_string(labels.size()));
  require(class_count >= 2, "dataset needs at least 2 classes");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < class_count,
            "label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                " out of range for " + std::to_string(class_count) + " classes");
  for (float v : images.data)
    require(v >= 0.0f && v <= 1.0f, "pixel outside [0,1] in dataset");
  LabeledDataset ds;
  ds.images = std::move(images);
  ds.labels = std::move(labels);
  ds.class_count = class_count;
  return ds;
}

LabeledDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path,
                                int class_count) {
  RawImages raw = load_idx_images(images_path);
  std::vector<int> labels = load_idx_labels(labels_path);
  require(raw.count == static_cast<int>(labels.size()),
          "image/label count mismatch: " + std::to_string(raw.count) + " vs " +
              std::to_string(labels.size()));
  return make_dataset(normalize(raw), std::move(labels), class_count);
}

LabeledDataset subset(const LabeledDataset& ds, int first_n) {
  require(first_n >= 1, "subset needs at least one example");
  int n = std::min(first_n, ds.count());
  std::vector<int> s = ds.image_shape();
  std::int64_t per = shape_numel(s);
  Tensor images({n, s[0], s[1], s[2]});
  std::copy_n(ds.images.data.begin(), static_cast<std::size_t>(n) * per, images.data.begin());
  std::vector<int> labels(ds.labels.begin(), ds.labels.begin() + n);
  return make_dataset(std::move(images), std::move(labels), ds.class_count);
}

LabeledDataset synthetic_blobs(int classes, int dims, int count, std::uint64_t seed,
                               float sigma, float radius) {
  require(classes >= 2, "blobs need at least 2 classes");
  require(dims >= 1 && count >= 1, "blobs need positive dims and count");

  // Class means: center 0.5, offset by `radius` along +/- coordinate axes
  // so pairwise separation is at least radius * sqrt(2). With more classes
  // than axis/sign pairs, fall back to an evenly spaced ring in the first
  // two dimensions.
  std::vector<std::vector<float>> means(static_cast<std::size_t>(classes),
                                        std::vector<float>(static_cast<std::size_t>(dims),
                                                           0.5f));
  if (classes <= 2 * dims) {
    for (int c = 0; c < classes; ++c)
      means[c][c / 2] += (c % 2 == 0 ? radius : -radius);
  } else {
    require(dims >= 2, "too many blob classes for a 1-d feature space");
    for (int c = 0; c < classes; ++c) {
      double angle = 2.0 * 3.14159265358979323846 * c / classes;
      means[c][0] += radius * static_cast<float>(std::cos(angle));
      means[c][1] += radius * static_cast<float>(std::sin(angle));
    }
  }

  Tensor images({count, 1, 1, dims});
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int c = i % classes;
    labels[i] = c;
    RngStream rng = RngStream::derive(seed, 0x424c4f42u, static_cast<std::uint64_t>(i));
    for (int d = 0; d < dims; ++d) {
      float v = means[c][d] + sigma * static_cast<float>(rng.normal());
      images.data[static_cast<std::size_t>(i) * dims + d] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return make_dataset(std::move(images), std::move(labels), classes);
}

namespace {

// Seven-segment glyph masks; segments: 0 top, 1 top-right, 2 bottom-right,
// 3 bottom, 4 bottom-left, 5 top-left, 6 middle.
constexpr std::uint8_t kSegments[10] = {
    0b0111111,  // 0
    0b0000110,  // 1
    0b1011011,  // 2
    0b1001111,  // 3
    0b1100110,  // 4
    0b1101101,  // 5
    0b1111101,  // 6
    0b0000111,  // 7
    0b1111111,  // 8
    0b1101111,  // 9
};

void draw_digit(float* img, int digit, float bg, const float* seg_fg, int dy, int dx) {
  const int H = 28, W = 28;
  for (int i = 0; i < H * W; ++i) img[i] = bg;
  std::uint8_t segs = kSegments[digit];
  auto fill = [&](int r0, int r1, int c0, int c1, float fg) {
    for (int r = r0 + dy; r <= r1 + dy; ++r) {
      if (r < 0 || r >= H) continue;
      for (int c = c0 + dx; c <= c1 + dx; ++c) {
        if (c < 0 || c >= W) continue;
        img[r * W + c] = fg;
      }
    }
  };
  if (segs & 1) fill(4, 6, 9, 18, seg_fg[0]);      // top
  if (segs & 2) fill(5, 13, 17, 19, seg_fg[1]);    // top-right
  if (segs & 4) fill(14, 22, 17, 19, seg_fg[2]);   // bottom-right
  if (segs & 8) fill(21, 23, 9, 18, seg_fg[3]);    // bottom
  if (segs & 16) fill(14, 22, 8, 10, seg_fg[4]);   // bottom-left
  if (segs & 32) fill(5, 13, 8, 10, seg_fg[5]);    // top-left
  if (segs & 64) fill(12, 14, 9, 18, seg_fg[6]);   // middle
}

}  // namespace

LabeledDataset synthetic_digits(int count, std::uint64_t seed,
                                const SyntheticDigitsConfig& cfg) {
  require(count >= 1, "need at least one example");
  const int H = 28, W = 28;
  Tensor images({count, H, W, 1});
  std::vector<int> labels(static_cast<std::size_t>(count));
  float glyph[H * W];
  float seg_fg[7];
  for (int i = 0; i < count; ++i) {
    int digit = i % 10;
    labels[i] = digit;
    RngStream rng = RngStream::derive(seed, 0x44494749u, static_cast<std::uint64_t>(i));
    int dy = static_cast<int>(rng.next_below(2 * cfg.max_shift + 1)) - cfg.max_shift;
    int dx = static_cast<int>(rng.next_below(2 * cfg.max_shift + 1)) - cfg.max_shift;
    for (float& fg : seg_fg)
      fg = static_cast<float>(rng.uniform(cfg.stroke_min, cfg.stroke_max));
    draw_digit(glyph, digit, cfg.background, seg_fg, dy, dx);
    float* out = images.data.data() + static_cast<std::size_t>(i) * H * W;
    for (int p = 0; p < H * W; ++p) {
      float v = glyph[p] + cfg.noise_sigma * static_cast<float>(rng.normal());
      out[p] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return make_dataset(std::move(images), std::move(labels), 10);
}

}  // namespace witch
