#include "witch/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace witch {

namespace {

constexpr char kMagic[8] = {'W', 'I', 'T', 'C', 'H', 'W', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void put_shape(std::vector<std::uint8_t>& out, const std::vector<int>& shape) {
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
}

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  put_shape(out, t.shape);
  for (float v : t.data) put_f32(out, v);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw WeightsFormatError("'" + path + "' truncated reading " + std::string(what) +
                               ": expected at least " + std::to_string(pos + n) +
                               " bytes, file has " + std::to_string(bytes.size()));
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = std::uint32_t(bytes[pos]) | (std::uint32_t(bytes[pos + 1]) << 8) |
                      (std::uint32_t(bytes[pos + 2]) << 16) |
                      (std::uint32_t(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::vector<int> shape(const char* what) {
    std::uint32_t ndim = u32(what);
    if (ndim > 8)
      throw WeightsFormatError("'" + path + "' has implausible rank " + std::to_string(ndim) +
                               " for " + what);
    std::vector<int> s(ndim);
    for (auto& d : s) {
      d = static_cast<int>(u32(what));
      if (d <= 0 || d > (1 << 24))
        throw WeightsFormatError("'" + path + "' has invalid extent " + std::to_string(d) +
                                 " for " + what);
    }
    return s;
  }

  Tensor tensor(const char* what) {
    std::vector<int> s = shape(what);
    if (s.empty()) return Tensor();
    Tensor t(s);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = f32(what);
    return t;
  }
};

}  // namespace

void save_weights(const Model& model, const std::string& path) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, kVersion);
  put_shape(out, model.input_shape);
  put_u32(out, static_cast<std::uint32_t>(model.class_count));
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const Layer& l : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.kind));
    put_u32(out, static_cast<std::uint32_t>(l.padding));
    if (l.weights.size() > 0)
      put_tensor(out, l.weights);
    else
      put_u32(out, 0);
    if (l.bias.size() > 0)
      put_tensor(out, l.bias);
    else
      put_u32(out, 0);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WeightsIoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw WeightsIoError("write failure on '" + path + "'");
}

Model load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WeightsIoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (f.bad()) throw WeightsIoError("read failure on '" + path + "'");

  Reader r{bytes, path};
  r.need(8, "magic");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw WeightsFormatError("'" + path + "' is not a weight file (bad magic)");
  r.pos = 8;
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw WeightsFormatError("'" + path + "' has format version " + std::to_string(version) +
                             ", this build reads version " + std::to_string(kVersion));

  Model m;
  m.input_shape = r.shape("input shape");
  m.class_count = static_cast<int>(r.u32("class count"));
  std::uint32_t layer_count = r.u32("layer count");
  if (layer_count > 256)
    throw WeightsFormatError("'" + path + "' declares " + std::to_string(layer_count) +
                             " layers");

  std::vector<int> cur = m.input_shape;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    std::string where = "layer " + std::to_string(i);
    Layer l;
    std::uint32_t kind = r.u32("layer kind");
    if (kind < 1 || kind > 5)
      throw WeightsFormatError("'" + path + "' " + where + " has unknown kind tag " +
                               std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    std::uint32_t padding = r.u32("padding tag");
    if (padding > 1)
      throw WeightsFormatError("'" + path + "' " + where + " has unknown padding tag " +
                               std::to_string(padding));
    l.padding = static_cast<Padding>(padding);
    l.weights = r.tensor("weights");
    l.bias = r.tensor("bias");

    try {
      detail::resolve_layer_shapes(l, cur);
    } catch (const std::invalid_argument& e) {
      throw WeightsShapeError("'" + path + "' " + where + " (" + layer_kind_name(l.kind) +
                              "): " + e.what());
    }
    cur = l.out_shape;
    m.layers.push_back(std::move(l));
  }
  if (r.pos != bytes.size())
    throw WeightsFormatError("'" + path + "' has " + std::to_string(bytes.size() - r.pos) +
                             " trailing bytes");
  if (cur.size() != 1 || cur[0] != m.class_count)
    throw WeightsShapeError("'" + path + "' final layer produces " + shape_str(cur) +
                            ", expected " + std::to_string(m.class_count) + " logits");
  return m;
}

}  // namespace witch
