#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "witch/kernels.hpp"
#include "witch/rng.hpp"
#include "witch/tensor.hpp"

namespace witch {

enum class LayerKind : std::uint32_t {
  Dense = 1,
  Conv2d = 2,
  Relu = 3,
  MaxPool2 = 4,
  Flatten = 5,
};

enum class Padding : std::uint32_t { Valid = 0, Same = 1 };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2: return "maxpool2";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

// One layer of the fixed op set. Dense weights are (out, in); conv weights
// are (K, R, S, C) with bias (K). Shapes are resolved once at build time.
template <typename T>
struct LayerT {
  LayerKind kind = LayerKind::Flatten;
  Padding padding = Padding::Valid;
  TensorT<T> weights;
  TensorT<T> bias;
  std::vector<int> in_shape;
  std::vector<int> out_shape;
};

template <typename T>
struct ModelT {
  std::vector<LayerT<T>> layers;
  std::vector<int> input_shape;
  int class_count = 0;
};

// Per-layer activations recorded during a forward pass; acts[0] is the
// input, acts[i+1] the output of layer i. The backward pass walks layers
// in exact reverse order against this record.
template <typename T>
struct ForwardTraceT {
  std::vector<TensorT<T>> acts;
};

using Layer = LayerT<float>;
using Model = ModelT<float>;
using ForwardTrace = ForwardTraceT<float>;

// Count of input-gradient evaluations (backward passes to the input),
// used by the bench harness to cross-check its cost accounting.
inline std::atomic<std::uint64_t>& grad_eval_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

struct ArchSpec {
  std::string name;              // "mlp-small" or "cnn-2conv"
  std::vector<int> input_shape;  // e.g. {28,28,1} or {2}
  int classes = 10;
  int mlp_hidden = 32;
  // cnn-2conv channel widths; tests shrink these to keep gradient checks fast.
  int conv1_channels = 16;
  int conv2_channels = 32;
};

namespace detail {

inline std::vector<int> conv_out_shape(const std::vector<int>& in, int K, int R, int S,
                                       Padding pad) {
  require(in.size() == 3, "conv2d input must be HWC, got " + shape_str(in));
  int H = in[0], W = in[1];
  if (pad == Padding::Same) return {H, W, K};
  require(H >= R && W >= S, "conv2d valid padding needs input >= kernel, got " + shape_str(in));
  return {H - R + 1, W - S + 1, K};
}

template <typename T>
void resolve_layer_shapes(LayerT<T>& layer, const std::vector<int>& in) {
  layer.in_shape = in;
  switch (layer.kind) {
    case LayerKind::Dense: {
      require(layer.weights.shape.size() == 2, "dense weights must be 2-d");
      int out_n = layer.weights.shape[0], in_n = layer.weights.shape[1];
      require(shape_numel(in) == in_n,
              "dense layer expects " + std::to_string(in_n) + " inputs, got " + shape_str(in));
      layer.out_shape = {out_n};
      break;
    }
    case LayerKind::Conv2d: {
      int K = layer.weights.shape[0], R = layer.weights.shape[1], S = layer.weights.shape[2],
          C = layer.weights.shape[3];
      require(in.size() == 3 && in[2] == C,
              "conv2d layer expects " + std::to_string(C) + " channels, got " + shape_str(in));
      layer.out_shape = conv_out_shape(in, K, R, S, layer.padding);
      break;
    }
    case LayerKind::Relu:
      layer.out_shape = in;
      break;
    case LayerKind::MaxPool2: {
      require(in.size() == 3, "maxpool2 input must be HWC, got " + shape_str(in));
      require(in[0] >= 2 && in[1] >= 2, "maxpool2 input too small: " + shape_str(in));
      layer.out_shape = {in[0] / 2, in[1] / 2, in[2]};
      break;
    }
    case LayerKind::Flatten:
      layer.out_shape = {static_cast<int>(shape_numel(in))};
      break;
  }
}

// Uniform fan-in scaled init, one substream per parameter tensor.
template <typename T>
TensorT<T> init_weights(std::vector<int> shape, int fan_in, RngStream rng) {
  TensorT<T> w(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < w.size(); ++i)
    w[i] = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

}  // namespace detail

template <typename T>
ModelT<T> build_model(const ArchSpec& arch, std::uint64_t seed) {
  require(arch.classes >= 2, "model needs at least 2 classes");
  require(!arch.input_shape.empty(), "empty input shape");
  ModelT<T> m;
  m.input_shape = arch.input_shape;
  m.class_count = arch.classes;

  auto dense = [&](int out_n, int in_n, int layer_idx) {
    LayerT<T> l;
    l.kind = LayerKind::Dense;
    l.weights = detail::init_weights<T>({out_n, in_n}, in_n,
                                        RngStream::derive(seed, 0x444e5345u, layer_idx));
    l.bias = TensorT<T>::zeros({out_n});
    return l;
  };
  auto conv = [&](int K, int R, int S, int C, int layer_idx) {
    LayerT<T> l;
    l.kind = LayerKind::Conv2d;
    l.padding = Padding::Valid;
    l.weights = detail::init_weights<T>({K, R, S, C}, R * S * C,
                                        RngStream::derive(seed, 0x434f4e56u, layer_idx));
    l.bias = TensorT<T>::zeros({K});
    return l;
  };
  auto plain = [&](LayerKind k) {
    LayerT<T> l;
    l.kind = k;
    return l;
  };

  std::vector<int> cur = m.input_shape;
  auto append = [&](LayerT<T> l) {
    detail::resolve_layer_shapes(l, cur);
    cur = l.out_shape;
    m.layers.push_back(std::move(l));
  };

  if (arch.name == "mlp-small") {
    int in_n = static_cast<int>(shape_numel(arch.input_shape));
    append(plain(LayerKind::Flatten));
    append(dense(arch.mlp_hidden, in_n, 1));
    append(plain(LayerKind::Relu));
    append(dense(arch.classes, arch.mlp_hidden, 3));
  } else if (arch.name == "cnn-2conv") {
    require(arch.input_shape.size() == 3, "cnn-2conv expects HWC input");
    int C = arch.input_shape[2];
    append(conv(arch.conv1_channels, 5, 5, C, 0));
    append(plain(LayerKind::Relu));
    append(plain(LayerKind::MaxPool2));
    append(conv(arch.conv2_channels, 5, 5, arch.conv1_channels, 3));
    append(plain(LayerKind::Relu));
    append(plain(LayerKind::MaxPool2));
    append(plain(LayerKind::Flatten));
    append(dense(arch.classes, cur[0], 7));
  } else {
    contract_violation("unknown arch '" + arch.name + "' (expected mlp-small or cnn-2conv)");
  }
  require(cur.size() == 1 && cur[0] == arch.classes, "arch does not end in class logits");
  return m;
}

namespace detail {

template <typename T>
void layer_forward(const LayerT<T>& l, const TensorT<T>& in, TensorT<T>& out) {
  out = TensorT<T>(l.out_shape);
  switch (l.kind) {
    case LayerKind::Dense:
      kern::dense_forward(in.data.data(), l.weights.data.data(), l.bias.data.data(),
                          out.data.data(), l.weights.shape[1], l.weights.shape[0]);
      break;
    case LayerKind::Conv2d: {
      int H = l.in_shape[0], W = l.in_shape[1], C = l.in_shape[2];
      int K = l.weights.shape[0], R = l.weights.shape[1], S = l.weights.shape[2];
      int pad = l.padding == Padding::Same ? (R - 1) / 2 : 0;
      kern::conv2d_forward(in.data.data(), l.weights.data.data(), l.bias.data.data(),
                           out.data.data(), H, W, C, K, R, S, pad, l.out_shape[0],
                           l.out_shape[1]);
      break;
    }
    case LayerKind::Relu:
      kern::relu_forward(in.data.data(), out.data.data(), in.size());
      break;
    case LayerKind::MaxPool2:
      kern::maxpool2_forward(in.data.data(), out.data.data(), l.in_shape[0], l.in_shape[1],
                             l.in_shape[2]);
      break;
    case LayerKind::Flatten:
      out.data = in.data;
      break;
  }
}

// dX for one layer; dW/db are accumulated only when grads != nullptr.
template <typename T>
void layer_backward(const LayerT<T>& l, const TensorT<T>& in, const TensorT<T>& dout,
                    TensorT<T>& din, LayerT<T>* grads) {
  din = TensorT<T>(l.in_shape);
  switch (l.kind) {
    case LayerKind::Dense:
      kern::dense_backward_input(dout.data.data(), l.weights.data.data(), din.data.data(),
                                 l.weights.shape[1], l.weights.shape[0]);
      if (grads)
        kern::dense_backward_params(dout.data.data(), in.data.data(),
                                    grads->weights.data.data(), grads->bias.data.data(),
                                    l.weights.shape[1], l.weights.shape[0]);
      break;
    case LayerKind::Conv2d: {
      int H = l.in_shape[0], W = l.in_shape[1], C = l.in_shape[2];
      int K = l.weights.shape[0], R = l.weights.shape[1], S = l.weights.shape[2];
      int pad = l.padding == Padding::Same ? (R - 1) / 2 : 0;
      kern::conv2d_backward_input(dout.data.data(), l.weights.data.data(), din.data.data(), H,
                                  W, C, K, R, S, pad, l.out_shape[0], l.out_shape[1]);
      if (grads)
        kern::conv2d_backward_params(dout.data.data(), in.data.data(),
                                     grads->weights.data.data(), grads->bias.data.data(), H, W,
                                     C, K, R, S, pad, l.out_shape[0], l.out_shape[1]);
      break;
    }
    case LayerKind::Relu:
      kern::relu_backward(in.data.data(), dout.data.data(), din.data.data(), in.size());
      break;
    case LayerKind::MaxPool2:
      kern::maxpool2_backward(in.data.data(), dout.data.data(), din.data.data(), l.in_shape[0],
                              l.in_shape[1], l.in_shape[2]);
      break;
    case LayerKind::Flatten:
      din.data = dout.data;
      break;
  }
}

}  // namespace detail

template <typename T>
TensorT<T> forward(const ModelT<T>& m, const TensorT<T>& x, ForwardTraceT<T>* trace = nullptr) {
  require(x.shape == m.input_shape,
          "input shape " + shape_str(x.shape) + " does not match model " +
              shape_str(m.input_shape));
  TensorT<T> cur = x;
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(m.layers.size() + 1);
    trace->acts.push_back(cur);
  }
  for (const auto& l : m.layers) {
    TensorT<T> next;
    detail::layer_forward(l, cur, next);
    cur = std::move(next);
    if (trace) trace->acts.push_back(cur);
  }
  return cur;
}

// Gradient of the recorded forward pass w.r.t. the input, given dL/dlogits.
// Parameter gradients are accumulated into param_grads when present
// (same layer layout, zero-initialized by the caller).
template <typename T>
TensorT<T> backward(const ModelT<T>& m, const ForwardTraceT<T>& trace,
                    const TensorT<T>& dlogits, std::vector<LayerT<T>>* param_grads = nullptr) {
  require(trace.acts.size() == m.layers.size() + 1, "trace does not match model");
  TensorT<T> dcur = dlogits;
  for (std::size_t i = m.layers.size(); i-- > 0;) {
    TensorT<T> din;
    detail::layer_backward(m.layers[i], trace.acts[i], dcur, din,
                           param_grads ? &(*param_grads)[i] : nullptr);
    dcur = std::move(din);
  }
  return dcur;
}

template <typename T>
int predict_logits(const TensorT<T>& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i)
    if (logits[i] > logits[best]) best = i;  // ties keep the lowest index
  return best;
}

template <typename T>
int predict(const ModelT<T>& m, const TensorT<T>& x) {
  return predict_logits(forward(m, x));
}

template <typename T>
struct InputGradResult {
  TensorT<T> grad;
  TensorT<T> logits;
  T loss;
};

// One loss + input-gradient evaluation; the logits come for free and let
// attack loops check predictions without a second forward pass.
template <typename T>
InputGradResult<T> input_grad_with_logits(const ModelT<T>& m, const TensorT<T>& x, int y) {
  require(y >= 0 && y < m.class_count,
          "label " + std::to_string(y) + " out of range for " + std::to_string(m.class_count) +
              " classes");
  ForwardTraceT<T> trace;
  TensorT<T> logits = forward(m, x, &trace);
  TensorT<T> dlogits(logits.shape);
  T loss = kern::softmax_xent(logits.data.data(), y, m.class_count, dlogits.data.data());
  TensorT<T> g = backward(m, trace, dlogits);
  grad_eval_counter().fetch_add(1, std::memory_order_relaxed);
  return {std::move(g), std::move(logits), loss};
}

template <typename T>
TensorT<T> grad_input(const ModelT<T>& m, const TensorT<T>& x, int y) {
  return input_grad_with_logits(m, x, y).grad;
}

template <typename T>
T loss_at(const ModelT<T>& m, const TensorT<T>& x, int y) {
  TensorT<T> logits = forward(m, x);
  return kern::softmax_xent(logits.data.data(), y, m.class_count, static_cast<T*>(nullptr));
}

// Zero-shaped copies of all parameter tensors, for gradient accumulation.
template <typename T>
std::vector<LayerT<T>> zero_param_grads(const ModelT<T>& m) {
  std::vector<LayerT<T>> grads;
  grads.reserve(m.layers.size());
  for (const auto& l : m.layers) {
    LayerT<T> g;
    g.kind = l.kind;
    if (l.weights.size() > 0) g.weights = TensorT<T>::zeros(l.weights.shape);
    if (l.bias.size() > 0) g.bias = TensorT<T>::zeros(l.bias.shape);
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace witch
