#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "witch/model.hpp"
#include "witch/rng.hpp"
#include "witch/tensor.hpp"

// Shared test oracles. These stay independent of the library paths they
// check: the gradient oracle only calls the forward pass, and the corner
// oracle enumerates the budget cube exhaustively.
namespace testutil {

// Central finite differences of a scalar function of a tensor.
template <typename F>
witch::TensorT<double> fd_gradient(const F& f, const witch::TensorT<double>& x,
                                   double h = 1e-4) {
  witch::TensorT<double> g(x.shape);
  witch::TensorT<double> probe = x;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    double up = f(probe);
    probe[i] = x[i] - h;
    double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

template <typename T>
double rel_error(const witch::TensorT<T>& a, const witch::TensorT<T>& b) {
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    num += d * d;
    da += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    db += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  double denom = std::sqrt(da) + std::sqrt(db);
  return std::sqrt(num) / std::max(denom, 1e-12);
}

template <typename T>
witch::TensorT<T> random_tensor(std::vector<int> shape, witch::RngStream& rng,
                                double lo = -1.0, double hi = 1.0) {
  witch::TensorT<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Plain linear classifier: flatten + one dense layer with random weights.
template <typename T>
witch::ModelT<T> linear_model(int classes, int dims, std::uint64_t seed,
                              double weight_scale = 1.0) {
  witch::ModelT<T> m;
  m.input_shape = {dims};
  m.class_count = classes;
  witch::RngStream rng = witch::RngStream::seeded(seed);
  witch::LayerT<T> dense;
  dense.kind = witch::LayerKind::Dense;
  dense.weights = random_tensor<T>({classes, dims}, rng, -weight_scale, weight_scale);
  dense.bias = random_tensor<T>({classes}, rng, -0.1, 0.1);
  witch::detail::resolve_layer_shapes(dense, m.input_shape);
  m.layers.push_back(std::move(dense));
  return m;
}

// Binary logistic model with explicit weight rows; logit margin is
// (w1 - w0) . x, so the loss-maximizing corner has a closed form.
inline witch::Model binary_logistic(const std::vector<float>& w0,
                                    const std::vector<float>& w1) {
  witch::Model m;
  m.input_shape = {static_cast<int>(w0.size())};
  m.class_count = 2;
  witch::Layer dense;
  dense.kind = witch::LayerKind::Dense;
  dense.weights = witch::Tensor({2, static_cast<int>(w0.size())});
  for (std::size_t i = 0; i < w0.size(); ++i) {
    dense.weights[static_cast<std::int64_t>(i)] = w0[i];
    dense.weights[static_cast<std::int64_t>(w0.size() + i)] = w1[i];
  }
  dense.bias = witch::Tensor({2});
  witch::detail::resolve_layer_shapes(dense, m.input_shape);
  m.layers.push_back(std::move(dense));
  return m;
}

struct CornerBest {
  double loss = 0.0;
  witch::Tensor delta;
};

// Exhaustive maximum of the true-label loss over the 2^d corners of the
// l-inf ball (assumes the ball stays inside the pixel range).
inline CornerBest best_corner(const witch::Model& m, const witch::Tensor& x, int y,
                              float eps) {
  const int d = static_cast<int>(x.size());
  CornerBest best;
  witch::Tensor delta(x.shape);
  for (std::uint64_t mask = 0; mask < (1ull << d); ++mask) {
    for (int i = 0; i < d; ++i) delta[i] = (mask >> i) & 1 ? eps : -eps;
    double loss = witch::loss_at(m, witch::add(x, delta), y);
    if (mask == 0 || loss > best.loss) {
      best.loss = loss;
      best.delta = delta;
    }
  }
  return best;
}

// Model whose output never depends on the input (all weights zero).
template <typename T>
witch::ModelT<T> constant_model(const witch::ArchSpec& arch) {
  witch::ModelT<T> m = witch::build_model<T>(arch, 0);
  for (auto& l : m.layers)
    for (std::int64_t i = 0; i < l.weights.size(); ++i) l.weights[i] = T(0);
  return m;
}

}  // namespace testutil
