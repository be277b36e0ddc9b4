#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace witch {

[[noreturn]] inline void contract_violation(const std::string& what) {
  throw std::invalid_argument(what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) contract_violation(what);
}

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline std::int64_t shape_numel(const std::vector<int>& s) {
  std::int64_t n = 1;
  for (int e : s) {
    require(e > 0, "tensor extent must be positive, got shape " + shape_str(s));
    n *= e;
  }
  return n;
}

// Dense n-dimensional array, row-major flat storage.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s)
      : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), T(0)) {}
  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    require(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
            "tensor data length does not match shape " + shape_str(shape));
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
  static TensorT full(std::vector<int> s, T v) {
    TensorT t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename T>
TensorT<T> sign(const TensorT<T>& t) {
  TensorT<T> out(t.shape);
  for (std::int64_t i = 0; i < t.size(); ++i)
    out[i] = t[i] > T(0) ? T(1) : (t[i] < T(0) ? T(-1) : T(0));
  return out;
}

template <typename T>
TensorT<T> hadamard(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.same_shape(b), "hadamard shape mismatch: " + shape_str(a.shape) + " vs " +
                               shape_str(b.shape));
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.same_shape(b), "add shape mismatch: " + shape_str(a.shape) + " vs " +
                               shape_str(b.shape));
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.same_shape(b), "sub shape mismatch: " + shape_str(a.shape) + " vs " +
                               shape_str(b.shape));
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  TensorT<T> out(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
T max_abs(const TensorT<T>& a) {
  T m = T(0);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    T v = a[i] < T(0) ? -a[i] : a[i];
    if (v > m) m = v;
  }
  return m;
}

using Tensor = TensorT<float>;

}  // namespace witch
