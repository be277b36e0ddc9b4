#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "witch/kernels_serial.hpp"

// OpenMP kernels used by the model forward/backward paths. Each kernel
// falls back to its kern::serial twin when the work is too small to pay the
// fork cost or when the caller already runs inside a parallel region (the
// bench harness parallelizes over examples; nesting teams there only adds
// contention). Parallelism is always over independent output elements with
// the per-element accumulation order of the serial reference, so results
// are bit-identical to it under every thread count. tests/test_kernels.cpp
// checks that, and tools/bench_kernels.cpp times the two side by side.

namespace witch::kern {

inline bool run_parallel(std::int64_t work, std::int64_t grain) {
#ifdef _OPENMP
  return work >= grain && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
  (void)work;
  (void)grain;
  return false;
#endif
}

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int in_n, int out_n) {
  if (!run_parallel(std::int64_t(in_n) * out_n, 1 << 16)) {
    serial::dense_forward(x, w, b, out, in_n, out_n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_n; ++o) {
    T acc = b[o];
    const T* wr = w + static_cast<std::int64_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) acc += wr[i] * x[i];
    out[o] = acc;
  }
}

template <typename T>
void dense_backward_input(const T* dout, const T* w, T* dx, int in_n, int out_n) {
  if (!run_parallel(std::int64_t(in_n) * out_n, 1 << 16)) {
    serial::dense_backward_input(dout, w, dx, in_n, out_n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < in_n; ++i) {
    T acc = T(0);
    for (int o = 0; o < out_n; ++o) acc += dout[o] * w[static_cast<std::int64_t>(o) * in_n + i];
    dx[i] = acc;
  }
}

template <typename T>
void dense_backward_params(const T* dout, const T* x, T* dw, T* db, int in_n, int out_n) {
  if (!run_parallel(std::int64_t(in_n) * out_n, 1 << 16)) {
    serial::dense_backward_params(dout, x, dw, db, in_n, out_n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_n; ++o) {
    T g = dout[o];
    T* dwr = dw + static_cast<std::int64_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) dwr[i] += g * x[i];
    db[o] += g;
  }
}

template <typename T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, int H, int W, int C,
                    int K, int R, int S, int pad, int Ho, int Wo) {
  std::int64_t macs = std::int64_t(Ho) * Wo * K * R * S * C;
  if (!run_parallel(macs, 150000)) {
    serial::conv2d_forward(in, w, b, out, H, W, C, K, R, S, pad, Ho, Wo);
    return;
  }
  std::vector<T> wt = serial::repack_conv_weights(w, K, R, S, C);
#pragma omp parallel for collapse(2) schedule(static)
  for (int y = 0; y < Ho; ++y) {
    for (int x = 0; x < Wo; ++x) {
      T* op = out + (static_cast<std::int64_t>(y) * Wo + x) * K;
      for (int k = 0; k < K; ++k) op[k] = b[k];
      for (int r = 0; r < R; ++r) {
        int iy = y + r - pad;
        if (iy < 0 || iy >= H) continue;
        for (int s = 0; s < S; ++s) {
          int ix = x + s - pad;
          if (ix < 0 || ix >= W) continue;
          const T* ip = in + (static_cast<std::int64_t>(iy) * W + ix) * C;
          const T* wp = wt.data() + (static_cast<std::int64_t>(r) * S + s) * C * K;
          for (int c = 0; c < C; ++c) {
            T v = ip[c];
            const T* wc = wp + static_cast<std::int64_t>(c) * K;
            for (int k = 0; k < K; ++k) op[k] += v * wc[k];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* dout, const T* w, T* din, int H, int W, int C,
                           int K, int R, int S, int pad, int Ho, int Wo) {
  std::int64_t macs = std::int64_t(Ho) * Wo * K * R * S * C;
  if (!run_parallel(macs, 150000)) {
    serial::conv2d_backward_input(dout, w, din, H, W, C, K, R, S, pad, Ho, Wo);
    return;
  }
  std::vector<T> wt = serial::repack_conv_weights(w, K, R, S, C);
#pragma omp parallel for collapse(2) schedule(static)
  for (int iy = 0; iy < H; ++iy) {
    for (int ix = 0; ix < W; ++ix) {
      T* dp = din + (static_cast<std::int64_t>(iy) * W + ix) * C;
      for (int c = 0; c < C; ++c) dp[c] = T(0);
      for (int r = 0; r < R; ++r) {
        int y = iy - r + pad;
        if (y < 0 || y >= Ho) continue;
        for (int s = 0; s < S; ++s) {
          int x = ix - s + pad;
          if (x < 0 || x >= Wo) continue;
          const T* gp = dout + (static_cast<std::int64_t>(y) * Wo + x) * K;
          const T* wp = wt.data() + (static_cast<std::int64_t>(r) * S + s) * C * K;
          for (int c = 0; c < C; ++c) {
            const T* wc = wp + static_cast<std::int64_t>(c) * K;
            T sum = T(0);
            for (int k = 0; k < K; ++k) sum += gp[k] * wc[k];
            dp[c] += sum;
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const T* dout, const T* in, T* dw, T* db, int H, int W, int C,
                            int K, int R, int S, int pad, int Ho, int Wo) {
  std::int64_t macs = std::int64_t(Ho) * Wo * K * R * S * C;
  if (!run_parallel(macs, 150000)) {
    serial::conv2d_backward_params(dout, in, dw, db, H, W, C, K, R, S, pad, Ho, Wo);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    T bacc = T(0);
    for (int y = 0; y < Ho; ++y)
      for (int x = 0; x < Wo; ++x) bacc += dout[(static_cast<std::int64_t>(y) * Wo + x) * K + k];
    db[k] += bacc;
  }
#pragma omp parallel for collapse(3) schedule(static)
  for (int k = 0; k < K; ++k) {
    for (int r = 0; r < R; ++r) {
      for (int s = 0; s < S; ++s) {
        for (int c = 0; c < C; ++c) {
          T acc = T(0);
          for (int y = 0; y < Ho; ++y) {
            int iy = y + r - pad;
            if (iy < 0 || iy >= H) continue;
            for (int x = 0; x < Wo; ++x) {
              int ix = x + s - pad;
              if (ix < 0 || ix >= W) continue;
              acc += dout[(static_cast<std::int64_t>(y) * Wo + x) * K + k] *
                     in[(static_cast<std::int64_t>(iy) * W + ix) * C + c];
            }
          }
          dw[((static_cast<std::int64_t>(k) * R + r) * S + s) * C + c] += acc;
        }
      }
    }
  }
}

template <typename T>
void relu_forward(const T* x, T* out, std::int64_t n) {
  if (!run_parallel(n, 1 << 16)) {
    serial::relu_forward(x, out, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* dout, T* dx, std::int64_t n) {
  if (!run_parallel(n, 1 << 16)) {
    serial::relu_backward(x, dout, dx, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dout[i] : T(0);
}

template <typename T>
void maxpool2_forward(const T* in, T* out, int H, int W, int C) {
  if (!run_parallel(std::int64_t(H) * W * C, 1 << 16)) {
    serial::maxpool2_forward(in, out, H, W, C);
    return;
  }
  int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int y = 0; y < Ho; ++y) {
    for (int x = 0; x < Wo; ++x) {
      for (int c = 0; c < C; ++c) {
        T m = in[((static_cast<std::int64_t>(2 * y)) * W + 2 * x) * C + c];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            T v = in[((static_cast<std::int64_t>(2 * y + dy)) * W + (2 * x + dx)) * C + c];
            if (v > m) m = v;
          }
        out[(static_cast<std::int64_t>(y) * Wo + x) * C + c] = m;
      }
    }
  }
}

// Pool windows are disjoint, so routing gradients within a window is
// race-free under the per-window parallel loop.
template <typename T>
void maxpool2_backward(const T* in, const T* dout, T* din, int H, int W, int C) {
  if (!run_parallel(std::int64_t(H) * W * C, 1 << 16)) {
    serial::maxpool2_backward(in, dout, din, H, W, C);
    return;
  }
  int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W * C; ++i) din[i] = T(0);
#pragma omp parallel for collapse(2) schedule(static)
  for (int y = 0; y < Ho; ++y) {
    for (int x = 0; x < Wo; ++x) {
      for (int c = 0; c < C; ++c) {
        int best_dy = 0, best_dx = 0;
        T m = in[((static_cast<std::int64_t>(2 * y)) * W + 2 * x) * C + c];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            T v = in[((static_cast<std::int64_t>(2 * y + dy)) * W + (2 * x + dx)) * C + c];
            if (v > m) {
              m = v;
              best_dy = dy;
              best_dx = dx;
            }
          }
        din[((static_cast<std::int64_t>(2 * y + best_dy)) * W + (2 * x + best_dx)) * C + c] +=
            dout[(static_cast<std::int64_t>(y) * Wo + x) * C + c];
      }
    }
  }
}

// Class counts are tiny; the serial version is the implementation.
template <typename T>
T softmax_xent(const T* logits, int y, int k, T* dlogits) {
  return serial::softmax_xent(logits, y, k, dlogits);
}

}  // namespace witch::kern
