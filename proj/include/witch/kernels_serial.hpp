#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

// Serial reference kernels. These are the ground truth the OpenMP kernels
// are checked against: every kernel here computes each output element with
// a fixed accumulation order, and the parallel twins keep exactly the same
// per-element order, so results must match bit for bit.
//
// Layouts: activations are HWC row-major, conv weights are KRSC
// (output channel, kernel row, kernel col, input channel),
// dense weights are (out, in) row-major.

namespace witch::kern::serial {

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* out, int in_n, int out_n) {
  for (int o = 0; o < out_n; ++o) {
    T acc = b[o];
    const T* wr = w + static_cast<std::int64_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) acc += wr[i] * x[i];
    out[o] = acc;
  }
}

template <typename T>
void dense_backward_input(const T* dout, const T* w, T* dx, int in_n, int out_n) {
  for (int i = 0; i < in_n; ++i) {
    T acc = T(0);
    for (int o = 0; o < out_n; ++o) acc += dout[o] * w[static_cast<std::int64_t>(o) * in_n + i];
    dx[i] = acc;
  }
}

template <typename T>
void dense_backward_params(const T* dout, const T* x, T* dw, T* db, int in_n, int out_n) {
  for (int o = 0; o < out_n; ++o) {
    T g = dout[o];
    T* dwr = dw + static_cast<std::int64_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) dwr[i] += g * x[i];
    db[o] += g;
  }
}

// Weights arrive as (K,R,S,C); both conv kernels repack to (R,S,C,K) so the
// inner loop runs over the contiguous output-channel axis.
template <typename T>
std::vector<T> repack_conv_weights(const T* w, int K, int R, int S, int C) {
  std::vector<T> wt(static_cast<std::size_t>(K) * R * S * C);
  for (int k = 0; k < K; ++k)
    for (int r = 0; r < R; ++r)
      for (int s = 0; s < S; ++s)
        for (int c = 0; c < C; ++c)
          wt[(((static_cast<std::int64_t>(r) * S + s) * C + c) * K) + k] =
              w[((static_cast<std::int64_t>(k) * R + r) * S + s) * C + c];
  return wt;
}

template <typename T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, int H, int W, int C,
                    int K, int R, int S, int pad, int Ho, int Wo) {
  std::vector<T> wt = repack_conv_weights(w, K, R, S, C);
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
  std::vector<T> wt = repack_conv_weights(w, K, R, S, C);
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
  for (int k = 0; k < K; ++k) {
    T bacc = T(0);
    for (int y = 0; y < Ho; ++y)
      for (int x = 0; x < Wo; ++x) bacc += dout[(static_cast<std::int64_t>(y) * Wo + x) * K + k];
    db[k] += bacc;
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
  for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

// Subgradient at 0 is 0.
template <typename T>
void relu_backward(const T* x, const T* dout, T* dx, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dout[i] : T(0);
}

// 2x2 max pooling, stride 2; trailing odd row/col is dropped.
template <typename T>
void maxpool2_forward(const T* in, T* out, int H, int W, int C) {
  int Ho = H / 2, Wo = W / 2;
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

// Gradient goes to the first maximum in scan order (ties broken low).
template <typename T>
void maxpool2_backward(const T* in, const T* dout, T* din, int H, int W, int C) {
  int Ho = H / 2, Wo = W / 2;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W * C; ++i) din[i] = T(0);
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

// Numerically stable softmax cross-entropy; returns the loss and writes
// dL/dlogits = softmax(z) - onehot(y).
template <typename T>
T softmax_xent(const T* logits, int y, int k, T* dlogits) {
  T m = logits[0];
  for (int i = 1; i < k; ++i)
    if (logits[i] > m) m = logits[i];
  T denom = T(0);
  for (int i = 0; i < k; ++i) denom += std::exp(logits[i] - m);
  T log_denom = std::log(denom);
  if (dlogits) {
    for (int i = 0; i < k; ++i) dlogits[i] = std::exp(logits[i] - m) / denom;
    dlogits[y] -= T(1);
  }
  return -(logits[y] - m - log_denom);
}

}  // namespace witch::kern::serial
