// Independent reference implementations the tests check the library against.
// Everything here is deliberately written the slow, obvious way and shares no
// code with the implementation under test.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "tsm/rng.hpp"
#include "tsm/tensor.hpp"

namespace oracle {

// Direct six-nested-loop cross-correlation, zero padding when same_padding.
inline std::vector<double> conv2d_reference(const std::vector<double>& input, int h, int w,
                                            int cin, const std::vector<double>& kernels,
                                            int k, int cout, const std::vector<double>& bias,
                                            bool same_padding) {
  const int pad = same_padding ? k / 2 : 0;
  const int oh = same_padding ? h : h - k + 1;
  const int ow = same_padding ? w : w - k + 1;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow * cout, 0.0);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      for (int co = 0; co < cout; ++co) {
        double acc = bias[static_cast<std::size_t>(co)];
        for (int di = 0; di < k; ++di) {
          for (int dj = 0; dj < k; ++dj) {
            for (int ci = 0; ci < cin; ++ci) {
              const int ii = i + di - pad;
              const int jj = j + dj - pad;
              if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
              const double x = input[(static_cast<std::size_t>(ii) * w + jj) * cin + ci];
              const double kv =
                  kernels[((static_cast<std::size_t>(di) * k + dj) * cin + ci) * cout + co];
              acc += x * kv;
            }
          }
        }
        out[(static_cast<std::size_t>(i) * ow + j) * cout + co] = acc;
      }
    }
  }
  return out;
}

// Exhaustive window scan; windows start at multiples of the stride and are
// truncated at the border when ceil_mode allows partial windows.
inline std::vector<double> maxpool_reference(const std::vector<double>& input, int h, int w,
                                             int c, int kh, int kw, int sh, int sw,
                                             bool ceil_mode, int* out_h = nullptr,
                                             int* out_w = nullptr) {
  const auto extent = [&](int n, int k, int s) {
    if (!ceil_mode) return (n - k) / s + 1;
    int count = 0;
    for (int start = 0; start < n; start += s) {
      ++count;
      if (start + k >= n) break;
    }
    return count;
  };
  const int oh = extent(h, kh, sh);
  const int ow = extent(w, kw, sw);
  if (out_h) *out_h = oh;
  if (out_w) *out_w = ow;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow * c);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      for (int ch = 0; ch < c; ++ch) {
        double best = -1e300;
        for (int r = i * sh; r < i * sh + kh && r < h; ++r) {
          for (int col = j * sw; col < j * sw + kw && col < w; ++col) {
            const double v = input[(static_cast<std::size_t>(r) * w + col) * c + ch];
            if (v > best) best = v;
          }
        }
        out[(static_cast<std::size_t>(i) * ow + j) * c + ch] = best;
      }
    }
  }
  return out;
}

inline std::vector<double> fc_reference(const std::vector<double>& x,
                                        const std::vector<double>& w,
                                        const std::vector<double>& b, int d, int k) {
  std::vector<double> y(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    double acc = b[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      acc += w[static_cast<std::size_t>(i) * k + j] * x[static_cast<std::size_t>(i)];
    }
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

// Extended-precision evaluation of -log softmax(logits)[label].
inline double softmax_ce_reference(const std::vector<double>& logits, int label) {
  long double m = logits[0];
  for (double v : logits) m = std::max<long double>(m, v);
  long double expsum = 0.0L;
  for (double v : logits) expsum += expl(static_cast<long double>(v) - m);
  const long double lse = m + logl(expsum);
  return static_cast<double>(lse - static_cast<long double>(logits[static_cast<std::size_t>(label)]));
}

// Materializes the repeated factor, then multiplies entrywise.
inline std::vector<double> broadcast_multiply_reference(const std::vector<double>& a,
                                                        const std::vector<int>& ashape,
                                                        const std::vector<double>& b,
                                                        const std::vector<int>& bshape) {
  const int rank = static_cast<int>(ashape.size());
  std::size_t n = 1;
  for (int d : ashape) n *= static_cast<std::size_t>(d);
  std::vector<double> repeated(n);
  std::vector<int> idx(static_cast<std::size_t>(rank), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t bflat = 0;
    for (int axis = 0; axis < rank; ++axis) {
      const int bi = bshape[static_cast<std::size_t>(axis)] == 1
                         ? 0
                         : idx[static_cast<std::size_t>(axis)];
      bflat = bflat * static_cast<std::size_t>(bshape[static_cast<std::size_t>(axis)]) +
              static_cast<std::size_t>(bi);
    }
    repeated[flat] = b[bflat];
    for (int axis = rank - 1; axis >= 0; --axis) {
      if (++idx[static_cast<std::size_t>(axis)] < ashape[static_cast<std::size_t>(axis)]) break;
      idx[static_cast<std::size_t>(axis)] = 0;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * repeated[i];
  return out;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  const double scale = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / scale;
}

// Central finite differences (default eps 1e-5) of `loss` with respect to
// every entry of every tensor in `params`, compared against the analytic
// gradients already stored in their grad buffers. Returns the worst relative
// error seen.
inline double gradcheck(const std::function<double()>& loss, std::vector<tsm::Tensor> params,
                        double eps = 1e-5) {
  double worst = 0.0;
  for (tsm::Tensor& p : params) {
    std::span<double> theta = p.values();
    std::span<const double> analytic = p.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + eps;
      const double up = loss();
      theta[i] = saved - eps;
      const double down = loss();
      theta[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      worst = std::max(worst, rel_err(fd, analytic[i]));
    }
  }
  return worst;
}

inline tsm::Tensor random_tensor(tsm::Rng& rng, std::vector<int> shape, double scale = 1.0,
                                 bool requires_grad = false) {
  tsm::Tensor t(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

}  // namespace oracle
