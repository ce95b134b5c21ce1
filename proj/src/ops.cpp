#include "tsm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace tsm {

namespace {

bool track(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Walks a's flat index space together with the matching (broadcast) flat
// index of b; broadcast axes carry stride 0.
template <typename Fn>
void for_each_broadcast_pair(const std::vector<int>& shape,
                             const std::vector<std::size_t>& bstride, Fn&& fn) {
  const int rank = static_cast<int>(shape.size());
  std::vector<int> idx(static_cast<std::size_t>(rank), 0);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::size_t bi = 0;
  for (std::size_t ai = 0; ai < n; ++ai) {
    fn(ai, bi);
    for (int axis = rank - 1; axis >= 0; --axis) {
      const std::size_t ax = static_cast<std::size_t>(axis);
      bi += bstride[ax];
      if (++idx[ax] < shape[ax]) break;
      idx[ax] = 0;
      bi -= bstride[ax] * static_cast<std::size_t>(shape[ax]);
    }
  }
}

}  // namespace

int pooled_extent(int extent, int kernel, int stride, bool ceil_mode) {
  if (kernel < 1 || stride < 1) {
    throw Error(ErrorKind::Argument, "pooling kernel and stride must be >= 1");
  }
  if (!ceil_mode) {
    if (kernel > extent) {
      throw Error(ErrorKind::Dimension, "pooling kernel larger than input");
    }
    return (extent - kernel) / stride + 1;
  }
  const int span = extent - kernel;
  int out = (span >= 0 ? (span + stride - 1) / stride : (span / stride)) + 1;
  // keep at least one (partial) window so every row is covered
  if (out < 1) out = 1;
  // windows must start inside the input
  while (out > 1 && (out - 1) * stride >= extent) --out;
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Padding padding, Tape* tape) {
  if (input.rank() != 3) throw Error(ErrorKind::Dimension, "conv2d input must be H x W x C");
  if (kernels.rank() != 4) {
    throw Error(ErrorKind::Dimension, "conv2d kernels must be k x k x Cin x Cout");
  }
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int k = kernels.dim(0);
  if (kernels.dim(1) != k) throw Error(ErrorKind::Dimension, "conv2d kernels must be square");
  if (k % 2 == 0) throw Error(ErrorKind::Argument, "conv2d kernel size must be odd");
  if (kernels.dim(2) != cin) {
    throw Error(ErrorKind::Dimension, "conv2d input channels do not match kernels");
  }
  const int cout = kernels.dim(3);
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw Error(ErrorKind::Dimension, "conv2d bias length must equal output channels");
  }

  const int pad = padding == Padding::Same ? k / 2 : 0;
  const int oh = padding == Padding::Same ? h : h - k + 1;
  const int ow = padding == Padding::Same ? w : w - k + 1;
  if (oh < 1 || ow < 1) {
    throw Error(ErrorKind::Dimension, "conv2d valid padding needs input >= kernel");
  }

  Tensor out({oh, ow, cout});
  {
    const double* in = input.values().data();
    const double* ker = kernels.values().data();
    const double* b = bias.values().data();
    double* o = out.values().data();
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double* ocell = o + (static_cast<std::size_t>(i) * ow + j) * cout;
        for (int co = 0; co < cout; ++co) ocell[co] = b[co];
        for (int di = 0; di < k; ++di) {
          const int ii = i + di - pad;
          if (ii < 0 || ii >= h) continue;
          for (int dj = 0; dj < k; ++dj) {
            const int jj = j + dj - pad;
            if (jj < 0 || jj >= w) continue;
            const double* icell = in + (static_cast<std::size_t>(ii) * w + jj) * cin;
            const double* kcell = ker + (static_cast<std::size_t>(di) * k + dj) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
              const double x = icell[ci];
              const double* krow = kcell + static_cast<std::size_t>(ci) * cout;
              for (int co = 0; co < cout; ++co) ocell[co] += x * krow[co];
            }
          }
        }
      }
    }
  }

  if (track(tape, {&input, &kernels, &bias})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input, ker_t = kernels, bias_t = bias;
    const int pad_c = pad;
    tape->record(out_t, [in_t, ker_t, bias_t, out_t, pad_c]() mutable {
      const int h = in_t.dim(0), w = in_t.dim(1), cin = in_t.dim(2);
      const int k = ker_t.dim(0), cout = ker_t.dim(3);
      const int oh = out_t.dim(0), ow = out_t.dim(1);
      const double* og = out_t.grad().data();
      const double* in = in_t.values().data();
      const double* ker = ker_t.values().data();
      double* ig = in_t.requires_grad() ? in_t.grad().data() : nullptr;
      double* kg = ker_t.requires_grad() ? ker_t.grad().data() : nullptr;
      double* bg = bias_t.requires_grad() ? bias_t.grad().data() : nullptr;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const double* gcell = og + (static_cast<std::size_t>(i) * ow + j) * cout;
          if (bg) {
            for (int co = 0; co < cout; ++co) bg[co] += gcell[co];
          }
          for (int di = 0; di < k; ++di) {
            const int ii = i + di - pad_c;
            if (ii < 0 || ii >= h) continue;
            for (int dj = 0; dj < k; ++dj) {
              const int jj = j + dj - pad_c;
              if (jj < 0 || jj >= w) continue;
              const std::size_t in_off = (static_cast<std::size_t>(ii) * w + jj) * cin;
              const std::size_t k_off = (static_cast<std::size_t>(di) * k + dj) * cin * cout;
              for (int ci = 0; ci < cin; ++ci) {
                const double* krow = ker + k_off + static_cast<std::size_t>(ci) * cout;
                double acc = 0.0;
                for (int co = 0; co < cout; ++co) acc += gcell[co] * krow[co];
                if (ig) ig[in_off + static_cast<std::size_t>(ci)] += acc;
                if (kg) {
                  const double x = in[in_off + static_cast<std::size_t>(ci)];
                  double* kgrow = kg + k_off + static_cast<std::size_t>(ci) * cout;
                  for (int co = 0; co < cout; ++co) kgrow[co] += x * gcell[co];
                }
              }
            }
          }
        }
      }
    });
    return out_t;
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, int kernel_h, int kernel_w, int stride_h,
                 int stride_w, bool ceil_mode, Tape* tape) {
  if (input.rank() != 3) throw Error(ErrorKind::Dimension, "maxpool2d input must be H x W x C");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const int oh = pooled_extent(h, kernel_h, stride_h, ceil_mode);
  const int ow = pooled_extent(w, kernel_w, stride_w, ceil_mode);

  Tensor out({oh, ow, c});
  std::vector<int> argmax(static_cast<std::size_t>(out.size()));
  {
    const double* in = input.values().data();
    double* o = out.values().data();
    for (int i = 0; i < oh; ++i) {
      const int r0 = i * stride_h;
      const int r1 = std::min(r0 + kernel_h, h);
      for (int j = 0; j < ow; ++j) {
        const int c0 = j * stride_w;
        const int c1 = std::min(c0 + kernel_w, w);
        for (int ch = 0; ch < c; ++ch) {
          // seed from the first element so NaN windows keep a valid argmax
          double best = 0.0;
          int best_idx = -1;
          for (int r = r0; r < r1; ++r) {
            for (int col = c0; col < c1; ++col) {
              const std::size_t idx = (static_cast<std::size_t>(r) * w + col) * c + ch;
              if (best_idx < 0 || in[idx] > best) {
                best = in[idx];
                best_idx = static_cast<int>(idx);
              }
            }
          }
          const std::size_t oidx = (static_cast<std::size_t>(i) * ow + j) * c + ch;
          o[oidx] = best;
          argmax[oidx] = best_idx;
        }
      }
    }
  }

  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t, argmax = std::move(argmax)]() mutable {
      const double* og = out_t.grad().data();
      double* ig = in_t.grad().data();
      for (std::size_t i = 0; i < argmax.size(); ++i) {
        ig[static_cast<std::size_t>(argmax[i])] += og[i];
      }
    });
    return out_t;
  }
  return out;
}

Tensor relu(const Tensor& input, Tape* tape) {
  Tensor out(input.shape());
  {
    const std::span<const double> in = input.values();
    std::span<double> o = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t]() mutable {
      const std::span<const double> in = in_t.values();
      const std::span<const double> og = out_t.grad();
      std::span<double> ig = in_t.grad();
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] > 0.0) ig[i] += og[i];
      }
    });
    return out_t;
  }
  return out;
}

Tensor sigmoid(const Tensor& input, Tape* tape) {
  Tensor out(input.shape());
  {
    const std::span<const double> in = input.values();
    std::span<double> o = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-in[i]));
  }
  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t]() mutable {
      const std::span<const double> o = out_t.values();
      const std::span<const double> og = out_t.grad();
      std::span<double> ig = in_t.grad();
      for (std::size_t i = 0; i < o.size(); ++i) ig[i] += o[i] * (1.0 - o[i]) * og[i];
    });
    return out_t;
  }
  return out;
}

Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias, Tape* tape) {
  if (input.rank() != 1) throw Error(ErrorKind::Dimension, "fully_connected input must be rank 1");
  if (weights.rank() != 2) throw Error(ErrorKind::Dimension, "fully_connected weights must be D x K");
  const int d = input.dim(0);
  if (weights.dim(0) != d) {
    throw Error(ErrorKind::Dimension, "fully_connected weight rows do not match input length");
  }
  const int klen = weights.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != klen) {
    throw Error(ErrorKind::Dimension, "fully_connected bias length does not match outputs");
  }

  Tensor out({klen});
  {
    const double* x = input.values().data();
    const double* wt = weights.values().data();
    const double* b = bias.values().data();
    double* y = out.values().data();
    for (int j = 0; j < klen; ++j) y[j] = b[j];
    for (int i = 0; i < d; ++i) {
      const double xi = x[i];
      const double* wrow = wt + static_cast<std::size_t>(i) * klen;
      for (int j = 0; j < klen; ++j) y[j] += xi * wrow[j];
    }
  }

  if (track(tape, {&input, &weights, &bias})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input, w_t = weights, b_t = bias;
    tape->record(out_t, [in_t, w_t, b_t, out_t]() mutable {
      const int d = in_t.dim(0), klen = w_t.dim(1);
      const double* og = out_t.grad().data();
      const double* x = in_t.values().data();
      const double* wt = w_t.values().data();
      if (b_t.requires_grad()) {
        double* bg = b_t.grad().data();
        for (int j = 0; j < klen; ++j) bg[j] += og[j];
      }
      double* ig = in_t.requires_grad() ? in_t.grad().data() : nullptr;
      double* wg = w_t.requires_grad() ? w_t.grad().data() : nullptr;
      for (int i = 0; i < d; ++i) {
        const double* wrow = wt + static_cast<std::size_t>(i) * klen;
        double acc = 0.0;
        for (int j = 0; j < klen; ++j) acc += wrow[j] * og[j];
        if (ig) ig[i] += acc;
        if (wg) {
          double* wgrow = wg + static_cast<std::size_t>(i) * klen;
          const double xi = x[i];
          for (int j = 0; j < klen; ++j) wgrow[j] += xi * og[j];
        }
      }
    });
    return out_t;
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, int label, Tape* tape) {
  if (logits.rank() != 1) {
    throw Error(ErrorKind::Dimension, "softmax_cross_entropy logits must be rank 1");
  }
  const int klen = logits.dim(0);
  if (label < 0 || label >= klen) {
    throw Error(ErrorKind::Index, "class label out of range");
  }
  const std::span<const double> x = logits.values();
  const double m = *std::max_element(x.begin(), x.end());
  double expsum = 0.0;
  for (double v : x) expsum += std::exp(v - m);
  const double lse = m + std::log(expsum);
  Tensor out = Tensor::scalar(lse - x[static_cast<std::size_t>(label)]);

  if (track(tape, {&logits})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = logits;
    tape->record(out_t, [in_t, out_t, label, lse]() mutable {
      const double g = out_t.grad()[0];
      const std::span<const double> x = in_t.values();
      std::span<double> ig = in_t.grad();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = std::exp(x[i] - lse);
        ig[i] += g * (p - (static_cast<int>(i) == label ? 1.0 : 0.0));
      }
    });
    return out_t;
  }
  return out;
}

Tensor mul_broadcast(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.rank() != b.rank()) {
    throw Error(ErrorKind::Dimension, "broadcast factor must have the same rank");
  }
  const int rank = a.rank();
  for (int axis = 0; axis < rank; ++axis) {
    if (b.dim(axis) != a.dim(axis) && b.dim(axis) != 1) {
      throw Error(ErrorKind::Dimension, "shapes are not broadcast compatible");
    }
  }
  // strides of b viewed through a's index space; broadcast axes contribute 0
  std::vector<std::size_t> bstride(static_cast<std::size_t>(rank));
  {
    std::size_t s = 1;
    for (int axis = rank - 1; axis >= 0; --axis) {
      bstride[static_cast<std::size_t>(axis)] = b.dim(axis) == 1 ? 0 : s;
      s *= static_cast<std::size_t>(b.dim(axis));
    }
  }

  Tensor out(a.shape());
  {
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out.values().data();
    for_each_broadcast_pair(a.shape(), bstride,
                            [&](std::size_t ai, std::size_t bi) { ov[ai] = av[ai] * bv[bi]; });
  }

  if (track(tape, {&a, &b})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor a_t = a, b_t = b;
    tape->record(out_t, [a_t, b_t, out_t, bstride]() mutable {
      const double* og = out_t.grad().data();
      const double* av = a_t.values().data();
      const double* bv = b_t.values().data();
      double* ag = a_t.requires_grad() ? a_t.grad().data() : nullptr;
      double* bg = b_t.requires_grad() ? b_t.grad().data() : nullptr;
      for_each_broadcast_pair(a_t.shape(), bstride, [&](std::size_t ai, std::size_t bi) {
        if (ag) ag[ai] += og[ai] * bv[bi];
        if (bg) bg[bi] += og[ai] * av[ai];
      });
    });
    return out_t;
  }
  return out;
}

Tensor reshape(const Tensor& input, std::vector<int> shape, Tape* tape) {
  if (shape_size(shape) != input.size()) {
    throw Error(ErrorKind::Dimension, "reshape must preserve the element count");
  }
  Tensor out = Tensor::from_data(std::move(shape),
                                 {input.values().begin(), input.values().end()});
  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t]() mutable {
      const std::span<const double> og = out_t.grad();
      std::span<double> ig = in_t.grad();
      for (std::size_t i = 0; i < og.size(); ++i) ig[i] += og[i];
    });
    return out_t;
  }
  return out;
}

Tensor sum(const Tensor& input, Tape* tape) {
  double acc = 0.0;
  for (double v : input.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t]() mutable {
      const double g = out_t.grad()[0];
      std::span<double> ig = in_t.grad();
      for (std::size_t i = 0; i < ig.size(); ++i) ig[i] += g;
    });
    return out_t;
  }
  return out;
}

Tensor select(const Tensor& input, int index, Tape* tape) {
  if (input.rank() != 1) throw Error(ErrorKind::Dimension, "select input must be rank 1");
  if (index < 0 || index >= input.dim(0)) {
    throw Error(ErrorKind::Index, "select index out of range");
  }
  Tensor out = Tensor::scalar(input.values()[static_cast<std::size_t>(index)]);
  if (track(tape, {&input})) {
    Tensor out_t = out;
    out_t.set_requires_grad(true);
    Tensor in_t = input;
    tape->record(out_t, [in_t, out_t, index]() mutable {
      in_t.grad()[static_cast<std::size_t>(index)] += out_t.grad()[0];
    });
    return out_t;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double expsum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    expsum += v;
  }
  for (double& v : p) v /= expsum;
  return p;
}

}  // namespace tsm
