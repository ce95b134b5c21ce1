#pragma once

#include <span>
#include <vector>

#include "tsm/tensor.hpp"

namespace tsm {

enum class Padding { Same, Valid };

// 2-D cross-correlation. input is H x W x Cin, kernels k x k x Cin x Cout
// (k odd), bias is Cout. "same" zero-pads so the spatial extents are kept.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Padding padding, Tape* tape = nullptr);

// Per-channel window maximum over an H x W x C input. With ceil_mode the
// windows may run past the border (partial windows are valid) and the output
// extent is ceil((H - kh) / sh) + 1, at least 1.
Tensor maxpool2d(const Tensor& input, int kernel_h, int kernel_w, int stride_h,
                 int stride_w, bool ceil_mode, Tape* tape = nullptr);

Tensor relu(const Tensor& input, Tape* tape = nullptr);

Tensor sigmoid(const Tensor& input, Tape* tape = nullptr);

// y = W^T x + b with x of length D, W of shape D x K, b of length K.
Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias, Tape* tape = nullptr);

// -log softmax(logits)[label], stabilized by max subtraction. Scalar output.
Tensor softmax_cross_entropy(const Tensor& logits, int label, Tape* tape = nullptr);

// Entrywise product after repeating b along its size-1 axes. b must have the
// same rank as a and every extent either equal to a's or 1.
Tensor mul_broadcast(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor reshape(const Tensor& input, std::vector<int> shape, Tape* tape = nullptr);

Tensor sum(const Tensor& input, Tape* tape = nullptr);

// Scalar pick of one element from a rank-1 tensor.
Tensor select(const Tensor& input, int index, Tape* tape = nullptr);

// Plain softmax of a score vector (no tracking; evaluation-side helper).
std::vector<double> softmax(std::span<const double> logits);

int pooled_extent(int extent, int kernel, int stride, bool ceil_mode);

}  // namespace tsm
