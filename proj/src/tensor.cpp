#include "tsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace tsm {

int shape_size(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw Error(ErrorKind::Dimension, "tensor extents must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
  const int n = shape_size(shape);
  s_ = std::make_shared<Storage>();
  s_->shape = std::move(shape);
  s_->data.assign(static_cast<std::size_t>(n), 0.0);
  if (requires_grad) {
    s_->requires_grad = true;
    s_->grad.assign(static_cast<std::size_t>(n), 0.0);
  }
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.s_->data.begin(), t.s_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  const int n = shape_size(shape);
  if (static_cast<std::size_t>(n) != data.size()) {
    throw Error(ErrorKind::Dimension, "data length does not match shape product");
  }
  Tensor t(std::move(shape), requires_grad);
  t.s_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

void Tensor::require_defined() const {
  if (!s_) throw Error(ErrorKind::State, "tensor is undefined");
}

const std::vector<int>& Tensor::shape() const {
  require_defined();
  return s_->shape;
}

int Tensor::rank() const {
  require_defined();
  return static_cast<int>(s_->shape.size());
}

int Tensor::dim(int axis) const {
  require_defined();
  if (axis < 0 || axis >= rank()) throw Error(ErrorKind::Index, "axis out of range");
  return s_->shape[static_cast<std::size_t>(axis)];
}

int Tensor::size() const {
  require_defined();
  return static_cast<int>(s_->data.size());
}

std::span<double> Tensor::values() {
  require_defined();
  return s_->data;
}

std::span<const double> Tensor::values() const {
  require_defined();
  return s_->data;
}

std::span<double> Tensor::grad() {
  require_defined();
  if (!s_->requires_grad) throw Error(ErrorKind::State, "tensor does not track gradients");
  return s_->grad;
}

std::span<const double> Tensor::grad() const {
  require_defined();
  if (!s_->requires_grad) throw Error(ErrorKind::State, "tensor does not track gradients");
  return s_->grad;
}

double Tensor::item() const {
  require_defined();
  if (size() != 1) throw Error(ErrorKind::Dimension, "item() requires a scalar tensor");
  return s_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  require_defined();
  if (static_cast<int>(idx.size()) != rank()) {
    throw Error(ErrorKind::Index, "index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    const int extent = s_->shape[static_cast<std::size_t>(axis)];
    if (i < 0 || i >= extent) throw Error(ErrorKind::Index, "index out of range");
    flat = flat * static_cast<std::size_t>(extent) + static_cast<std::size_t>(i);
    ++axis;
  }
  return s_->data[flat];
}

bool Tensor::requires_grad() const {
  require_defined();
  return s_->requires_grad;
}

void Tensor::set_requires_grad(bool on) {
  require_defined();
  if (on && !s_->requires_grad) {
    s_->grad.assign(s_->data.size(), 0.0);
  } else if (!on) {
    s_->grad.clear();
    s_->grad.shrink_to_fit();
  }
  s_->requires_grad = on;
}

void Tensor::zero_grad() {
  require_defined();
  if (s_->requires_grad) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  require_defined();
  for (double v : s_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const {
  require_defined();
  Tensor t;
  t.s_ = std::make_shared<Storage>(*s_);
  return t;
}

void Tape::record(const Tensor& output, std::function<void()> step) {
  nodes_.push_back(Node{output, std::move(step)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.requires_grad()) {
    throw Error(ErrorKind::State, "backward() on a tensor that is not tracked");
  }
  if (loss.size() != 1) {
    throw Error(ErrorKind::Argument, "backward() requires a scalar loss");
  }
  bool found = false;
  for (const Node& node : nodes_) {
    if (node.output.shares_storage_with(loss)) {
      found = true;
      break;
    }
  }
  if (!found) {
    throw Error(ErrorKind::State, "loss was not produced by operations on this tape");
  }
  Tensor seed = loss;  // shares storage; grants mutable access to the grad
  seed.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->step();
  }
}

}  // namespace tsm
