#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "tsm/error.hpp"

namespace tsm {

int shape_size(const std::vector<int>& shape);

// Dense row-major tensor of 64-bit reals with an optional same-shape gradient
// buffer. Copies share storage; operations return fresh tensors, so a tensor's
// values never change after construction except through its gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<int>& shape() const;
  int rank() const;
  int dim(int axis) const;
  int size() const;

  std::span<double> values();
  std::span<const double> values() const;
  std::span<double> grad();
  std::span<const double> grad() const;

  double item() const;                               // scalar tensors only
  double at(std::initializer_list<int> idx) const;   // bounds-checked

  bool requires_grad() const;
  void set_requires_grad(bool on);
  void zero_grad();
  bool all_finite() const;

  bool shares_storage_with(const Tensor& other) const { return s_ == other.s_; }

  Tensor clone() const;  // deep copy, preserves the tracking flag

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless requires_grad
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;

  void require_defined() const;
};

// Reverse-mode trace. Operations append one node each; replaying the nodes in
// reverse propagates output gradients back to input gradients, accumulating
// additively where a tensor fans out into several operations.
class Tape {
 public:
  void record(const Tensor& output, std::function<void()> step);
  void backward(const Tensor& loss);
  std::size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> step;
  };
  std::vector<Node> nodes_;
};

}  // namespace tsm
