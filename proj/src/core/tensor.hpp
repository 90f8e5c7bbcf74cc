#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "core/common.hpp"

namespace lsen {

namespace detail {

template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  uint64_t grad_epoch = 0;  // backward pass that last zeroed grad
};

inline std::atomic<uint64_t>& backward_epoch_counter() {
  static std::atomic<uint64_t> counter{0};
  return counter;
}

}  // namespace detail

// Dense N-d array handle with shared storage. Values are immutable once an
// op has produced them (the grad buffer and leaf parameters being the two
// sanctioned exceptions); handles copy cheaply.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.s_ = std::make_shared<detail::Storage<T>>();
    t.s_->shape = std::move(shape);
    t.s_->data.assign(static_cast<size_t>(lsen::numel(t.s_->shape)), T(0));
    return t;
  }

  static Tensor full(Shape shape, T value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.s_->data.begin(), t.s_->data.end(), value);
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<T> values) {
    LSEN_CHECK_DIM(lsen::numel(shape) == static_cast<int64_t>(values.size()),
                   "Tensor::from_data: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    Tensor t;
    t.s_ = std::make_shared<detail::Storage<T>>();
    t.s_->shape = std::move(shape);
    t.s_->data = std::move(values);
    return t;
  }

  static Tensor scalar(T value) { return from_data({1}, {value}); }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int64_t dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(s_->data.size()); }

  // Handle semantics: accessors are const (they mutate the shared storage,
  // not the handle), mirroring std::shared_ptr.
  T* data() const { return s_->data.data(); }
  std::vector<T>& vec() const { return s_->data; }

  T item() const {
    LSEN_CHECK_DIM(numel() == 1, "Tensor::item: tensor has " + std::to_string(numel()) +
                                     " elements, expected 1");
    return s_->data[0];
  }

  bool requires_grad() const { return s_ && s_->requires_grad; }
  const Tensor& set_requires_grad(bool rg) const {
    s_->requires_grad = rg;
    return *this;
  }

  bool has_grad() const { return s_ && !s_->grad.empty(); }
  T* grad() const { return s_->grad.empty() ? nullptr : s_->grad.data(); }
  std::vector<T>& grad_vec() const { return s_->grad; }

  // Allocates (or re-zeroes) the grad buffer exactly once per backward pass.
  void ensure_grad_zeroed(uint64_t epoch) const {
    auto& g = s_->grad;
    if (g.empty()) {
      g.assign(s_->data.size(), T(0));
    } else if (s_->grad_epoch != epoch) {
      std::fill(g.begin(), g.end(), T(0));
    }
    s_->grad_epoch = epoch;
  }

  void drop_grad() const { s_->grad.clear(); }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  detail::Storage<T>* storage() const { return s_.get(); }

 private:
  std::shared_ptr<detail::Storage<T>> s_;
};

// Define-by-run tape: ops executed while a Tape is alive (and fed by at
// least one requires_grad tensor) append one node each, in execution order.
// Reverse iteration over that order is a reverse-topological traversal, so
// backward() visits every node exactly once.
template <typename T>
class Tape {
 public:
  Tape() {
    prev_ = slot();
    slot() = this;
  }
  ~Tape() { slot() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() { return slot(); }
  static Tape* exchange(Tape* next) { return std::exchange(slot(), next); }

  void record(const char* op, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward) {
    nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
  }

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every tensor
  // that participated. `root` must be scalar.
  void backward(const Tensor<T>& root) {
    LSEN_CHECK_ARG(root.defined() && root.numel() == 1, "backward: root must be a scalar tensor");
    LSEN_CHECK_ARG(root.requires_grad(),
                   "backward: root does not depend on any requires_grad tensor");
    const uint64_t epoch = ++detail::backward_epoch_counter();
    for (auto& n : nodes_) {
      if (n.output.requires_grad()) n.output.ensure_grad_zeroed(epoch);
      for (auto& in : n.inputs)
        if (in.requires_grad()) in.ensure_grad_zeroed(epoch);
    }
    root.ensure_grad_zeroed(epoch);
    root.storage()->grad[0] = T(1);
    for (size_t i = nodes_.size(); i-- > 0;) nodes_[i].backward();
  }

  size_t size() const { return nodes_.size(); }
  const char* op_name(size_t i) const { return nodes_[i].op; }
  const Tensor<T>& node_output(size_t i) const { return nodes_[i].output; }

 private:
  struct Node {
    const char* op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  static Tape*& slot() {
    thread_local Tape* current = nullptr;
    return current;
  }

  std::vector<Node> nodes_;
  Tape* prev_;
};

// Temporarily suspends recording on the current thread (validation passes
// inside a training scope).
template <typename T>
class NoGradGuard {
 public:
  NoGradGuard() : saved_(Tape<T>::exchange(nullptr)) {}
  ~NoGradGuard() { Tape<T>::exchange(saved_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>* saved_;
};

// Runtime toggle: when enabled, every op asserts its output is finite.
bool finite_checks_enabled();
void set_finite_checks(bool enabled);

template <typename T>
void check_finite(const char* op, const Tensor<T>& t) {
  if (!finite_checks_enabled()) return;
  for (const T v : t.vec()) {
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
}

}  // namespace lsen
