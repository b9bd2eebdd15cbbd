#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "brca/error.hpp"

namespace brca {

/// Dimensions of a dense tensor, rank 1 to 3. Sequence data is [features, length].
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 3;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::span<const std::size_t> dims);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const;
  std::size_t numel() const;
  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }
  std::string str() const;

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.dims().size() == b.dims().size() &&
           std::equal(a.dims().begin(), a.dims().end(), b.dims().begin());
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Dense row-major tensor with a lazily allocated gradient buffer.
///
/// A Tensor is a handle: copies share the same storage, the way activations
/// and parameters are shared between a model and the graph that recorded them.
/// Use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<T> values();
  std::span<const T> values() const;
  T* data() { return values().data(); }
  const T* data() const { return values().data(); }

  bool has_grad() const;
  /// Gradient buffer; allocated (zero-filled) on first access.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  T& at(std::size_t i) { return values()[i]; }
  T at(std::size_t i) const { return values()[i]; }
  T& at(std::size_t row, std::size_t col) { return values()[row * shape()[1] + col]; }
  T at(std::size_t row, std::size_t col) const { return values()[row * shape()[1] + col]; }

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  // Eigen's vectorized reductions peel a different number of leading scalars
  // depending on buffer alignment, so every buffer gets the same alignment to
  // keep results reproducible run to run.
  using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;
  struct Storage {
    Shape shape;
    Buffer values;
    Buffer grad;
    bool requires_grad = false;
  };
  Storage& storage();
  const Storage& storage() const;

  std::shared_ptr<Storage> storage_;
};

/// Operation descriptors known to the graph. Each kind carries its own input
/// shape contract, checked when the operation is recorded.
enum class OpKind {
  add,
  mul,
  scale,
  matmul,
  linear,
  conv1d,
  relu,
  sigmoid,
  tanh,
  pool2,
  pixel_shuffle,
  reshape,
  concat,
  slice,
  stack_columns,
  embedding,
  softmax_nll,
  sum,
  weighted_sum,
  custom,
};

const char* op_name(OpKind kind);

/// Throws ContractViolation when `inputs` do not satisfy the shape contract of `kind`.
template <typename T>
void check_op_inputs(OpKind kind, std::span<const Tensor<T>> inputs);

/// Append-only record of executed operations, rebuilt for every forward pass.
///
/// Nodes are stored in execution order, which is a topological order of the
/// dataflow; backward() walks them strictly in reverse. A graph created with
/// recording disabled still counts executed operations but keeps no nodes,
/// which is what inference uses.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void()>;

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  /// Validates shapes, appends a node and returns its id.
  std::size_t record(OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
                     BackwardFn backward);

  /// Accumulates d(loss)/d(leaf) into every reachable leaf gradient.
  /// Intermediate gradients are reset first, so calling this twice on the
  /// same graph doubles leaf gradients.
  void backward(Tensor<T> loss);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t node) const { return nodes_.at(node).kind; }

  /// Number of executed operations of `kind`, recorded or not.
  std::size_t executed(OpKind kind) const;
  void note_executed(OpKind kind);

 private:
  struct Node {
    OpKind kind;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
  std::array<std::size_t, static_cast<std::size_t>(OpKind::custom) + 1> executed_{};
};

/// True when an operation over `inputs` must be recorded in `graph`.
template <typename T>
bool needs_grad(const Graph<T>& graph, std::initializer_list<const Tensor<T>*> inputs) {
  if (!graph.recording()) {
    return false;
  }
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) {
      return true;
    }
  }
  return false;
}

template <typename T>
void zero_grad(std::span<Tensor<T>> params) {
  for (Tensor<T>& p : params) {
    p.zero_grad();
  }
}

template <typename T>
void zero_grad(std::vector<Tensor<T>>& params) {
  zero_grad(std::span<Tensor<T>>(params));
}

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace brca
