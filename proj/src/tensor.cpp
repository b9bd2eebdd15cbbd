#include "brca/tensor.hpp"

#include <numeric>
#include <sstream>

namespace brca {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  require(!dims.empty() && dims.size() <= kMaxRank,
          "tensor rank must be between 1 and 3, got " + std::to_string(dims.size()));
  for (std::size_t d : dims) {
    require(d > 0, "tensor dimensions must be positive");
  }
  std::copy(dims.begin(), dims.end(), dims_.begin());
  rank_ = dims.size();
}

std::size_t Shape::operator[](std::size_t axis) const {
  require(axis < rank_, "axis " + std::to_string(axis) + " out of range for shape " + str());
  return dims_[axis];
}

std::size_t Shape::numel() const {
  if (rank_ == 0) {
    return 0;
  }
  return std::accumulate(dims_.begin(), dims_.begin() + rank_, std::size_t{1},
                         std::multiplies<>());
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < rank_; ++i) {
    os << (i ? "," : "") << dims_[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : storage_(std::make_shared<Storage>()) {
  storage_->values.assign(shape.numel(), T{0});
  storage_->shape = shape;
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  require(values.size() == shape.numel(), "value count " + std::to_string(values.size()) +
                                              " does not match shape " + shape.str());
  storage_->shape = shape;
  storage_->values.assign(values.begin(), values.end());
  storage_->requires_grad = requires_grad;
}

template <typename T>
typename Tensor<T>::Storage& Tensor<T>::storage() {
  require(storage_ != nullptr, "use of an undefined tensor");
  return *storage_;
}

template <typename T>
const typename Tensor<T>::Storage& Tensor<T>::storage() const {
  require(storage_ != nullptr, "use of an undefined tensor");
  return *storage_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return storage().shape;
}

template <typename T>
std::span<T> Tensor<T>::values() {
  return storage().values;
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  return storage().values;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return !storage().grad.empty();
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  Storage& s = storage();
  if (s.grad.empty()) {
    s.grad.assign(s.values.size(), T{0});
  }
  return s.grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return const_cast<Tensor<T>*>(this)->grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  Storage& s = storage();
  s.grad.assign(s.values.size(), T{0});
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return storage().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  storage().requires_grad = flag;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor<T> copy(shape(), std::vector<T>(values().begin(), values().end()), requires_grad());
  if (has_grad()) {
    copy.storage_->grad = storage_->grad;
  }
  return copy;
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::linear: return "linear";
    case OpKind::conv1d: return "conv1d";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::pool2: return "pool2";
    case OpKind::pixel_shuffle: return "pixel_shuffle";
    case OpKind::reshape: return "reshape";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::stack_columns: return "stack_columns";
    case OpKind::embedding: return "embedding";
    case OpKind::softmax_nll: return "softmax_nll";
    case OpKind::sum: return "sum";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

namespace {

template <typename T>
void expect_arity(OpKind kind, std::span<const Tensor<T>> inputs, std::size_t lo, std::size_t hi) {
  require(inputs.size() >= lo && inputs.size() <= hi,
          std::string(op_name(kind)) + ": wrong number of inputs (" +
              std::to_string(inputs.size()) + ")");
  for (const Tensor<T>& t : inputs) {
    require(t.defined(), std::string(op_name(kind)) + ": undefined input tensor");
  }
}

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  throw ContractViolation(std::string(op_name(kind)) + ": shape mismatch, " + detail);
}

}  // namespace

template <typename T>
void check_op_inputs(OpKind kind, std::span<const Tensor<T>> inputs) {
  switch (kind) {
    case OpKind::add:
    case OpKind::mul: {
      expect_arity(kind, inputs, 2, 2);
      if (!(inputs[0].shape() == inputs[1].shape())) {
        shape_error(kind, inputs[0].shape().str() + " vs " + inputs[1].shape().str());
      }
      break;
    }
    case OpKind::matmul: {
      expect_arity(kind, inputs, 2, 2);
      const Shape& a = inputs[0].shape();
      const Shape& b = inputs[1].shape();
      if (a.rank() != 2 || b.rank() != 2 || a[1] != b[0]) {
        shape_error(kind, a.str() + " x " + b.str());
      }
      break;
    }
    case OpKind::linear: {
      expect_arity(kind, inputs, 3, 3);
      const Shape& x = inputs[0].shape();
      const Shape& w = inputs[1].shape();
      const Shape& b = inputs[2].shape();
      if (w.rank() != 2 || b.rank() != 1 || b[0] != w[0] || x.rank() > 2 || x[0] != w[1]) {
        shape_error(kind, "x " + x.str() + ", weight " + w.str() + ", bias " + b.str());
      }
      break;
    }
    case OpKind::conv1d: {
      expect_arity(kind, inputs, 3, 3);
      const Shape& x = inputs[0].shape();
      const Shape& w = inputs[1].shape();
      const Shape& b = inputs[2].shape();
      if (x.rank() != 2 || w.rank() != 3 || b.rank() != 1 || w[1] != x[0] || b[0] != w[0]) {
        shape_error(kind, "x " + x.str() + ", weight " + w.str() + ", bias " + b.str());
      }
      break;
    }
    case OpKind::pool2: {
      expect_arity(kind, inputs, 1, 1);
      const Shape& x = inputs[0].shape();
      if (x.rank() != 2 || x[1] % 2 != 0) {
        shape_error(kind, "expected [F, even L], got " + x.str());
      }
      break;
    }
    case OpKind::pixel_shuffle: {
      expect_arity(kind, inputs, 1, 1);
      const Shape& x = inputs[0].shape();
      if (x.rank() != 2 || x[0] % 2 != 0) {
        shape_error(kind, "expected [even F, L], got " + x.str());
      }
      break;
    }
    case OpKind::concat:
    case OpKind::stack_columns: {
      require(!inputs.empty(), std::string(op_name(kind)) + ": no inputs");
      expect_arity(kind, inputs, 1, inputs.size());
      for (const Tensor<T>& t : inputs) {
        if (t.shape().rank() != 1) {
          shape_error(kind, "inputs must be rank 1, got " + t.shape().str());
        }
        if (kind == OpKind::stack_columns && !(t.shape() == inputs[0].shape())) {
          shape_error(kind, "columns differ in length");
        }
      }
      break;
    }
    case OpKind::embedding: {
      expect_arity(kind, inputs, 1, 1);
      if (inputs[0].shape().rank() != 2) {
        shape_error(kind, "table must be rank 2, got " + inputs[0].shape().str());
      }
      break;
    }
    case OpKind::softmax_nll: {
      expect_arity(kind, inputs, 1, 1);
      if (inputs[0].shape().rank() != 2) {
        shape_error(kind, "logits must be [classes, L], got " + inputs[0].shape().str());
      }
      break;
    }
    case OpKind::scale:
    case OpKind::relu:
    case OpKind::sigmoid:
    case OpKind::tanh:
    case OpKind::reshape:
    case OpKind::slice:
    case OpKind::sum:
    case OpKind::weighted_sum:
      expect_arity(kind, inputs, 1, 1);
      break;
    case OpKind::custom:
      break;
  }
}

template <typename T>
std::size_t Graph<T>::record(OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
                             BackwardFn backward) {
  check_op_inputs<T>(kind, inputs);
  require(output.defined(), std::string(op_name(kind)) + ": undefined output tensor");
  nodes_.push_back(Node{kind, std::move(inputs), std::move(output), std::move(backward)});
  return nodes_.size() - 1;
}

template <typename T>
void Graph<T>::backward(Tensor<T> loss) {
  require(loss.defined() && loss.shape().rank() == 1 && loss.shape()[0] == 1,
          "backward: loss must have shape [1]");
  for (Node& node : nodes_) {
    node.output.zero_grad();
  }
  loss.grad()[0] += T{1};
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward) {
      it->backward();
    }
  }
}

template <typename T>
std::size_t Graph<T>::executed(OpKind kind) const {
  return executed_[static_cast<std::size_t>(kind)];
}

template <typename T>
void Graph<T>::note_executed(OpKind kind) {
  ++executed_[static_cast<std::size_t>(kind)];
}

template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template void check_op_inputs<float>(OpKind, std::span<const Tensor<float>>);
template void check_op_inputs<double>(OpKind, std::span<const Tensor<double>>);

}  // namespace brca
