#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "brca/tensor.hpp"

namespace brca::detail {

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecMap = Eigen::Map<VecX<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const VecX<T>>;
template <typename T>
using MatMap = Eigen::Map<MatR<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatR<T>>;

template <typename T>
VecMap<T> vec(std::span<T> s) {
  return VecMap<T>(s.data(), static_cast<Eigen::Index>(s.size()));
}
template <typename T>
ConstVecMap<T> vec(std::span<const T> s) {
  return ConstVecMap<T>(s.data(), static_cast<Eigen::Index>(s.size()));
}
template <typename T>
MatMap<T> mat(std::span<T> s, std::size_t rows, std::size_t cols) {
  return MatMap<T>(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <typename T>
ConstMatMap<T> mat(std::span<const T> s, std::size_t rows, std::size_t cols) {
  return ConstMatMap<T>(s.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

/// Checks inputs, counts the execution, and records `backward` when needed.
/// Marks `out` as requiring a gradient when the node is recorded.
template <typename T, typename Fn>
void finish(Graph<T>& g, OpKind kind, std::vector<Tensor<T>> inputs, Tensor<T>& out,
            Fn&& backward) {
  g.note_executed(kind);
  bool any = false;
  for (const Tensor<T>& t : inputs) {
    any = any || t.requires_grad();
  }
  if (!g.recording() || !any) {
    return;
  }
  out.set_requires_grad(true);
  g.record(kind, std::move(inputs), out, std::forward<Fn>(backward));
}

}  // namespace brca::detail
