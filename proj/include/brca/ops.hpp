#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "brca/tensor.hpp"

// Shape-generic differentiable operations. Every function executes eagerly and
// records a backward node in `g` when any input requires a gradient.
namespace brca {

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& x, T factor);

/// [m, k] x [k, n] -> [m, n]
template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& x);

template <typename T>
Tensor<T> tanh(Graph<T>& g, const Tensor<T>& x);

/// Same values, new shape; numel must match.
template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& x, Shape shape);

/// Concatenates rank-1 tensors.
template <typename T>
Tensor<T> concat(Graph<T>& g, std::span<const Tensor<T>> parts);

/// Elements [offset, offset + count) of a rank-1 tensor.
template <typename T>
Tensor<T> slice(Graph<T>& g, const Tensor<T>& x, std::size_t offset, std::size_t count);

/// Stacks rank-1 tensors of length D as the columns of a [D, n] tensor.
template <typename T>
Tensor<T> stack_columns(Graph<T>& g, std::span<const Tensor<T>> columns);

/// Row `index` of a [rows, D] table, as a [D] tensor.
template <typename T>
Tensor<T> embedding(Graph<T>& g, const Tensor<T>& table, std::size_t index);

/// Sum of all elements, shape [1].
template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x);

/// Σ weights[i] * x[i], shape [1]. `weights` are constants.
template <typename T>
Tensor<T> weighted_sum(Graph<T>& g, const Tensor<T>& x, std::vector<T> weights);

/// Finite-difference gradient check of `f` with respect to `x`.
///
/// Non-scalar outputs are reduced with a fixed pseudo-random weighting so every
/// Jacobian entry contributes. Compares the backward-pass gradient against
/// central differences with step `eps` at each coordinate in `coords` (all
/// coordinates when empty) and returns
/// max |analytic - numeric| / max(1e-6, |analytic| + |numeric|); the floor keeps
/// finite-difference roundoff on near-zero gradients from reading as error.
/// A non-finite value anywhere yields +inf.
template <typename T>
using TensorFunction = std::function<Tensor<T>(Graph<T>&, const Tensor<T>&)>;

template <typename T>
double grad_check(const TensorFunction<T>& f, Tensor<T> x, double eps,
                  std::span<const std::size_t> coords = {});

}  // namespace brca
