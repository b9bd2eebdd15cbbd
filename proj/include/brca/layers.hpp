#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "brca/tensor.hpp"

namespace brca {

inline constexpr std::size_t kKernelSize = 3;

/// Temporal convolution weights: weight [out, in, 3], bias [out].
template <typename T>
struct Conv1dParams {
  Tensor<T> weight;
  Tensor<T> bias;

  std::size_t in_features() const { return weight.shape()[1]; }
  std::size_t out_features() const { return weight.shape()[0]; }
};

/// Affine map: weight [out, in], bias [out].
template <typename T>
struct LinearParams {
  Tensor<T> weight;
  Tensor<T> bias;

  std::size_t in_dim() const { return weight.shape()[1]; }
  std::size_t out_dim() const { return weight.shape()[0]; }
};

/// Fan-in scaled uniform init, U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), zero bias.
template <typename T>
Conv1dParams<T> make_conv1d(std::size_t in_features, std::size_t out_features,
                            std::mt19937_64& rng);

template <typename T>
LinearParams<T> make_linear(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);

/// Length-preserving convolution with kernel 3 and one zero of padding per side:
/// out[f, t] = bias[f] + sum_{g, k} weight[f, g, k] * x[g, t + k - 1].
template <typename T>
Tensor<T> conv1d(Graph<T>& g, const Tensor<T>& x, const Conv1dParams<T>& p);

/// out = weight * x + bias. A rank-2 x of shape [in, L] is mapped column by column.
template <typename T>
Tensor<T> linear(Graph<T>& g, const Tensor<T>& x, const LinearParams<T>& p);

template <typename T>
Tensor<T> relu(Graph<T>& g, const Tensor<T>& x);

enum class PoolKind { max, average, l2 };

std::string to_string(PoolKind kind);
PoolKind parse_pool_kind(const std::string& text);

/// Halves the length of [F, L] over disjoint windows (2t, 2t + 1).
/// The l2 kind is the root mean square of the window.
template <typename T>
Tensor<T> pool2(Graph<T>& g, const Tensor<T>& x, PoolKind kind);

/// How pixel_shuffle_2 groups source features.
///   interleaved: out[c, 2t + s] = x[2c + s, t]
///   blocked:     out[c, 2t + s] = x[c + s * F, t]
enum class ShuffleOrder { interleaved, blocked };

std::string to_string(ShuffleOrder order);
ShuffleOrder parse_shuffle_order(const std::string& text);

/// [2F, L] -> [F, 2L]. Adjacent output positions 2t and 2t + 1 both come from
/// input position t.
template <typename T>
Tensor<T> pixel_shuffle_2(Graph<T>& g, const Tensor<T>& x,
                          ShuffleOrder order = ShuffleOrder::interleaved);

/// A parameterized layer as seen by residual_pair.
template <typename T>
using LayerFn = std::function<Tensor<T>(Graph<T>&, const Tensor<T>&)>;

/// Pre-activation residual block: x + f2(relu(f1(relu(x)))).
template <typename T>
Tensor<T> residual_pair(Graph<T>& g, const Tensor<T>& x, const LayerFn<T>& f1,
                        const LayerFn<T>& f2);

/// Mean negative log-likelihood of `targets` under a softmax over each column
/// of `logits` [classes, L], restricted to the positions listed in `mask`.
/// Columns outside the mask contribute neither loss nor gradient.
template <typename T>
Tensor<T> softmax_nll(Graph<T>& g, const Tensor<T>& logits, std::span<const int> targets,
                      std::span<const std::size_t> mask);

}  // namespace brca
