#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "brca/data.hpp"
#include "brca/layers.hpp"
#include "brca/tensor.hpp"

namespace brca {

/// How the encoder postfix and decoder prefix linear layers see the code.
///   flattened:    full affine maps over the 1024-vector
///   per_position: the same [256, 256] map applied at each of the 4 positions
enum class LinearMode { flattened, per_position };

std::string to_string(LinearMode mode);
LinearMode parse_linear_mode(const std::string& text);

struct BrcaConfig {
  std::size_t n = 8;             // parameterized layers per group
  std::size_t features = 256;
  std::size_t code_length = 4;
  PoolKind pool = PoolKind::max;
  bool share_recursion_weights = true;
  std::size_t static_length = 1024;  // input length of the unshared (static) variant
  LinearMode linear_mode = LinearMode::flattened;
  ShuffleOrder shuffle = ShuffleOrder::interleaved;
  // Zero the second layer of every residual pair at init so each block starts
  // as the identity. With false, all layers get the fan-in uniform init.
  bool zero_init_residual = true;
  // Multiplier on the fan-in init of the final byte projection; keeps the
  // untrained logits near uniform for long inputs.
  double output_init_scale = 0.25;

  std::size_t code_size() const { return features * code_length; }
  /// Throws ContractViolation unless n is even and >= 2 and the code is 256 x 4.
  void validate() const;
};

/// log2(padded_len) - 2: applications of each recursion group needed to reach length 4.
std::size_t recursion_count(std::size_t padded_len);

/// 2 * n * (recursion_count + 2): the group layers of encoder and decoder,
/// counting a shared recursion group once per application.
std::size_t param_layer_count(std::size_t n, std::size_t padded_len);

/// Parameterized layers actually executed in one forward pass: the group
/// layers plus the final 256-way byte projection.
std::size_t executed_layer_count(std::size_t n, std::size_t padded_len);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Parameters of the six module groups plus the output projection.
///
/// Recursion groups hold one parameter set per copy: a single shared copy for
/// the recursive model, recursion_count(static_length) unshared copies for the
/// static one. Decoder recursion copies start with the 256 -> 512 expansion
/// convolution followed by n - 1 convolutions at 256 features.
template <typename T>
class BrcaModel {
 public:
  BrcaModel(BrcaConfig config, std::uint64_t seed);

  const BrcaConfig& config() const { return config_; }
  std::size_t recursion_copies() const { return enc_recursion.size(); }

  /// Recursion applications for a prepared sample; throws when a static model
  /// receives a sample not padded to its fixed length.
  std::size_t recursions_for(const ByteSample& sample) const;

  ByteSample prepare(std::span<const std::uint8_t> raw) const;

  std::vector<NamedTensor<T>> named_parameters() const;
  std::vector<Tensor<T>> parameters() const;
  std::vector<Tensor<T>> recursion_parameters() const;
  std::size_t parameter_count() const;

  std::vector<Conv1dParams<T>> enc_prefix;
  std::vector<std::vector<Conv1dParams<T>>> enc_recursion;
  std::vector<LinearParams<T>> enc_postfix;
  std::vector<LinearParams<T>> dec_prefix;
  std::vector<std::vector<Conv1dParams<T>>> dec_recursion;
  std::vector<Conv1dParams<T>> dec_postfix;
  Conv1dParams<T> output_projection;

 private:
  BrcaConfig config_;
};

/// Variable-length sample -> [1024] code.
template <typename T>
Tensor<T> encode(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample);

/// [1024] code -> [256, padded_len] byte logits.
template <typename T>
Tensor<T> decode(Graph<T>& g, const BrcaModel<T>& model, const Tensor<T>& code,
                 std::size_t padded_len);

template <typename T>
struct AutoencodeResult {
  Tensor<T> loss;    // [1]
  Tensor<T> logits;  // [256, padded_len]
};

template <typename T>
AutoencodeResult<T> autoencode(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample);

/// Mean softmax NLL over the valid positions (raw bytes and the null).
template <typename T>
Tensor<T> autoencode_loss(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample);

/// Copies parameter values between models of identical architecture.
template <typename T>
void copy_parameters(const BrcaModel<T>& from, BrcaModel<T>& to);

extern template class BrcaModel<float>;
extern template class BrcaModel<double>;

}  // namespace brca
