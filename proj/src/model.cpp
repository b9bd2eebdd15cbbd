#include "brca/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "brca/ops.hpp"

namespace brca {

std::string to_string(LinearMode mode) {
  return mode == LinearMode::flattened ? "flattened" : "per_position";
}

LinearMode parse_linear_mode(const std::string& text) {
  if (text == "flattened") return LinearMode::flattened;
  if (text == "per_position") return LinearMode::per_position;
  throw ContractViolation("unknown linear mode '" + text + "'");
}

void BrcaConfig::validate() const {
  require(n >= 2 && n % 2 == 0, "model.n must be even and >= 2, got " + std::to_string(n));
  require(features == 256 && code_length == 4,
          "the code must be 256 features x length 4 (1024 values)");
  if (!share_recursion_weights) {
    require(static_length >= kMinPaddedLength && std::has_single_bit(static_length),
            "model.static_length must be a power of two >= 4");
  }
  require(output_init_scale > 0.0 && std::isfinite(output_init_scale),
          "model.output_init_scale must be positive");
}

std::size_t recursion_count(std::size_t padded_len) {
  require(padded_len >= kMinPaddedLength && std::has_single_bit(padded_len),
          "recursion_count: padded length must be a power of two >= 4, got " +
              std::to_string(padded_len));
  return static_cast<std::size_t>(std::countr_zero(padded_len)) - 2;
}

std::size_t param_layer_count(std::size_t n, std::size_t padded_len) {
  return 2 * n * (recursion_count(padded_len) + 2);
}

std::size_t executed_layer_count(std::size_t n, std::size_t padded_len) {
  return param_layer_count(n, padded_len) + 1;
}

template <typename T>
BrcaModel<T>::BrcaModel(BrcaConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t n = config_.n, f = config_.features;
  const std::size_t copies =
      config_.share_recursion_weights ? 1 : recursion_count(config_.static_length);
  const std::size_t linear_dim =
      config_.linear_mode == LinearMode::flattened ? config_.code_size() : f;

  for (std::size_t i = 0; i < n; ++i) enc_prefix.push_back(make_conv1d<T>(f, f, rng));
  enc_recursion.resize(copies);
  for (auto& copy : enc_recursion) {
    for (std::size_t i = 0; i < n; ++i) copy.push_back(make_conv1d<T>(f, f, rng));
  }
  for (std::size_t i = 0; i < n; ++i) enc_postfix.push_back(make_linear<T>(linear_dim, linear_dim, rng));
  for (std::size_t i = 0; i < n; ++i) dec_prefix.push_back(make_linear<T>(linear_dim, linear_dim, rng));
  dec_recursion.resize(copies);
  for (auto& copy : dec_recursion) {
    copy.push_back(make_conv1d<T>(f, 2 * f, rng));
    for (std::size_t i = 1; i < n; ++i) copy.push_back(make_conv1d<T>(f, f, rng));
  }
  for (std::size_t i = 0; i < n; ++i) dec_postfix.push_back(make_conv1d<T>(f, f, rng));
  output_projection = make_conv1d<T>(f, kByteClasses, rng);
  for (T& v : output_projection.weight.values()) v *= static_cast<T>(config_.output_init_scale);

  if (config_.zero_init_residual) {
    auto zero_second = [](auto& layers, std::size_t first) {
      for (std::size_t i = first + 1; i < layers.size(); i += 2) {
        std::fill(layers[i].weight.values().begin(), layers[i].weight.values().end(), T{0});
      }
    };
    zero_second(enc_prefix, 0);
    for (auto& copy : enc_recursion) zero_second(copy, 0);
    zero_second(enc_postfix, 0);
    zero_second(dec_prefix, 0);
    for (auto& copy : dec_recursion) zero_second(copy, 1);
    zero_second(dec_postfix, 0);
  }
}

template <typename T>
std::size_t BrcaModel<T>::recursions_for(const ByteSample& sample) const {
  const std::size_t r = recursion_count(sample.padded_len);
  if (!config_.share_recursion_weights) {
    require(sample.padded_len == config_.static_length,
            "static model expects inputs padded to " + std::to_string(config_.static_length) +
                ", got " + std::to_string(sample.padded_len));
  }
  return r;
}

template <typename T>
ByteSample BrcaModel<T>::prepare(std::span<const std::uint8_t> raw) const {
  if (config_.share_recursion_weights) {
    return brca::prepare(raw);
  }
  return prepare_fixed(raw, config_.static_length);
}

template <typename T>
std::vector<NamedTensor<T>> BrcaModel<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out;
  auto conv = [&out](const std::string& name, const Conv1dParams<T>& p) {
    out.push_back({name + ".weight", p.weight});
    out.push_back({name + ".bias", p.bias});
  };
  auto lin = [&out](const std::string& name, const LinearParams<T>& p) {
    out.push_back({name + ".weight", p.weight});
    out.push_back({name + ".bias", p.bias});
  };
  for (std::size_t i = 0; i < enc_prefix.size(); ++i) conv("enc_prefix." + std::to_string(i), enc_prefix[i]);
  for (std::size_t c = 0; c < enc_recursion.size(); ++c) {
    for (std::size_t i = 0; i < enc_recursion[c].size(); ++i) {
      conv("enc_recursion." + std::to_string(c) + "." + std::to_string(i), enc_recursion[c][i]);
    }
  }
  for (std::size_t i = 0; i < enc_postfix.size(); ++i) lin("enc_postfix." + std::to_string(i), enc_postfix[i]);
  for (std::size_t i = 0; i < dec_prefix.size(); ++i) lin("dec_prefix." + std::to_string(i), dec_prefix[i]);
  for (std::size_t c = 0; c < dec_recursion.size(); ++c) {
    for (std::size_t i = 0; i < dec_recursion[c].size(); ++i) {
      conv("dec_recursion." + std::to_string(c) + "." + std::to_string(i), dec_recursion[c][i]);
    }
  }
  for (std::size_t i = 0; i < dec_postfix.size(); ++i) conv("dec_postfix." + std::to_string(i), dec_postfix[i]);
  conv("output_projection", output_projection);
  return out;
}

template <typename T>
std::vector<Tensor<T>> BrcaModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
std::vector<Tensor<T>> BrcaModel<T>::recursion_parameters() const {
  std::vector<Tensor<T>> out;
  for (const auto* side : {&enc_recursion, &dec_recursion}) {
    for (const auto& copy : *side) {
      for (const auto& p : copy) {
        out.push_back(p.weight);
        out.push_back(p.bias);
      }
    }
  }
  return out;
}

template <typename T>
std::size_t BrcaModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : named_parameters()) total += p.tensor.numel();
  return total;
}

namespace {

/// Pre-activation residual pairs over `layers`; an odd trailing layer is
/// applied without a skip.
template <typename T, typename Params, typename Apply>
Tensor<T> residual_stack(Graph<T>& g, Tensor<T> x, std::span<const Params> layers, Apply apply) {
  std::size_t i = 0;
  for (; i + 1 < layers.size(); i += 2) {
    const Params& p1 = layers[i];
    const Params& p2 = layers[i + 1];
    x = residual_pair<T>(
        g, x, [&](Graph<T>& gg, const Tensor<T>& in) { return apply(gg, in, p1); },
        [&](Graph<T>& gg, const Tensor<T>& in) { return apply(gg, in, p2); });
  }
  if (i < layers.size()) {
    x = apply(g, relu(g, x), layers[i]);
  }
  return x;
}

template <typename T>
Tensor<T> conv_stack(Graph<T>& g, Tensor<T> x, std::span<const Conv1dParams<T>> layers) {
  return residual_stack<T, Conv1dParams<T>>(
      g, std::move(x), layers,
      [](Graph<T>& gg, const Tensor<T>& in, const Conv1dParams<T>& p) { return conv1d(gg, in, p); });
}

template <typename T>
Tensor<T> linear_stack(Graph<T>& g, Tensor<T> x, std::span<const LinearParams<T>> layers) {
  return residual_stack<T, LinearParams<T>>(
      g, std::move(x), layers,
      [](Graph<T>& gg, const Tensor<T>& in, const LinearParams<T>& p) { return linear(gg, in, p); });
}

}  // namespace

template <typename T>
Tensor<T> encode(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample) {
  const BrcaConfig& cfg = model.config();
  const std::size_t recursions = model.recursions_for(sample);
  Tensor<T> x = conv_stack<T>(g, onehot<T>(sample), model.enc_prefix);
  for (std::size_t r = 0; r < recursions; ++r) {
    const auto& group = model.enc_recursion[cfg.share_recursion_weights ? 0 : r];
    x = pool2(g, conv_stack<T>(g, x, group), cfg.pool);
  }
  if (cfg.linear_mode == LinearMode::per_position) {
    x = linear_stack<T>(g, x, model.enc_postfix);
    return reshape(g, x, Shape{cfg.code_size()});
  }
  return linear_stack<T>(g, reshape(g, x, Shape{cfg.code_size()}), model.enc_postfix);
}

template <typename T>
Tensor<T> decode(Graph<T>& g, const BrcaModel<T>& model, const Tensor<T>& code,
                 std::size_t padded_len) {
  const BrcaConfig& cfg = model.config();
  require(code.shape() == Shape{cfg.code_size()},
          "decode: code must have shape [1024], got " + code.shape().str());
  const std::size_t recursions = recursion_count(padded_len);
  if (!cfg.share_recursion_weights) {
    require(padded_len == cfg.static_length, "decode: static model decodes only length " +
                                                 std::to_string(cfg.static_length));
  }
  const Shape grid{cfg.features, cfg.code_length};
  Tensor<T> x;
  if (cfg.linear_mode == LinearMode::per_position) {
    x = linear_stack<T>(g, reshape(g, code, grid), model.dec_prefix);
  } else {
    x = reshape(g, linear_stack<T>(g, code, model.dec_prefix), grid);
  }
  for (std::size_t r = 0; r < recursions; ++r) {
    const auto& group = model.dec_recursion[cfg.share_recursion_weights ? 0 : r];
    x = pixel_shuffle_2(g, conv1d(g, relu(g, x), group.front()), cfg.shuffle);
    x = conv_stack<T>(g, x, std::span<const Conv1dParams<T>>(group).subspan(1));
  }
  x = conv_stack<T>(g, x, model.dec_postfix);
  return conv1d(g, relu(g, x), model.output_projection);
}

template <typename T>
AutoencodeResult<T> autoencode(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample) {
  Tensor<T> code = encode(g, model, sample);
  Tensor<T> logits = decode(g, model, code, sample.padded_len);
  const std::vector<int> targets = sample.targets();
  const std::vector<std::size_t> mask = sample.valid_positions();
  return {softmax_nll<T>(g, logits, targets, mask), logits};
}

template <typename T>
Tensor<T> autoencode_loss(Graph<T>& g, const BrcaModel<T>& model, const ByteSample& sample) {
  return autoencode(g, model, sample).loss;
}

template <typename T>
void copy_parameters(const BrcaModel<T>& from, BrcaModel<T>& to) {
  auto src = from.named_parameters();
  auto dst = to.named_parameters();
  require(src.size() == dst.size(), "copy_parameters: architectures differ");
  for (std::size_t i = 0; i < src.size(); ++i) {
    require(src[i].name == dst[i].name && src[i].tensor.shape() == dst[i].tensor.shape(),
            "copy_parameters: parameter " + src[i].name + " differs");
    std::copy(src[i].tensor.values().begin(), src[i].tensor.values().end(),
              dst[i].tensor.values().begin());
  }
}

template class BrcaModel<float>;
template class BrcaModel<double>;

#define BRCA_INSTANTIATE_MODEL(T)                                                             \
  template Tensor<T> encode(Graph<T>&, const BrcaModel<T>&, const ByteSample&);               \
  template Tensor<T> decode(Graph<T>&, const BrcaModel<T>&, const Tensor<T>&, std::size_t);   \
  template AutoencodeResult<T> autoencode(Graph<T>&, const BrcaModel<T>&, const ByteSample&); \
  template Tensor<T> autoencode_loss(Graph<T>&, const BrcaModel<T>&, const ByteSample&);      \
  template void copy_parameters(const BrcaModel<T>&, BrcaModel<T>&);

BRCA_INSTANTIATE_MODEL(float)
BRCA_INSTANTIATE_MODEL(double)

}  // namespace brca
