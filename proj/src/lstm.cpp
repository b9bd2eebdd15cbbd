#include "brca/lstm.hpp"

#include <cmath>
#include <random>

#include "brca/error.hpp"
#include "brca/ops.hpp"

namespace brca {

std::string to_string(FeedMode mode) {
  return mode == FeedMode::ground_truth ? "ground_truth" : "generated";
}

FeedMode parse_feed_mode(const std::string& text) {
  if (text == "ground_truth") return FeedMode::ground_truth;
  if (text == "generated") return FeedMode::generated;
  throw ConfigError("unknown feed mode '" + text + "' (expected ground_truth or generated)");
}

void LstmConfig::validate() const {
  if (embed < 1 || hidden < 1) throw ConfigError("lstm.embed and lstm.hidden must be positive");
  if (beam < 1) throw ConfigError("lstm.beam must be at least 1");
}

template <typename T>
LstmState<T> lstm_cell(Graph<T>& g, const Tensor<T>& x, const LstmState<T>& s,
                       const LstmCellParams<T>& p) {
  const std::size_t H = p.hidden();
  require(s.h.shape() == Shape{H} && s.c.shape() == Shape{H},
          "lstm_cell: shape mismatch, state must be [" + std::to_string(H) + "]");
  require(x.shape().rank() == 1 && x.numel() + H == p.gates.in_dim(),
          "lstm_cell: shape mismatch, input is " + x.shape().str());
  const std::vector<Tensor<T>> parts{x, s.h};
  const Tensor<T> z = linear(g, concat<T>(g, parts), p.gates);
  const Tensor<T> i = sigmoid(g, slice(g, z, 0, H));
  const Tensor<T> f = sigmoid(g, slice(g, z, H, H));
  const Tensor<T> o = sigmoid(g, slice(g, z, 2 * H, H));
  const Tensor<T> cand = brca::tanh(g, slice(g, z, 3 * H, H));
  LstmState<T> out;
  out.c = add(g, mul(g, f, s.c), mul(g, i, cand));
  out.h = mul(g, o, brca::tanh(g, out.c));
  return out;
}

template <typename T>
LstmModel<T>::LstmModel(LstmConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  embedding = Tensor<T>(Shape{kByteClasses + 1, config_.embed}, true);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (T& v : embedding.values()) v = static_cast<T>(u(rng));
  const std::size_t H = config_.hidden;
  encoder.gates = make_linear<T>(config_.embed + H, 4 * H, rng);
  decoder.gates = make_linear<T>(config_.embed + H, 4 * H, rng);
  output = make_linear<T>(H, kByteClasses, rng);
}

template <typename T>
std::vector<NamedTensor<T>> LstmModel<T>::named_parameters() const {
  return {{"embedding", embedding},
          {"encoder.weight", encoder.gates.weight},
          {"encoder.bias", encoder.gates.bias},
          {"decoder.weight", decoder.gates.weight},
          {"decoder.bias", decoder.gates.bias},
          {"output.weight", output.weight},
          {"output.bias", output.bias}};
}

template <typename T>
std::size_t LstmModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
LstmState<T> zero_state(std::size_t hidden) {
  return {Tensor<T>(Shape{hidden}), Tensor<T>(Shape{hidden})};
}

template <typename T>
LstmState<T> encode_forward(Graph<T>& g, const LstmModel<T>& m, std::span<const std::uint8_t> bytes) {
  require(!bytes.empty(), "encode: empty input");
  LstmState<T> s = zero_state<T>(m.config().hidden);
  for (std::uint8_t b : bytes) s = lstm_cell(g, embedding(g, m.embedding, b), s, m.encoder);
  return s;
}

template <typename T>
LstmState<T> encode_reversed(Graph<T>& g, const LstmModel<T>& m, std::span<const std::uint8_t> bytes) {
  const Bytes rev(bytes.rbegin(), bytes.rend());
  return encode_forward(g, m, rev);
}

template <typename T>
DecodeTrainResult<T> decode_train(Graph<T>& g, const LstmModel<T>& m, const LstmState<T>& start,
                                  std::span<const std::uint8_t> target, FeedMode feed) {
  require(!target.empty() && target.back() == 0, "decode_train: target must end with the null");
  LstmState<T> s = start;
  std::vector<Tensor<T>> hs;
  std::size_t prev = kStartToken;
  for (std::size_t t = 0; t < target.size(); ++t) {
    s = lstm_cell(g, embedding(g, m.embedding, prev), s, m.decoder);
    hs.push_back(s.h);
    if (feed == FeedMode::ground_truth) {
      prev = target[t];
    } else {
      // the generated byte is a discrete choice; no gradient flows through it
      Graph<T> probe(false);
      const Tensor<T> logit = linear(probe, s.h, m.output);
      const auto v = logit.values();
      prev = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    }
  }
  DecodeTrainResult<T> r;
  r.logits = linear(g, stack_columns<T>(g, hs), m.output);
  std::vector<int> targets(target.begin(), target.end());
  std::vector<std::size_t> mask(target.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = i;
  r.loss = softmax_nll(g, r.logits, targets, mask);
  return r;
}

namespace {

std::vector<double> log_softmax(std::span<const float> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (float v : z) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<double>(z[i]) - lse;
  return out;
}

}  // namespace

BeamResult lstm_decode(const LstmModel<float>& m, std::span<const std::uint8_t> raw, std::size_t beam) {
  Bytes input(raw.begin(), raw.end());
  input.push_back(0);
  Graph<float> g(false);
  const LstmState<float> start = encode_reversed(g, m, input);
  auto step = [&m](const LstmState<float>& s, int last) {
    Graph<float> sg(false);
    LstmState<float> next = lstm_cell(sg, embedding(sg, m.embedding, static_cast<std::size_t>(last)), s, m.decoder);
    const Tensor<float> logits = linear(sg, next.h, m.output);
    return std::pair{log_softmax(logits.values()), std::move(next)};
  };
  return beam_search(start, static_cast<int>(kStartToken), 0, beam, padded_length(raw.size()), step);
}

Reconstructor lstm_reconstructor(const LstmModel<float>& m) {
  return [&m](const Bytes& raw) {
    Reconstruction r;
    r.sample = prepare(raw);
    const BeamResult b = lstm_decode(m, raw, m.config().beam);
    Bytes text;
    for (int t : b.tokens) {
      if (t == 0) break;
      text.push_back(static_cast<std::uint8_t>(t));
    }
    r.pred = prediction_from_text(std::move(text), b.terminated);
    return r;
  };
}

StepOutcome lstm_step(LstmModel<float>& m, const Bytes& raw) {
  const ByteSample sample = prepare(raw);
  Bytes target = sample.raw;
  target.push_back(0);
  Graph<float> g;
  const LstmState<float> start = encode_reversed(g, m, target);
  const DecodeTrainResult<float> r = decode_train(g, m, start, target, m.config().feed);
  g.backward(r.loss);
  StepOutcome out;
  out.loss = r.loss.at(0);
  // teacher-forced argmax, a cheap proxy for the decoded error
  out.byte_error = byte_error(decode_output(r.logits), sample);
  return out;
}

std::vector<EpochMetrics> train(LstmModel<float>& model, const Corpus& corpus,
                                const TrainConfig& cfg, TrainState& state,
                                const TrainHooks& hooks) {
  const auto params = model.named_parameters();
  StepFn step = [&model](const Bytes& raw) { return lstm_step(model, raw); };
  return train_loop(params, step, corpus, cfg, state, hooks);
}

void put_lstm_config(Checkpoint& ck, const LstmConfig& cfg) {
  ck.metadata["model.kind"] = "lstm";
  ck.metadata["lstm.embed"] = std::to_string(cfg.embed);
  ck.metadata["lstm.hidden"] = std::to_string(cfg.hidden);
  ck.metadata["lstm.feed"] = to_string(cfg.feed);
  ck.metadata["lstm.beam"] = std::to_string(cfg.beam);
}

LstmConfig get_lstm_config(const Checkpoint& ck) {
  if (ck.meta("model.kind") != "lstm") {
    throw CheckpointError("checkpoint holds a '" + ck.meta("model.kind") + "' model, not an LSTM");
  }
  LstmConfig c;
  try {
    c.embed = std::stoull(ck.meta("lstm.embed"));
    c.hidden = std::stoull(ck.meta("lstm.hidden"));
    c.beam = std::stoull(ck.meta("lstm.beam"));
  } catch (const std::logic_error&) {
    throw CheckpointError("malformed LSTM metadata");
  }
  c.feed = parse_feed_mode(ck.meta("lstm.feed"));
  return c;
}

Checkpoint make_checkpoint(const LstmModel<float>& model, const TrainConfig& cfg,
                           const TrainState& state, std::uint64_t model_seed) {
  Checkpoint ck;
  put_lstm_config(ck, model.config());
  ck.metadata["model.seed"] = std::to_string(model_seed);
  put_train_config(ck, cfg);
  const auto params = model.named_parameters();
  put_parameters(ck, params);
  put_train_state(ck, params, state);
  return ck;
}

LstmModel<float> lstm_from_checkpoint(const Checkpoint& ck) {
  LstmModel<float> m(get_lstm_config(ck), std::stoull(ck.meta("model.seed")));
  get_parameters(ck, m.named_parameters());
  return m;
}

#define BRCA_INSTANTIATE_LSTM(T)                                                              \
  template class LstmModel<T>;                                                                \
  template LstmState<T> lstm_cell(Graph<T>&, const Tensor<T>&, const LstmState<T>&,           \
                                  const LstmCellParams<T>&);                                  \
  template LstmState<T> zero_state<T>(std::size_t);                                           \
  template LstmState<T> encode_forward(Graph<T>&, const LstmModel<T>&,                        \
                                       std::span<const std::uint8_t>);                        \
  template LstmState<T> encode_reversed(Graph<T>&, const LstmModel<T>&,                       \
                                        std::span<const std::uint8_t>);                       \
  template DecodeTrainResult<T> decode_train(Graph<T>&, const LstmModel<T>&,                  \
                                             const LstmState<T>&, std::span<const std::uint8_t>, \
                                             FeedMode);

BRCA_INSTANTIATE_LSTM(float)
BRCA_INSTANTIATE_LSTM(double)

}  // namespace brca
