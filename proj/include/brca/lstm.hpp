#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brca/checkpoint.hpp"
#include "brca/data.hpp"
#include "brca/eval.hpp"
#include "brca/layers.hpp"
#include "brca/model.hpp"
#include "brca/trainer.hpp"

namespace brca {

/// What the decoder reads at step t > 0 while training.
///   ground_truth: the true byte t - 1 (teacher forcing)
///   generated:    its own argmax output at step t - 1
enum class FeedMode { ground_truth, generated };

std::string to_string(FeedMode mode);
FeedMode parse_feed_mode(const std::string& text);

/// Row of the embedding table read by the decoder at t = 0.
inline constexpr std::size_t kStartToken = 256;

struct LstmConfig {
  std::size_t embed = 1024;
  std::size_t hidden = 1024;
  FeedMode feed = FeedMode::ground_truth;
  std::size_t beam = 2;

  void validate() const;
};

/// Gate weights over [input, hidden], stacked i | f | o | g along the output.
template <typename T>
struct LstmCellParams {
  LinearParams<T> gates;  // [4 * hidden, embed + hidden]
  std::size_t hidden() const { return gates.out_dim() / 4; }
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
};

/// i, f, o = sigmoid(.), g = tanh(.) of the gate affine map;
/// c' = f * c + i * g, h' = o * tanh(c').
template <typename T>
LstmState<T> lstm_cell(Graph<T>& g, const Tensor<T>& x, const LstmState<T>& s,
                       const LstmCellParams<T>& p);

template <typename T>
class LstmModel {
 public:
  LstmModel(LstmConfig config, std::uint64_t seed);

  const LstmConfig& config() const { return config_; }
  std::vector<NamedTensor<T>> named_parameters() const;
  std::size_t parameter_count() const;

  Tensor<T> embedding;  // [257, embed]; row 256 is the start token
  LstmCellParams<T> encoder;
  LstmCellParams<T> decoder;
  LinearParams<T> output;  // [256, hidden]

 private:
  LstmConfig config_;
};

template <typename T>
LstmState<T> zero_state(std::size_t hidden);

/// Feeds `bytes` first to last from a zero state.
template <typename T>
LstmState<T> encode_forward(Graph<T>& g, const LstmModel<T>& m, std::span<const std::uint8_t> bytes);

/// Feeds `bytes` last to first. The caller appends the terminating null.
template <typename T>
LstmState<T> encode_reversed(Graph<T>& g, const LstmModel<T>& m, std::span<const std::uint8_t> bytes);

template <typename T>
struct DecodeTrainResult {
  Tensor<T> loss;    // [1], mean NLL over the target steps
  Tensor<T> logits;  // [256, target length]
};

/// Decoder NLL over `target` (which ends with the null).
template <typename T>
DecodeTrainResult<T> decode_train(Graph<T>& g, const LstmModel<T>& m, const LstmState<T>& start,
                                  std::span<const std::uint8_t> target, FeedMode feed);

struct BeamResult {
  std::vector<int> tokens;  // includes the eos token when terminated
  double log_prob = 0.0;
  bool terminated = false;
};

/// Lexicographic order used to break score ties.
inline bool better(const BeamResult& a, const BeamResult& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

/// Beam search over a generic step function returning per-token log
/// probabilities and the successor state.
///
/// Each step expands every running hypothesis by every token and keeps the
/// `beam` best expansions; those ending in `eos` are finalized. The search
/// stops once no hypothesis is running or the best finalized score is at
/// least the best running one (scores never increase). The result is the best
/// finalized hypothesis, or the best running one at max_len when that scores
/// higher (flagged unterminated). Ties go to the lexicographically smaller
/// token sequence.
template <typename State, typename Step>
BeamResult beam_search(const State& init, int start_token, int eos, std::size_t beam,
                       std::size_t max_len, Step step) {
  require(beam >= 1, "beam_search: beam must be at least 1");
  require(max_len >= 1, "beam_search: max_len must be at least 1");
  struct Hyp {
    BeamResult r;
    State state;
    int last;
  };
  std::vector<Hyp> running{{BeamResult{}, init, start_token}};
  std::vector<BeamResult> finished;
  auto best_of = [](const std::vector<BeamResult>& v) {
    return *std::min_element(v.begin(), v.end(), [](const auto& a, const auto& b) { return better(a, b); });
  };
  for (std::size_t t = 0; t < max_len && !running.empty(); ++t) {
    struct Cand {
      BeamResult r;
      std::size_t parent;
    };
    std::vector<Cand> cands;
    std::vector<State> next;
    for (std::size_t h = 0; h < running.size(); ++h) {
      auto [logp, ns] = step(running[h].state, running[h].last);
      next.push_back(std::move(ns));
      for (std::size_t v = 0; v < logp.size(); ++v) {
        Cand c{running[h].r, h};
        c.r.tokens.push_back(static_cast<int>(v));
        c.r.log_prob += logp[v];
        cands.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) { return better(a.r, b.r); });
    std::vector<Hyp> survivors;
    for (std::size_t k = 0; k < keep; ++k) {
      Cand& c = cands[k];
      const int tok = c.r.tokens.back();
      if (tok == eos) {
        c.r.terminated = true;
        finished.push_back(std::move(c.r));
      } else {
        survivors.push_back({std::move(c.r), next[c.parent], tok});
      }
    }
    running = std::move(survivors);
    if (!finished.empty() && !running.empty()) {
      double top = running.front().r.log_prob;
      for (const Hyp& h : running) top = std::max(top, h.r.log_prob);
      if (best_of(finished).log_prob >= top) running.clear();
    }
  }
  std::vector<BeamResult> pool = finished;
  for (Hyp& h : running) pool.push_back(h.r);
  return best_of(pool);
}

/// Argmax decoding: the smallest token among equal maxima, stopping at eos.
template <typename State, typename Step>
BeamResult greedy_search(const State& init, int start_token, int eos, std::size_t max_len, Step step) {
  BeamResult r;
  State s = init;
  int last = start_token;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto [logp, ns] = step(s, last);
    const auto it = std::max_element(logp.begin(), logp.end());
    last = static_cast<int>(it - logp.begin());
    r.tokens.push_back(last);
    r.log_prob += *it;
    s = std::move(ns);
    if (last == eos) {
      r.terminated = true;
      break;
    }
  }
  return r;
}

/// Reconstructs `raw` by encoding it reversed and beam-decoding up to
/// padded_length(raw.size()) bytes.
BeamResult lstm_decode(const LstmModel<float>& m, std::span<const std::uint8_t> raw, std::size_t beam);

Reconstructor lstm_reconstructor(const LstmModel<float>& m);

StepOutcome lstm_step(LstmModel<float>& m, const Bytes& raw);

std::vector<EpochMetrics> train(LstmModel<float>& model, const Corpus& corpus,
                                const TrainConfig& cfg, TrainState& state,
                                const TrainHooks& hooks = {});

void put_lstm_config(Checkpoint& ck, const LstmConfig& cfg);
LstmConfig get_lstm_config(const Checkpoint& ck);
Checkpoint make_checkpoint(const LstmModel<float>& model, const TrainConfig& cfg,
                           const TrainState& state, std::uint64_t model_seed);
LstmModel<float> lstm_from_checkpoint(const Checkpoint& ck);

extern template class LstmModel<float>;
extern template class LstmModel<double>;

}  // namespace brca
