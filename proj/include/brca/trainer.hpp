#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "brca/checkpoint.hpp"
#include "brca/data.hpp"
#include "brca/model.hpp"

namespace brca {

struct TrainConfig {
  double lr0 = 0.001;
  std::size_t halve_every = 10;  // epochs
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t steps_per_epoch = 2000;
  std::size_t epochs = 30;
  std::size_t length_cap = 1024;
  std::uint64_t seed = 1;
  bool scale_recursion_grads = true;
  // abort when the step loss stays above 2 ln 256 for this many steps
  std::size_t divergence_window = 100;

  void validate() const;
};

double lr_at(std::size_t epoch, const TrainConfig& cfg);

/// One momentum buffer per parameter, allocated on the first step.
using MomentumBuffers = std::vector<std::vector<float>>;

/// g = grad + weight_decay * param; buf = momentum * buf + g; param -= lr * buf.
/// Throws DivergenceError naming the parameter when any grad is not finite;
/// nothing is updated in that case.
void sgd_step(std::span<const NamedTensor<float>> params, MomentumBuffers& buffers, double lr,
              const TrainConfig& cfg);

/// Divides the grads of every recursion-group parameter by `clones`.
template <typename T>
void scale_recursion_grads(BrcaModel<T>& model, std::size_t clones);

struct TrainState {
  std::size_t epoch = 0;  // epochs completed
  std::size_t step = 0;   // global steps completed
  std::mt19937_64 rng;
  MomentumBuffers momentum;
};

TrainState initial_state(const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based index of the finished epoch
  std::size_t step = 0;   // global step count at the end of the epoch
  double lr = 0.0;
  double loss = 0.0;        // mean step loss over the epoch
  double byte_error = 0.0;  // mean step byte error over the epoch
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& m);

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  // called after every epoch and before a divergence abort
  std::function<void(const TrainState&)> on_checkpoint;
  std::function<void(std::size_t step, double loss)> on_step;
};

struct StepOutcome {
  double loss = 0.0;
  double byte_error = 0.0;
};

/// Forward + backward (+ any grad rescaling) for one raw sample.
using StepFn = std::function<StepOutcome(const Bytes& raw)>;

/// Runs epochs [state.epoch, cfg.epochs) of single-sample steps drawn from
/// `corpus` with state.rng. Interrupting after an epoch and resuming from the
/// saved state reproduces the uninterrupted trajectory exactly.
std::vector<EpochMetrics> train_loop(std::span<const NamedTensor<float>> params, const StepFn& step,
                                     const Corpus& corpus, const TrainConfig& cfg,
                                     TrainState& state, const TrainHooks& hooks = {},
                                     std::size_t sample_cap = 0);

/// One training step of the autoencoder on `raw` (grads are overwritten).
StepOutcome brca_step(BrcaModel<float>& model, const Bytes& raw, bool scale_grads);

std::vector<EpochMetrics> train(BrcaModel<float>& model, const Corpus& corpus,
                                const TrainConfig& cfg, TrainState& state,
                                const TrainHooks& hooks = {});

// checkpoint plumbing shared by every model kind

void put_train_config(Checkpoint& ck, const TrainConfig& cfg);
TrainConfig get_train_config(const Checkpoint& ck);
void put_train_state(Checkpoint& ck, std::span<const NamedTensor<float>> params,
                     const TrainState& state);
TrainState get_train_state(const Checkpoint& ck, std::span<const NamedTensor<float>> params);
void put_parameters(Checkpoint& ck, std::span<const NamedTensor<float>> params);
void get_parameters(const Checkpoint& ck, std::span<const NamedTensor<float>> params);

void put_brca_config(Checkpoint& ck, const BrcaConfig& cfg);
BrcaConfig get_brca_config(const Checkpoint& ck);

Checkpoint make_checkpoint(const BrcaModel<float>& model, const TrainConfig& cfg,
                           const TrainState& state, std::uint64_t model_seed);
BrcaModel<float> brca_from_checkpoint(const Checkpoint& ck);

}  // namespace brca
