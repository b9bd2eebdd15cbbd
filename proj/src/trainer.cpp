#include "brca/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "brca/error.hpp"
#include "brca/eval.hpp"

namespace brca {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be positive");
  if (halve_every < 1) throw ConfigError("train.halve_every must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be at least 1");
  if (length_cap < 1) throw ConfigError("train.length_cap must be at least 1");
  if (divergence_window < 1) throw ConfigError("train.divergence_window must be at least 1");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(0.5, static_cast<double>(epoch / cfg.halve_every));
}

void sgd_step(std::span<const NamedTensor<float>> params, MomentumBuffers& buffers, double lr,
              const TrainConfig& cfg) {
  if (buffers.empty()) {
    for (const auto& p : params) buffers.emplace_back(p.tensor.numel(), 0.0f);
  }
  require(buffers.size() == params.size(), "sgd_step: one momentum buffer per parameter");
  for (const auto& p : params) {
    Tensor<float> t = p.tensor;
    for (float g : t.grad()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in " + p.name);
    }
  }
  const auto m = static_cast<float>(cfg.momentum);
  const auto wd = static_cast<float>(cfg.weight_decay);
  const auto step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> t = params[i].tensor;
    std::span<float> w = t.values();
    std::span<const float> g = std::as_const(t).grad();
    std::vector<float>& buf = buffers[i];
    require(buf.size() == w.size(), "sgd_step: momentum buffer size mismatch for " + params[i].name);
    for (std::size_t k = 0; k < w.size(); ++k) {
      buf[k] = m * buf[k] + (g[k] + wd * w[k]);
      w[k] -= step * buf[k];
    }
  }
}

template <typename T>
void scale_recursion_grads(BrcaModel<T>& model, std::size_t clones) {
  require(clones >= 1, "scale_recursion_grads: clones must be at least 1");
  if (clones == 1) return;
  const T inv = T(1) / static_cast<T>(clones);
  for (Tensor<T> p : model.recursion_parameters()) {
    if (!p.has_grad()) continue;
    for (T& g : p.grad()) g *= inv;
  }
}

template void scale_recursion_grads(BrcaModel<float>&, std::size_t);
template void scale_recursion_grads(BrcaModel<double>&, std::size_t);

TrainState initial_state(const TrainConfig& cfg) {
  TrainState s;
  s.rng.seed(cfg.seed);
  return s;
}

void write_metrics_header(std::ostream& out) { out << "epoch,step,lr,loss,byte_error\n"; }

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  std::ostringstream row;
  row << std::setprecision(9) << m.epoch << ',' << m.step << ',' << m.lr << ',' << m.loss << ','
      << m.byte_error << '\n';
  out << row.str();
}

std::vector<EpochMetrics> train_loop(std::span<const NamedTensor<float>> params, const StepFn& step,
                                     const Corpus& corpus, const TrainConfig& cfg,
                                     TrainState& state, const TrainHooks& hooks,
                                     std::size_t sample_cap) {
  cfg.validate();
  if (corpus.empty()) throw InputError("training corpus " + corpus.source() + " is empty");
  const std::size_t cap = sample_cap == 0 ? cfg.length_cap : std::min(sample_cap, cfg.length_cap);
  const double limit = 2.0 * std::log(256.0);
  std::vector<EpochMetrics> history;
  std::size_t high_run = 0;

  auto abort = [&](const std::string& why) {
    if (hooks.on_checkpoint) hooks.on_checkpoint(state);
    throw DivergenceError(why + " at step " + std::to_string(state.step));
  };

  while (state.epoch < cfg.epochs) {
    const double lr = lr_at(state.epoch, cfg);
    double loss_sum = 0.0;
    double err_sum = 0.0;
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
      const Bytes raw = sample_raw(corpus, state.rng, cap);
      for (const auto& p : params) {
        Tensor<float> t = p.tensor;
        t.zero_grad();
      }
      const StepOutcome out = step(raw);
      if (!std::isfinite(out.loss)) abort("loss is not finite");
      high_run = out.loss > limit ? high_run + 1 : 0;
      if (high_run >= cfg.divergence_window) {
        abort("loss above 2 ln 256 for " + std::to_string(high_run) + " consecutive steps");
      }
      try {
        sgd_step(params, state.momentum, lr, cfg);
      } catch (const DivergenceError& e) {
        abort(e.what());
      }
      ++state.step;
      loss_sum += out.loss;
      err_sum += out.byte_error;
      if (hooks.on_step) hooks.on_step(state.step, out.loss);
    }
    ++state.epoch;
    EpochMetrics m;
    m.epoch = state.epoch;
    m.step = state.step;
    m.lr = lr;
    m.loss = loss_sum / static_cast<double>(cfg.steps_per_epoch);
    m.byte_error = err_sum / static_cast<double>(cfg.steps_per_epoch);
    history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
    if (hooks.on_checkpoint) hooks.on_checkpoint(state);
  }
  return history;
}

StepOutcome brca_step(BrcaModel<float>& model, const Bytes& raw, bool scale_grads) {
  const ByteSample sample = model.prepare(raw);
  Graph<float> g;
  const AutoencodeResult<float> res = autoencode(g, model, sample);
  g.backward(res.loss);
  if (scale_grads && model.config().share_recursion_weights) {
    const std::size_t r = model.recursions_for(sample);
    if (r > 0) scale_recursion_grads(model, r);
  }
  StepOutcome out;
  out.loss = res.loss.at(0);
  out.byte_error = byte_error(decode_output(res.logits), sample);
  return out;
}

std::vector<EpochMetrics> train(BrcaModel<float>& model, const Corpus& corpus,
                                const TrainConfig& cfg, TrainState& state,
                                const TrainHooks& hooks) {
  const auto params = model.named_parameters();
  // the static model holds static_length - 1 bytes plus the null
  const std::size_t cap =
      model.config().share_recursion_weights ? 0 : model.config().static_length - 1;
  StepFn step = [&model, &cfg](const Bytes& raw) {
    return brca_step(model, raw, cfg.scale_recursion_grads);
  };
  return train_loop(params, step, corpus, cfg, state, hooks, cap);
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::size_t to_size(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw CheckpointError("metadata " + key + " is not an integer: " + v);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw CheckpointError("metadata " + key + " is not a number: " + v);
  }
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

void put_train_config(Checkpoint& ck, const TrainConfig& cfg) {
  auto& m = ck.metadata;
  m["train.lr0"] = fmt(cfg.lr0);
  m["train.halve_every"] = std::to_string(cfg.halve_every);
  m["train.momentum"] = fmt(cfg.momentum);
  m["train.weight_decay"] = fmt(cfg.weight_decay);
  m["train.steps_per_epoch"] = std::to_string(cfg.steps_per_epoch);
  m["train.epochs"] = std::to_string(cfg.epochs);
  m["train.length_cap"] = std::to_string(cfg.length_cap);
  m["train.seed"] = std::to_string(cfg.seed);
  m["train.scale_recursion_grads"] = cfg.scale_recursion_grads ? "true" : "false";
  m["train.divergence_window"] = std::to_string(cfg.divergence_window);
}

TrainConfig get_train_config(const Checkpoint& ck) {
  TrainConfig c;
  auto size = [&](const char* k) { return to_size(ck.meta(k), k); };
  auto real = [&](const char* k) { return to_double(ck.meta(k), k); };
  c.lr0 = real("train.lr0");
  c.halve_every = size("train.halve_every");
  c.momentum = real("train.momentum");
  c.weight_decay = real("train.weight_decay");
  c.steps_per_epoch = size("train.steps_per_epoch");
  c.epochs = size("train.epochs");
  c.length_cap = size("train.length_cap");
  c.seed = size("train.seed");
  c.scale_recursion_grads = ck.meta("train.scale_recursion_grads") == "true";
  c.divergence_window = size("train.divergence_window");
  return c;
}

void put_parameters(Checkpoint& ck, std::span<const NamedTensor<float>> params) {
  for (const auto& p : params) {
    const auto dims = p.tensor.shape().dims();
    ArrayRecord a{"param/" + p.name, {dims.begin(), dims.end()}, {}};
    a.data.assign(p.tensor.values().begin(), p.tensor.values().end());
    ck.arrays.push_back(std::move(a));
  }
}

void get_parameters(const Checkpoint& ck, std::span<const NamedTensor<float>> params) {
  for (const auto& p : params) {
    const ArrayRecord& a = ck.array("param/" + p.name);
    const auto dims = p.tensor.shape().dims();
    if (!std::equal(dims.begin(), dims.end(), a.shape.begin(), a.shape.end())) {
      throw CheckpointError("parameter " + p.name + " has shape " + p.tensor.shape().str() +
                            " in the model but a different shape in the checkpoint");
    }
    Tensor<float> t = p.tensor;
    std::copy(a.data.begin(), a.data.end(), t.values().begin());
  }
}

void put_train_state(Checkpoint& ck, std::span<const NamedTensor<float>> params,
                     const TrainState& state) {
  ck.metadata["state.epoch"] = std::to_string(state.epoch);
  ck.metadata["state.step"] = std::to_string(state.step);
  std::ostringstream rng;
  rng << state.rng;
  ck.metadata["state.rng"] = rng.str();
  if (state.momentum.empty()) return;
  require(state.momentum.size() == params.size(), "momentum buffers do not match the parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto dims = params[i].tensor.shape().dims();
    ck.arrays.push_back({"momentum/" + params[i].name, {dims.begin(), dims.end()}, state.momentum[i]});
  }
}

TrainState get_train_state(const Checkpoint& ck, std::span<const NamedTensor<float>> params) {
  TrainState s;
  s.epoch = to_size(ck.meta("state.epoch"), "state.epoch");
  s.step = to_size(ck.meta("state.step"), "state.step");
  std::istringstream rng(ck.meta("state.rng"));
  rng >> s.rng;
  if (!rng) throw CheckpointError("metadata state.rng is malformed");
  bool any = false;
  for (const auto& a : ck.arrays) any = any || a.name.starts_with("momentum/");
  if (!any) return s;
  for (const auto& p : params) {
    const ArrayRecord& a = ck.array("momentum/" + p.name);
    if (numel(a.shape) != p.tensor.numel()) {
      throw CheckpointError("momentum buffer for " + p.name + " has the wrong size");
    }
    s.momentum.push_back(a.data);
  }
  return s;
}

void put_brca_config(Checkpoint& ck, const BrcaConfig& cfg) {
  auto& m = ck.metadata;
  m["model.kind"] = "brca";
  m["model.n"] = std::to_string(cfg.n);
  m["model.features"] = std::to_string(cfg.features);
  m["model.code_length"] = std::to_string(cfg.code_length);
  m["model.pool"] = to_string(cfg.pool);
  m["model.share_recursion_weights"] = cfg.share_recursion_weights ? "true" : "false";
  m["model.static_length"] = std::to_string(cfg.static_length);
  m["model.linear_mode"] = to_string(cfg.linear_mode);
  m["model.shuffle"] = to_string(cfg.shuffle);
  m["model.zero_init_residual"] = cfg.zero_init_residual ? "true" : "false";
  m["model.output_init_scale"] = fmt(cfg.output_init_scale);
}

BrcaConfig get_brca_config(const Checkpoint& ck) {
  if (ck.meta("model.kind") != "brca") {
    throw CheckpointError("checkpoint holds a '" + ck.meta("model.kind") +
                          "' model, not a convolutional autoencoder");
  }
  BrcaConfig c;
  auto size = [&](const char* k) { return to_size(ck.meta(k), k); };
  c.n = size("model.n");
  c.features = size("model.features");
  c.code_length = size("model.code_length");
  c.pool = parse_pool_kind(ck.meta("model.pool"));
  c.share_recursion_weights = ck.meta("model.share_recursion_weights") == "true";
  c.static_length = size("model.static_length");
  c.linear_mode = parse_linear_mode(ck.meta("model.linear_mode"));
  c.shuffle = parse_shuffle_order(ck.meta("model.shuffle"));
  c.zero_init_residual = ck.meta("model.zero_init_residual") == "true";
  c.output_init_scale = to_double(ck.meta("model.output_init_scale"), "model.output_init_scale");
  return c;
}

Checkpoint make_checkpoint(const BrcaModel<float>& model, const TrainConfig& cfg,
                           const TrainState& state, std::uint64_t model_seed) {
  Checkpoint ck;
  put_brca_config(ck, model.config());
  ck.metadata["model.seed"] = std::to_string(model_seed);
  put_train_config(ck, cfg);
  const auto params = model.named_parameters();
  put_parameters(ck, params);
  put_train_state(ck, params, state);
  return ck;
}

BrcaModel<float> brca_from_checkpoint(const Checkpoint& ck) {
  BrcaModel<float> model(get_brca_config(ck), to_size(ck.meta("model.seed"), "model.seed"));
  get_parameters(ck, model.named_parameters());
  return model;
}

}  // namespace brca
