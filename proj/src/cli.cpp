#include "brca/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "brca/checkpoint.hpp"
#include "brca/config.hpp"
#include "brca/error.hpp"
#include "brca/eval.hpp"
#include "brca/lstm.hpp"
#include "brca/model.hpp"
#include "brca/trainer.hpp"

#ifndef BRCA_VERSION
#define BRCA_VERSION "dev"
#endif

namespace brca {

const char* version() { return BRCA_VERSION; }

namespace {

namespace fs = std::filesystem;

struct RunSpec {
  std::string command;
  std::string experiment;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string checkpoint;
  std::string resume;
  std::size_t length = 1024;
};

Config resolve_config(const RunSpec& spec) {
  Config c = spec.config_path.empty() ? Config::defaults() : Config::load(spec.config_path);
  for (const std::string& o : spec.overrides) c.apply_override(o);
  return c;
}

fs::path output_dir(const RunSpec& spec, const Config& c, const std::string& label) {
  if (!spec.out_dir.empty()) return spec.out_dir;
  const char* root = std::getenv("BRCA_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / (label + "-seed" + c.get("train.seed"));
}

void write_manifest(const fs::path& dir, const RunSpec& spec, const Config& c) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.toml", std::ios::trunc);
    out << c.to_toml();
    if (!out) throw InputError("cannot write " + (dir / "config.toml").string());
  }
  nlohmann::ordered_json j;
  j["command"] = spec.experiment.empty() ? spec.command : spec.command + " " + spec.experiment;
  j["version"] = version();
  j["train_seed"] = c.get_u64("train.seed");
  j["model_seed"] = c.get_u64("model.seed");
  j["eval_seed"] = c.get_u64("eval.seed");
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream toml(c.to_toml());
  std::string section;
  for (std::string line; std::getline(toml, line);) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    cfg[section + "." + line.substr(0, eq)] = line.substr(eq + 4, line.size() - eq - 5);
  }
  j["config"] = cfg;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// A trained model of either kind together with its reconstructor.
struct LoadedModel {
  std::unique_ptr<BrcaModel<float>> brca;
  std::unique_ptr<LstmModel<float>> lstm;
  Reconstructor rec;
  std::size_t eval_cap = 0;
};

LoadedModel load_model(const fs::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  LoadedModel m;
  const std::string& kind = ck.meta("model.kind");
  if (kind == "brca") {
    m.brca = std::make_unique<BrcaModel<float>>(brca_from_checkpoint(ck));
    m.rec = brca_reconstructor(*m.brca);
    if (!m.brca->config().share_recursion_weights) m.eval_cap = m.brca->config().static_length - 1;
  } else if (kind == "lstm") {
    m.lstm = std::make_unique<LstmModel<float>>(lstm_from_checkpoint(ck));
    m.rec = lstm_reconstructor(*m.lstm);
  } else {
    throw CheckpointError("unknown model kind '" + kind + "' in " + path.string());
  }
  return m;
}

fs::path checkpoint_path(const RunSpec& spec, const Config& c, const std::string& what) {
  fs::path p = spec.checkpoint.empty() ? c.get_path("experiment.checkpoint") : fs::path(spec.checkpoint);
  if (p.empty()) {
    throw ConfigError(what + " needs a trained checkpoint: pass --checkpoint or set experiment.checkpoint");
  }
  if (!fs::exists(p)) throw ConfigError(what + " needs a trained checkpoint, but " + p.string() + " does not exist");
  return p;
}

EvalOptions capped(EvalOptions opt, std::size_t cap) {
  if (cap > 0) opt.length_cap = opt.length_cap == 0 ? cap : std::min(opt.length_cap, cap);
  return opt;
}

std::string stem(const std::string& name, const EvalOptions& opt) {
  return name + "-seed" + std::to_string(opt.seed);
}

template <typename Model>
int run_training(Model& model, const RunSpec& spec, const Config& c, const fs::path& dir,
                 std::ostream& out) {
  const TrainConfig cfg = train_config(c);
  const std::uint64_t model_seed = c.get_u64("model.seed");
  const Corpus corpus = Corpus::load(c.get_path("data.train"), cfg.length_cap);
  TrainState state = initial_state(cfg);
  if (!spec.resume.empty()) {
    const Checkpoint ck = load_checkpoint(spec.resume);
    get_parameters(ck, model.named_parameters());
    state = get_train_state(ck, model.named_parameters());
    out << "resuming from " << spec.resume << " at epoch " << state.epoch << '\n';
  }
  const fs::path csv_path = dir / "metrics.csv";
  const bool append = !spec.resume.empty() && fs::exists(csv_path) && fs::file_size(csv_path) > 0;
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw InputError("cannot write " + csv_path.string());
  if (!append) write_metrics_header(csv);

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochMetrics& m) {
    write_metrics_row(csv, m);
    csv.flush();
    out << "epoch " << m.epoch << " step " << m.step << " lr " << m.lr << " loss " << fixed(m.loss)
        << " byte_error " << fixed(m.byte_error) << '\n';
  };
  hooks.on_checkpoint = [&](const TrainState& s) {
    save_checkpoint(dir / "checkpoint.bin", make_checkpoint(model, cfg, s, model_seed));
  };
  out << "training " << model.parameter_count() << " parameters on " << corpus.size()
      << " samples from " << corpus.source() << '\n';
  train(model, corpus, cfg, state, hooks);
  out << "checkpoint written to " << (dir / "checkpoint.bin").string() << '\n';
  return kExitOk;
}

int cmd_train(const RunSpec& spec, std::ostream& out) {
  const Config c = resolve_config(spec);
  const std::string kind = c.get("model.kind");
  const fs::path dir = output_dir(spec, c, "train-" + kind);
  if (kind == "brca") {
    BrcaModel<float> model(brca_config(c), c.get_u64("model.seed"));
    train_config(c);
    write_manifest(dir, spec, c);
    return run_training(model, spec, c, dir, out);
  }
  if (kind == "lstm") {
    LstmModel<float> model(lstm_config(c), c.get_u64("model.seed"));
    train_config(c);
    write_manifest(dir, spec, c);
    return run_training(model, spec, c, dir, out);
  }
  throw ConfigError("model.kind must be brca or lstm, got '" + kind + "'");
}

void print_eval(std::ostream& out, const MetricsReport& r) {
  out << r.name << ": byte_error " << fixed(r.scalars.at("byte_error")) << " pooled "
      << fixed(r.scalars.at("byte_error_pooled")) << " unterminated "
      << fixed(r.scalars.at("unterminated_rate")) << " eos_exact "
      << fixed(r.scalars.at("eos_exact_rate")) << " over " << r.scalars.at("samples")
      << " samples\n";
}

Corpus load_split(const Config& c, const std::string& split) {
  return Corpus::load(c.get_path("data." + split), c.get_size("train.length_cap"));
}

int cmd_eval(const RunSpec& spec, std::ostream& out) {
  const Config c = resolve_config(spec);
  const fs::path ckpt = checkpoint_path(spec, c, "eval");
  const fs::path dir = output_dir(spec, c, "eval");
  write_manifest(dir, spec, c);
  const LoadedModel m = load_model(ckpt);
  const EvalOptions opt = capped(eval_options(c), m.eval_cap);
  for (const std::string split : {"train", "test"}) {
    MetricsReport r = evaluate(m.rec, load_split(c, split), opt, "eval-" + split);
    r.provenance["checkpoint"] = ckpt.string();
    r.write(dir, stem(r.name, opt));
    print_eval(out, r);
  }
  return kExitOk;
}

// Records whether the qualitative ordering holds; an inversion is reported,
// never treated as a failure.
void check_trend(MetricsReport& cmp, const std::string& experiment, std::ostream& out) {
  const Series& test = cmp.series.at("test_error");
  bool holds = true;
  std::string rule;
  if (experiment == "pooling") {
    rule = "max pooling has the lowest test error";
    for (const auto& [name, v] : test) holds = holds && test.front().second <= v;
  } else if (experiment == "static") {
    rule = "recursive test error <= static test error";
    holds = test.at(0).second <= test.at(1).second;
  } else {
    rule = "test error non-increasing in n";
    for (std::size_t i = 1; i < test.size(); ++i) holds = holds && test[i].second <= test[i - 1].second;
  }
  cmp.scalars["trend_holds"] = holds ? 1.0 : 0.0;
  cmp.provenance["trend_rule"] = rule;
  out << experiment << " trend (" << rule << "): " << (holds ? "holds" : "INVERTED, flagged for investigation")
      << '\n';
}

int cmd_ablation(const RunSpec& spec, const Config& c, const fs::path& dir, std::ostream& out) {
  const BrcaConfig base = brca_config(c);
  const TrainConfig cfg = train_config(c);
  const EvalOptions opt = eval_options(c);
  const Corpus train_corpus = load_split(c, "train");
  const Corpus test_corpus = load_split(c, "test");
  std::vector<AblationVariant> variants = spec.experiment == "pooling" ? pooling_variants(base)
                                          : spec.experiment == "static" ? static_variants(base)
                                                                         : depth_variants(base);
  std::vector<MetricsReport> runs;
  for (const AblationVariant& v : variants) {
    out << "training variant " << v.name << '\n';
    MetricsReport r = ablation_run(v, train_corpus, test_corpus, cfg, opt, c.get_u64("model.seed"));
    r.write(dir, spec.experiment + "-" + v.name + "-seed" + std::to_string(cfg.seed));
    out << v.name << ": train_error " << fixed(r.scalars.at("train_error")) << " test_error "
        << fixed(r.scalars.at("test_error")) << '\n';
    runs.push_back(std::move(r));
  }
  MetricsReport cmp = compare_variants(spec.experiment + "-comparison", runs);
  check_trend(cmp, spec.experiment, out);
  cmp.write(dir, cmp.name + "-seed" + std::to_string(cfg.seed));
  return kExitOk;
}

int cmd_lstm(const RunSpec& spec, const Config& c, const fs::path& dir, std::ostream& out) {
  LstmModel<float> model(lstm_config(c), c.get_u64("model.seed"));
  RunSpec train_spec = spec;
  train_spec.resume.clear();
  run_training(model, train_spec, c, dir, out);
  const EvalOptions opt = eval_options(c);
  std::vector<MetricsReport> rows;
  MetricsReport lstm_row;
  lstm_row.name = "lstm";
  const Reconstructor rec = lstm_reconstructor(model);
  for (const std::string split : {"train", "test"}) {
    MetricsReport r = evaluate(rec, load_split(c, split), opt, "lstm-" + split);
    r.write(dir, stem(r.name, opt));
    print_eval(out, r);
    lstm_row.scalars[split + "_error"] = r.scalars.at("byte_error");
  }
  rows.push_back(lstm_row);
  const fs::path ckpt = spec.checkpoint.empty() ? c.get_path("experiment.checkpoint") : fs::path(spec.checkpoint);
  if (!ckpt.empty()) {
    const LoadedModel m = load_model(ckpt);
    MetricsReport conv_row;
    conv_row.name = "convolutional";
    for (const std::string split : {"train", "test"}) {
      const MetricsReport r = evaluate(m.rec, load_split(c, split), capped(opt, m.eval_cap), "conv-" + split);
      print_eval(out, r);
      conv_row.scalars[split + "_error"] = r.scalars.at("byte_error");
    }
    rows.push_back(conv_row);
  }
  MetricsReport cmp = compare_variants("lstm-comparison", rows);
  cmp.provenance["seed"] = std::to_string(opt.seed);
  cmp.write(dir, stem(cmp.name, opt));
  return kExitOk;
}

int cmd_experiment(const RunSpec& spec, std::ostream& out) {
  const Config c = resolve_config(spec);
  const std::string& e = spec.experiment;
  if (e == "pooling" || e == "static" || e == "depth" || e == "lstm") {
    const fs::path dir = output_dir(spec, c, "experiment-" + e);
    write_manifest(dir, spec, c);
    return e == "lstm" ? cmd_lstm(spec, c, dir, out) : cmd_ablation(spec, c, dir, out);
  }
  const fs::path ckpt = checkpoint_path(spec, c, "experiment " + e);
  const fs::path dir = output_dir(spec, c, "experiment-" + e);
  write_manifest(dir, spec, c);
  const LoadedModel m = load_model(ckpt);
  const EvalOptions opt = capped(eval_options(c), m.eval_cap);
  for (const std::string split : {"train", "test"}) {
    const Corpus corpus = load_split(c, split);
    MetricsReport r;
    if (e == "eos") {
      r = evaluate(m.rec, corpus, opt, "eos-" + split);
      const Histogram& h = r.histograms.at("eos_diff");
      out << r.name << ": eos_diff == 0 for " << fixed(100.0 * r.scalars.at("eos_exact_rate"), 2)
          << "% of samples, " << h.counts.size() << " distinct differences\n";
    } else if (e == "mutate") {
      const std::vector<double> grid = default_p_grid();
      r = mutation_experiment(m.rec, corpus, grid, opt, "mutate-" + split);
      out << r.name << ":\n  p    vs_groundtruth  vs_mutated\n";
      for (std::size_t i = 0; i < grid.size(); ++i) {
        out << "  " << r.series.at("error_vs_groundtruth")[i].first << "  "
            << fixed(r.series.at("error_vs_groundtruth")[i].second) << "          "
            << fixed(r.series.at("error_vs_mutated")[i].second) << '\n';
      }
    } else {
      r = error_by_length(m.rec, corpus, opt, "length-" + split);
      out << r.name << ":\n";
      for (const auto& [bin, v] : r.series.at("bin_mean_error")) {
        out << "  bin " << bin << " level " << bin_level(std::stoull(bin)) << " error " << fixed(v) << '\n';
      }
    }
    r.provenance["checkpoint"] = ckpt.string();
    r.write(dir, stem(r.name, opt));
  }
  return kExitOk;
}

int cmd_inspect(const RunSpec& spec, std::ostream& out) {
  const Config c = resolve_config(spec);
  const BrcaConfig cfg = brca_config(c);
  require(spec.length >= 2, "inspect: length must be at least 2 (one byte plus the null)");
  const BrcaModel<float> model(cfg, c.get_u64("model.seed"));
  // --length counts the terminating null, so 1024 means 1023 raw bytes
  std::size_t len = spec.length - 1;
  if (!cfg.share_recursion_weights) len = std::min(len, cfg.static_length - 1);
  const ByteSample sample = model.prepare(Bytes(len, 'a'));
  const std::size_t P = sample.padded_len;
  const std::size_t r = recursion_count(P);
  Graph<float> g(false);
  const Tensor<float> code = encode(g, model, sample);
  const Tensor<float> logits = decode(g, model, code, P);
  const std::size_t actual = g.executed(OpKind::conv1d) + g.executed(OpKind::linear);

  out << "n " << cfg.n << ", pool " << to_string(cfg.pool) << ", "
      << (cfg.share_recursion_weights ? "recursive (shared recursion weights)" : "static (unshared copies)")
      << '\n';
  out << "raw length " << len << " -> padded length " << P << '\n';
  out << "recursion count " << r << '\n';
  out << "parameterized layers 2n(r+2) = " << param_layer_count(cfg.n, P) << '\n';
  out << "executed layers incl. output projection: formula " << executed_layer_count(cfg.n, P)
      << ", actual " << actual << '\n';
  out << "stages:\n";
  out << "  input          [256, " << P << "]\n";
  out << "  enc_prefix     [256, " << P << "]\n";
  for (std::size_t k = 1; k <= r; ++k) out << "  enc_recursion  [256, " << (P >> k) << "]\n";
  out << "  enc_postfix    " << code.shape().str() << '\n';
  out << "  dec_prefix     [" << cfg.code_size() << "] -> [256, 4]\n";
  for (std::size_t k = 1; k <= r; ++k) out << "  dec_recursion  [256, " << (4u << k) << "]\n";
  out << "  dec_postfix    [256, " << P << "]\n";
  out << "  output         " << logits.shape().str() << '\n';
  out << "parameters " << model.parameter_count() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Byte-level recursive convolutional autoencoder"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  RunSpec spec;

  auto add_common = [&spec](CLI::App* sub) {
    sub->add_option("-c,--config", spec.config_path, "config file (TOML subset)")->check(CLI::ExistingFile);
    sub->add_option("-o,--override", spec.overrides, "key=value, applied after the config file")
        ->take_all();
    sub->add_option("--out", spec.out_dir, "output directory");
  };

  CLI::App* train = app.add_subcommand("train", "train a model from the configuration");
  add_common(train);
  train->add_option("--resume", spec.resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the train and test corpora");
  add_common(eval);
  eval->add_option("--checkpoint", spec.checkpoint, "checkpoint file");

  CLI::App* exp = app.add_subcommand("experiment", "run an analysis or ablation");
  add_common(exp);
  exp->add_option("kind", spec.experiment, "eos | mutate | length | pooling | static | depth | lstm")
      ->required()
      ->check(CLI::IsMember({"eos", "mutate", "length", "pooling", "static", "depth", "lstm"}));
  exp->add_option("--checkpoint", spec.checkpoint, "trained checkpoint (eos, mutate, length, lstm)");

  CLI::App* inspect = app.add_subcommand("inspect", "print depth and shape arithmetic");
  add_common(inspect);
  inspect->add_option("--length", spec.length, "sequence length in bytes, counting the terminating null");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) {
      spec.command = "train";
      return cmd_train(spec, out);
    }
    if (eval->parsed()) {
      spec.command = "eval";
      return cmd_eval(spec, out);
    }
    if (exp->parsed()) {
      spec.command = "experiment";
      return cmd_experiment(spec, out);
    }
    spec.command = "inspect";
    return cmd_inspect(spec, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace brca
