#include "brca/eval.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

#include "brca/error.hpp"

namespace brca {

double byte_error(const Prediction& pred, const ByteSample& gt) {
  return byte_error(pred, gt.raw);
}

double byte_error(const Prediction& pred, std::span<const std::uint8_t> reference) {
  const std::size_t valid = reference.size() + 1;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < valid; ++i) {
    const std::uint8_t want = i < reference.size() ? reference[i] : 0;
    if (i >= pred.argmax.size() || pred.argmax[i] != want) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(valid);
}

EosDiff eos_diff(const Prediction& pred, const ByteSample& gt) {
  EosDiff d;
  d.unterminated = !pred.terminated;
  const std::size_t at = pred.terminated ? pred.eos_position : gt.padded_len;
  d.diff = static_cast<long long>(at) - static_cast<long long>(gt.length());
  return d;
}

Reconstructor brca_reconstructor(const BrcaModel<float>& model) {
  return [&model](const Bytes& raw) {
    Reconstruction r;
    r.sample = model.prepare(raw);
    Graph<float> g(false);
    const Tensor<float> code = encode(g, model, r.sample);
    r.pred = decode_output(decode(g, model, code, r.sample.padded_len));
    return r;
  };
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (std::size_t c : counts) t += c;
  return t;
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

// JSON has no NaN or infinity; such values become null
nlohmann::json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::vector<Bytes> evaluation_raws(const Corpus& corpus, const EvalOptions& opt) {
  std::vector<Bytes> raws;
  for (std::size_t i : evaluation_indices(corpus.size(), opt.sample_count, opt.seed)) {
    Bytes raw = corpus[i];
    if (opt.length_cap > 0 && raw.size() > opt.length_cap) raw.resize(opt.length_cap);
    raws.push_back(std::move(raw));
  }
  return raws;
}

void stamp(MetricsReport& r, const Corpus& corpus, const EvalOptions& opt) {
  r.provenance["corpus"] = corpus.source();
  r.provenance["seed"] = std::to_string(opt.seed);
  r.provenance["sample_count"] = std::to_string(opt.sample_count);
}

std::string p_key(double p) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << p;
  return s.str();
}

}  // namespace

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "report,kind,name,key,value\n";
  const std::string rep = csv_field(name);
  for (const auto& [k, v] : provenance) {
    out << rep << ",provenance," << csv_field(k) << ",," << csv_field(v) << '\n';
  }
  for (const auto& [k, v] : scalars) out << rep << ",scalar," << csv_field(k) << ",," << num(v) << '\n';
  for (const auto& [k, s] : series) {
    for (const auto& [key, v] : s) {
      out << rep << ",series," << csv_field(k) << ',' << csv_field(key) << ',' << num(v) << '\n';
    }
  }
  for (const auto& [k, h] : histograms) {
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      out << rep << ",histogram," << csv_field(k) << ',' << num(h.edges[i]) << ',' << h.counts[i]
          << '\n';
    }
  }
  return out.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["provenance"] = provenance;
  nlohmann::ordered_json sc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : scalars) sc[k] = json_num(v);
  j["scalars"] = sc;
  nlohmann::ordered_json se = nlohmann::ordered_json::object();
  for (const auto& [k, s] : series) {
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& [key, v] : s) pts.push_back({{"key", key}, {"value", json_num(v)}});
    se[k] = pts;
  }
  j["series"] = se;
  nlohmann::ordered_json hi = nlohmann::ordered_json::object();
  for (const auto& [k, h] : histograms) hi[k] = {{"edges", h.edges}, {"counts", h.counts}};
  j["histograms"] = hi;
  return j.dump(2) + "\n";
}

void MetricsReport::write(const std::filesystem::path& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  for (const auto& [ext, text] : {std::pair{".csv", to_csv()}, std::pair{".json", to_json()}}) {
    const auto path = dir / (stem + ext);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write report " + path.string());
    out << text;
  }
}

MetricsReport evaluate(const Reconstructor& model, const Corpus& corpus, const EvalOptions& opt,
                       const std::string& name) {
  MetricsReport r;
  r.name = name;
  stamp(r, corpus, opt);
  double err_sum = 0.0;
  std::size_t wrong = 0, bytes = 0, unterminated = 0, exact_eos = 0, perfect = 0;
  std::map<long long, std::size_t> diffs;
  const std::vector<Bytes> raws = evaluation_raws(corpus, opt);
  for (const Bytes& raw : raws) {
    const Reconstruction rec = model(raw);
    const double e = byte_error(rec.pred, rec.sample);
    err_sum += e;
    const std::size_t valid = rec.sample.valid_len;
    wrong += static_cast<std::size_t>(std::llround(e * static_cast<double>(valid)));
    bytes += valid;
    if (e == 0.0) ++perfect;
    const EosDiff d = eos_diff(rec.pred, rec.sample);
    if (d.unterminated) ++unterminated;
    if (d.diff == 0 && !d.unterminated) ++exact_eos;
    ++diffs[d.diff];
  }
  const auto n = static_cast<double>(raws.size());
  r.scalars["samples"] = n;
  r.scalars["byte_error"] = err_sum / n;
  r.scalars["byte_error_pooled"] = static_cast<double>(wrong) / static_cast<double>(bytes);
  r.scalars["unterminated_rate"] = static_cast<double>(unterminated) / n;
  r.scalars["eos_exact_rate"] = static_cast<double>(exact_eos) / n;
  r.scalars["perfect_rate"] = static_cast<double>(perfect) / n;
  Histogram h;
  for (const auto& [d, c] : diffs) {
    h.edges.push_back(static_cast<double>(d));
    h.counts.push_back(c);
  }
  h.edges.push_back(diffs.empty() ? 0.0 : static_cast<double>(diffs.rbegin()->first + 1));
  r.histograms["eos_diff"] = h;
  return r;
}

std::size_t length_bin(std::size_t raw_length, std::size_t bin_width) {
  require(bin_width >= 1, "length_bin: bin width must be positive");
  const std::size_t l = std::max<std::size_t>(raw_length, 1);
  return (l + bin_width - 1) / bin_width * bin_width;
}

std::size_t bin_level(std::size_t bin_upper) {
  return recursion_count(std::max(kMinPaddedLength, std::bit_ceil(bin_upper)));
}

MetricsReport error_by_length(const Reconstructor& model, const Corpus& corpus,
                              const EvalOptions& opt, const std::string& name,
                              std::size_t bin_width) {
  struct Acc {
    double err_sum = 0.0;
    std::size_t samples = 0, wrong = 0, bytes = 0;
  };
  std::map<std::size_t, Acc> bins, levels;
  for (const Bytes& raw : evaluation_raws(corpus, opt)) {
    const Reconstruction rec = model(raw);
    const double e = byte_error(rec.pred, rec.sample);
    const std::size_t valid = rec.sample.valid_len;
    const auto wrong = static_cast<std::size_t>(std::llround(e * static_cast<double>(valid)));
    const std::size_t bin = length_bin(raw.size(), bin_width);
    for (Acc* a : {&bins[bin], &levels[bin_level(bin)]}) {
      a->err_sum += e;
      a->samples += 1;
      a->wrong += wrong;
      a->bytes += valid;
    }
  }
  MetricsReport r;
  r.name = name;
  stamp(r, corpus, opt);
  r.provenance["bin_width"] = std::to_string(bin_width);
  auto fill = [&r](const std::map<std::size_t, Acc>& m, const std::string& prefix) {
    for (const auto& [key, a] : m) {
      const std::string k = std::to_string(key);
      r.series[prefix + "_mean_error"].emplace_back(k, a.err_sum / static_cast<double>(a.samples));
      r.series[prefix + "_pooled_error"].emplace_back(
          k, static_cast<double>(a.wrong) / static_cast<double>(a.bytes));
      r.series[prefix + "_samples"].emplace_back(k, static_cast<double>(a.samples));
    }
  };
  fill(bins, "bin");
  fill(levels, "level");
  return r;
}

std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

MetricsReport mutation_experiment(const Reconstructor& model, const Corpus& corpus,
                                  std::span<const double> p_grid, const EvalOptions& opt,
                                  const std::string& name) {
  MetricsReport r;
  r.name = name;
  stamp(r, corpus, opt);
  const std::vector<Bytes> raws = evaluation_raws(corpus, opt);
  for (std::size_t pi = 0; pi < p_grid.size(); ++pi) {
    const double p = p_grid[pi];
    std::mt19937_64 rng(opt.seed ^ (0x5851f42d4c957f2dULL * (pi + 1)));
    double vs_truth = 0.0, vs_mutated = 0.0;
    for (const Bytes& raw : raws) {
      const Bytes mutated = mutate(raw, p, rng);
      const Reconstruction rec = model(mutated);
      vs_truth += byte_error(rec.pred, raw);
      vs_mutated += byte_error(rec.pred, mutated);
    }
    const auto n = static_cast<double>(raws.size());
    r.series["error_vs_groundtruth"].emplace_back(p_key(p), vs_truth / n);
    r.series["error_vs_mutated"].emplace_back(p_key(p), vs_mutated / n);
  }
  return r;
}

std::vector<AblationVariant> pooling_variants(const BrcaConfig& base) {
  std::vector<AblationVariant> out;
  for (PoolKind k : {PoolKind::max, PoolKind::average, PoolKind::l2}) {
    BrcaConfig c = base;
    c.pool = k;
    out.push_back({"pool-" + to_string(k), c});
  }
  return out;
}

std::vector<AblationVariant> static_variants(const BrcaConfig& base) {
  BrcaConfig rec = base;
  rec.share_recursion_weights = true;
  BrcaConfig fixed = base;
  fixed.share_recursion_weights = false;
  return {{"recursive", rec}, {"static", fixed}};
}

std::vector<AblationVariant> depth_variants(const BrcaConfig& base) {
  std::vector<AblationVariant> out;
  for (std::size_t n : {2, 4, 8, 16}) {
    BrcaConfig c = base;
    c.n = n;
    out.push_back({"depth-n" + std::to_string(n), c});
  }
  return out;
}

MetricsReport ablation_run(const AblationVariant& variant, const Corpus& train_corpus,
                           const Corpus& test_corpus, const TrainConfig& cfg,
                           const EvalOptions& opt, std::uint64_t model_seed) {
  BrcaModel<float> model(variant.config, model_seed);
  TrainState state = initial_state(cfg);
  const std::vector<EpochMetrics> history = train(model, train_corpus, cfg, state);
  const Reconstructor rec = brca_reconstructor(model);
  // the static model sees at most static_length - 1 bytes
  EvalOptions eo = opt;
  if (!variant.config.share_recursion_weights) {
    const std::size_t cap = variant.config.static_length - 1;
    eo.length_cap = eo.length_cap == 0 ? cap : std::min(eo.length_cap, cap);
  }
  const MetricsReport tr = evaluate(rec, train_corpus, eo, variant.name + "-train");
  const MetricsReport te = evaluate(rec, test_corpus, eo, variant.name + "-test");
  MetricsReport r;
  r.name = variant.name;
  r.provenance["variant"] = variant.name;
  r.provenance["train_corpus"] = train_corpus.source();
  r.provenance["test_corpus"] = test_corpus.source();
  r.provenance["seed"] = std::to_string(cfg.seed);
  r.provenance["model_seed"] = std::to_string(model_seed);
  r.scalars["train_error"] = tr.scalars.at("byte_error");
  r.scalars["test_error"] = te.scalars.at("byte_error");
  r.scalars["train_unterminated_rate"] = tr.scalars.at("unterminated_rate");
  r.scalars["test_unterminated_rate"] = te.scalars.at("unterminated_rate");
  r.scalars["n"] = static_cast<double>(variant.config.n);
  r.scalars["depth_at_1024"] = static_cast<double>(param_layer_count(variant.config.n, 1024));
  r.scalars["parameters"] = static_cast<double>(model.parameter_count());
  r.scalars["final_train_loss"] = history.empty() ? std::nan("") : history.back().loss;
  for (const EpochMetrics& m : history) {
    r.series["epoch_loss"].emplace_back(std::to_string(m.epoch), m.loss);
    r.series["epoch_byte_error"].emplace_back(std::to_string(m.epoch), m.byte_error);
  }
  return r;
}

MetricsReport compare_variants(const std::string& name, std::span<const MetricsReport> runs) {
  MetricsReport r;
  r.name = name;
  for (const MetricsReport& run : runs) {
    r.series["train_error"].emplace_back(run.name, run.scalars.at("train_error"));
    r.series["test_error"].emplace_back(run.name, run.scalars.at("test_error"));
    if (auto it = run.scalars.find("depth_at_1024"); it != run.scalars.end()) {
      r.series["depth_at_1024"].emplace_back(run.name, it->second);
    }
  }
  if (!runs.empty()) r.provenance = runs.front().provenance;
  r.provenance.erase("variant");
  return r;
}

}  // namespace brca
