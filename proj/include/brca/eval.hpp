#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brca/data.hpp"
#include "brca/model.hpp"
#include "brca/trainer.hpp"

namespace brca {

/// Mismatches between pred.argmax and the groundtruth (raw bytes then the
/// null) over positions [0, gt.valid_len), divided by valid_len. Positions the
/// prediction does not cover count as errors.
double byte_error(const Prediction& pred, const ByteSample& gt);

/// Same, against explicit reference bytes (a null is implied at the end).
double byte_error(const Prediction& pred, std::span<const std::uint8_t> reference);

struct EosDiff {
  long long diff = 0;
  bool unterminated = false;
};

/// Predicted null position minus the raw length; an unterminated prediction
/// counts as ending at gt.padded_len and is flagged.
EosDiff eos_diff(const Prediction& pred, const ByteSample& gt);

struct Reconstruction {
  ByteSample sample;  // the prepared groundtruth
  Prediction pred;
};

/// Autoencodes one raw sample with some model.
using Reconstructor = std::function<Reconstruction(const Bytes& raw)>;

Reconstructor brca_reconstructor(const BrcaModel<float>& model);

struct Histogram {
  std::vector<double> edges;  // counts.size() + 1 edges, bins are [edges[i], edges[i+1])
  std::vector<std::size_t> counts;
  std::size_t total() const;
};

/// Named series of (key, value) points, e.g. error per mutation probability.
using Series = std::vector<std::pair<std::string, double>>;

struct MetricsReport {
  std::string name;
  std::map<std::string, double> scalars;
  std::map<std::string, Histogram> histograms;
  std::map<std::string, Series> series;
  std::map<std::string, std::string> provenance;

  /// Rows "report,kind,name,key,value"; scalars have an empty key.
  std::string to_csv() const;
  std::string to_json() const;
  /// Writes <dir>/<stem>.csv and <dir>/<stem>.json.
  void write(const std::filesystem::path& dir, const std::string& stem) const;
};

struct EvalOptions {
  std::size_t sample_count = 10000;
  std::uint64_t seed = 1;
  std::size_t length_cap = 0;  // truncate samples further; 0 keeps the corpus cap
};

/// Byte error (mean of per-sample errors and pooled over bytes), the
/// unterminated rate and the eos_diff histogram over evaluation_indices(seed).
MetricsReport evaluate(const Reconstructor& model, const Corpus& corpus, const EvalOptions& opt,
                       const std::string& name);

/// Upper limit of the 64-wide length bin holding `raw_length` (1..64 -> 64).
std::size_t length_bin(std::size_t raw_length, std::size_t bin_width = 64);

/// Recursion level of a bin, recursion_count(bit_ceil(bin_upper)): bins
/// 64 | 128 | 192-256 | 320-512 | 576-1024 map to levels 4 | 5 | 6 | 7 | 8.
/// The null terminator is ignored here, so a sample of exactly 64 bytes sits
/// in level 4 although it is padded to 128.
std::size_t bin_level(std::size_t bin_upper);

/// Per-bin errors keyed by bin upper limit; empty bins are absent.
MetricsReport error_by_length(const Reconstructor& model, const Corpus& corpus,
                              const EvalOptions& opt, const std::string& name,
                              std::size_t bin_width = 64);

std::vector<double> default_p_grid();

/// For each p: mutate every evaluated sample, autoencode and record the error
/// against the original bytes and against the mutated bytes. Samples are the
/// same as in evaluate() with the same options.
MetricsReport mutation_experiment(const Reconstructor& model, const Corpus& corpus,
                                  std::span<const double> p_grid, const EvalOptions& opt,
                                  const std::string& name);

struct AblationVariant {
  std::string name;
  BrcaConfig config;
};

/// Variants differing from `base` only in the encoder pooling layer.
std::vector<AblationVariant> pooling_variants(const BrcaConfig& base);
/// The recursive model and its static, unshared counterpart.
std::vector<AblationVariant> static_variants(const BrcaConfig& base);
/// n in {2, 4, 8, 16}.
std::vector<AblationVariant> depth_variants(const BrcaConfig& base);

/// Trains the variant from scratch and reports its train and test errors.
MetricsReport ablation_run(const AblationVariant& variant, const Corpus& train_corpus,
                           const Corpus& test_corpus, const TrainConfig& cfg,
                           const EvalOptions& opt, std::uint64_t model_seed);

/// Side-by-side table of the variants' train/test errors.
MetricsReport compare_variants(const std::string& name, std::span<const MetricsReport> runs);

}  // namespace brca
