#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "brca/eval.hpp"
#include "brca/lstm.hpp"
#include "brca/model.hpp"
#include "brca/trainer.hpp"

namespace brca {

/// Flat dotted-key configuration read from a small TOML subset:
///
///   # comment
///   [train]
///   lr0 = 0.001
///   corpus = "data/en.train.txt"
///
/// Every key has a default; unknown keys are rejected so typos fail loudly.
class Config {
 public:
  static Config defaults();
  /// Parses `text` over the defaults. Relative paths resolve against `base_dir`.
  static Config parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static Config load(const std::filesystem::path& path);

  /// Sets a known key; throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  /// Applies "key=value".
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  /// A path value resolved against the config file's directory.
  std::filesystem::path get_path(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  /// The fully resolved configuration in the same TOML subset.
  std::string to_toml() const;

 private:
  std::map<std::string, std::string> entries_;
  std::filesystem::path base_dir_;
};

BrcaConfig brca_config(const Config& c);
TrainConfig train_config(const Config& c);
LstmConfig lstm_config(const Config& c);
EvalOptions eval_options(const Config& c);

}  // namespace brca
