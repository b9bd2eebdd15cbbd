#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brca/tensor.hpp"

namespace brca {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kByteClasses = 256;
inline constexpr std::size_t kMinPaddedLength = 4;

Bytes to_bytes(std::string_view text);
std::string to_string(std::span<const std::uint8_t> bytes);

/// max(4, 2^ceil(log2(l + 1))): room for the bytes plus the terminating null.
std::size_t padded_length(std::size_t raw_length);

/// A raw byte sequence prepared for the autoencoder.
///
/// Positions [0, l) hold the raw bytes, position l the terminating null, and
/// positions [l + 1, padded_len) are padding whose one-hot columns are all zero.
struct ByteSample {
  Bytes raw;
  std::size_t valid_len = 0;
  std::size_t padded_len = 0;

  std::size_t length() const { return raw.size(); }
  /// Target byte per position (raw bytes, then 0 for the null and the padding).
  std::vector<int> targets() const;
  /// Positions that carry loss: [0, valid_len).
  std::vector<std::size_t> valid_positions() const;
};

/// Appends the null terminator and pads to padded_length(raw.size()).
/// Throws InputError on an embedded null byte, ContractViolation on empty input.
ByteSample prepare(std::span<const std::uint8_t> raw);

/// Same as prepare, but pads to exactly `fixed_len` (a power of two >= 4).
ByteSample prepare_fixed(std::span<const std::uint8_t> raw, std::size_t fixed_len);

/// [256, padded_len] one-hot matrix of a prepared sample.
template <typename T>
Tensor<T> onehot(const ByteSample& sample);

/// Per-position argmax of a [256, L] logit matrix.
struct Prediction {
  Bytes argmax;                  // one byte per position, length L
  Bytes text;                    // bytes before the first null
  bool terminated = false;       // a null occurred
  std::size_t eos_position = 0;  // index of the first null, or L when unterminated
};

template <typename T>
Prediction decode_output(const Tensor<T>& logits);

/// Prediction from an explicit byte sequence (e.g. a sequential decoder's output).
/// `terminated` appends the null at position text.size().
Prediction prediction_from_text(Bytes text, bool terminated);

/// Replaces each byte independently with probability p by a different byte
/// drawn uniformly from 1..255. The length never changes.
Bytes mutate(std::span<const std::uint8_t> raw, double p, std::mt19937_64& rng);

/// Newline-delimited paragraphs, one sample per non-empty line.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::string source, std::vector<Bytes> samples, std::size_t length_cap);

  /// Reads `path`; lines longer than `length_cap` are truncated at the cap.
  /// Throws InputError when the file is unreadable or a line holds a null byte.
  static Corpus load(const std::filesystem::path& path, std::size_t length_cap);
  static Corpus from_lines(std::span<const std::string> lines, std::size_t length_cap,
                           std::string source = "memory");

  const std::string& source() const { return source_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t length_cap() const { return length_cap_; }
  const Bytes& operator[](std::size_t i) const { return samples_.at(i); }
  const std::vector<Bytes>& samples() const { return samples_; }

  /// Keeps the first `count` samples.
  Corpus head(std::size_t count) const;

 private:
  std::string source_;
  std::vector<Bytes> samples_;
  std::size_t length_cap_ = 0;
};

/// Uniformly random sample from the corpus, truncated to `cap` bytes (0 keeps
/// the corpus cap).
Bytes sample_raw(const Corpus& corpus, std::mt19937_64& rng, std::size_t cap = 0);

ByteSample sample_batch(const Corpus& corpus, std::mt19937_64& rng, std::size_t cap = 0);

/// Indices for an evaluation pass: without replacement while the corpus is
/// large enough, with replacement otherwise.
std::vector<std::size_t> evaluation_indices(std::size_t corpus_size, std::size_t count,
                                            std::uint64_t seed);

}  // namespace brca
