#include "brca/data.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <numeric>

#include "brca/error.hpp"

namespace brca {

Bytes to_bytes(std::string_view text) {
  return Bytes(text.begin(), text.end());
}

std::string to_string(std::span<const std::uint8_t> bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::size_t padded_length(std::size_t raw_length) {
  require(raw_length >= 1, "padded_length: sample length must be at least 1");
  return std::max(kMinPaddedLength, std::bit_ceil(raw_length + 1));
}

std::vector<int> ByteSample::targets() const {
  std::vector<int> t(padded_len, 0);
  std::copy(raw.begin(), raw.end(), t.begin());
  return t;
}

std::vector<std::size_t> ByteSample::valid_positions() const {
  std::vector<std::size_t> p(valid_len);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

namespace {

void check_raw(std::span<const std::uint8_t> raw) {
  require(!raw.empty(), "prepare: empty byte sequence");
  const auto null = std::find(raw.begin(), raw.end(), std::uint8_t{0});
  if (null != raw.end()) {
    throw InputError("input contains a null byte at offset " +
                     std::to_string(std::distance(raw.begin(), null)) +
                     "; byte 0 is reserved as end-of-sequence");
  }
}

}  // namespace

ByteSample prepare(std::span<const std::uint8_t> raw) {
  check_raw(raw);
  ByteSample s;
  s.raw.assign(raw.begin(), raw.end());
  s.valid_len = raw.size() + 1;
  s.padded_len = padded_length(raw.size());
  return s;
}

ByteSample prepare_fixed(std::span<const std::uint8_t> raw, std::size_t fixed_len) {
  check_raw(raw);
  require(fixed_len >= kMinPaddedLength && std::has_single_bit(fixed_len),
          "prepare_fixed: length must be a power of two >= 4");
  require(raw.size() + 1 <= fixed_len, "prepare_fixed: sample of " + std::to_string(raw.size()) +
                                           " bytes does not fit in " +
                                           std::to_string(fixed_len));
  ByteSample s;
  s.raw.assign(raw.begin(), raw.end());
  s.valid_len = raw.size() + 1;
  s.padded_len = fixed_len;
  return s;
}

template <typename T>
Tensor<T> onehot(const ByteSample& sample) {
  require(sample.padded_len >= sample.valid_len && sample.valid_len == sample.raw.size() + 1,
          "onehot: sample was not prepared");
  Tensor<T> x(Shape{kByteClasses, sample.padded_len});
  for (std::size_t t = 0; t < sample.raw.size(); ++t) {
    x.at(sample.raw[t], t) = T{1};
  }
  x.at(0, sample.raw.size()) = T{1};
  return x;
}

template <typename T>
Prediction decode_output(const Tensor<T>& logits) {
  require(logits.shape().rank() == 2, "decode_output: logits must be [classes, L]");
  const std::size_t classes = logits.shape()[0], len = logits.shape()[1];
  Prediction p;
  p.argmax.resize(len);
  auto v = logits.values();
  for (std::size_t t = 0; t < len; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (v[c * len + t] > v[best * len + t]) best = c;
    }
    p.argmax[t] = static_cast<std::uint8_t>(best);
  }
  const auto null = std::find(p.argmax.begin(), p.argmax.end(), std::uint8_t{0});
  p.terminated = null != p.argmax.end();
  p.eos_position = static_cast<std::size_t>(std::distance(p.argmax.begin(), null));
  p.text.assign(p.argmax.begin(), null);
  return p;
}

Prediction prediction_from_text(Bytes text, bool terminated) {
  Prediction p;
  p.argmax = text;
  if (terminated) p.argmax.push_back(0);
  p.terminated = terminated;
  p.eos_position = text.size();
  p.text = std::move(text);
  return p;
}

Bytes mutate(std::span<const std::uint8_t> raw, double p, std::mt19937_64& rng) {
  require(p >= 0.0 && p <= 1.0, "mutate: probability must lie in [0, 1]");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, 254);
  Bytes out(raw.begin(), raw.end());
  for (std::uint8_t& b : out) {
    if (coin(rng) < p) {
      // 254 candidates: every byte in 1..255 except the current one
      int v = pick(rng);
      if (v >= b) ++v;
      b = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

Corpus::Corpus(std::string source, std::vector<Bytes> samples, std::size_t length_cap)
    : source_(std::move(source)), samples_(std::move(samples)), length_cap_(length_cap) {
  require(length_cap_ >= 1, "corpus length cap must be positive");
  for (Bytes& s : samples_) {
    require(!s.empty(), "corpus samples must be non-empty");
    if (s.size() > length_cap_) s.resize(length_cap_);
  }
}

namespace {

Corpus from_raw_lines(std::string source, std::vector<std::string> lines,
                      std::size_t length_cap) {
  std::vector<Bytes> samples;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line.find('\0') != std::string::npos) {
      throw InputError(source + ":" + std::to_string(i + 1) + ": line contains a null byte");
    }
    samples.push_back(to_bytes(line));
  }
  return Corpus(std::move(source), std::move(samples), length_cap);
}

}  // namespace

Corpus Corpus::load(const std::filesystem::path& path, std::size_t length_cap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open corpus file " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  if (in.bad()) {
    throw InputError("error reading corpus file " + path.string());
  }
  return from_raw_lines(path.string(), std::move(lines), length_cap);
}

Corpus Corpus::from_lines(std::span<const std::string> lines, std::size_t length_cap,
                          std::string source) {
  return from_raw_lines(std::move(source), std::vector<std::string>(lines.begin(), lines.end()),
                        length_cap);
}

Corpus Corpus::head(std::size_t count) const {
  const std::size_t n = std::min(count, samples_.size());
  return Corpus(source_ + "[:" + std::to_string(n) + "]",
                std::vector<Bytes>(samples_.begin(), samples_.begin() + n), length_cap_);
}

Bytes sample_raw(const Corpus& corpus, std::mt19937_64& rng, std::size_t cap) {
  if (corpus.empty()) {
    throw InputError("cannot sample from an empty corpus");
  }
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  Bytes raw = corpus[pick(rng)];
  const std::size_t limit = cap == 0 ? corpus.length_cap() : cap;
  if (raw.size() > limit) raw.resize(limit);
  return raw;
}

ByteSample sample_batch(const Corpus& corpus, std::mt19937_64& rng, std::size_t cap) {
  return prepare(sample_raw(corpus, rng, cap));
}

std::vector<std::size_t> evaluation_indices(std::size_t corpus_size, std::size_t count,
                                            std::uint64_t seed) {
  if (corpus_size == 0) {
    throw InputError("cannot evaluate on an empty corpus");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx;
  if (count <= corpus_size) {
    idx.resize(corpus_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, corpus_size - 1);
    idx.resize(count);
    for (std::size_t& i : idx) i = pick(rng);
  }
  return idx;
}

template Tensor<float> onehot<float>(const ByteSample&);
template Tensor<double> onehot<double>(const ByteSample&);
template Prediction decode_output<float>(const Tensor<float>&);
template Prediction decode_output<double>(const Tensor<double>&);

}  // namespace brca
