#include "brca/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "brca/error.hpp"

namespace brca {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'R', 'C', 'A', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void pod(U v) {
    bytes(&v, sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  const std::vector<std::uint8_t>& view() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  void bytes(void* dst, std::size_t n) {
    if (n > n_ - pos_) throw CheckpointError("checkpoint is truncated");
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }
  template <typename U>
  U pod() {
    U v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto len = pod<std::uint32_t>();
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

}  // namespace

const ArrayRecord& Checkpoint::array(const std::string& name) const {
  for (const ArrayRecord& a : arrays) {
    if (a.name == name) return a;
  }
  throw CheckpointError("checkpoint has no array '" + name + "'");
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw CheckpointError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(ckpt.version);
  std::ostringstream meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("metadata entry '" + k + "' cannot be stored");
    }
    meta << k << '=' << v << '\n';
  }
  const std::string text = meta.str();
  w.pod<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const ArrayRecord& a : ckpt.arrays) {
    std::size_t numel = 1;
    for (std::size_t d : a.shape) numel *= d;
    if (numel != a.data.size()) {
      throw CheckpointError("array '" + a.name + "' shape does not match its data");
    }
    w.str(a.name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) w.pod<std::uint64_t>(d);
    w.pod<std::uint64_t>(a.data.size() * sizeof(float));
    w.bytes(a.data.data(), a.data.size() * sizeof(float));
  }
  const std::uint32_t sum = crc(w.view().data(), w.view().size());
  w.pod<std::uint32_t>(sum);
  return w.take();
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (stored != crc(bytes.data(), body)) {
    throw CheckpointError("checkpoint checksum mismatch (file is corrupted or truncated)");
  }
  Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
  Checkpoint ck;
  ck.version = r.pod<std::uint32_t>();
  if (ck.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto meta_len = r.pod<std::uint64_t>();
  std::string text(meta_len, '\0');
  r.bytes(text.data(), meta_len);
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed metadata line");
    ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    ArrayRecord a;
    a.name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(r.pod<std::uint64_t>());
      numel *= a.shape.back();
    }
    const auto nbytes = r.pod<std::uint64_t>();
    if (nbytes != numel * sizeof(float)) {
      throw CheckpointError("array '" + a.name + "' has inconsistent byte length");
    }
    a.data.resize(numel);
    r.bytes(a.data.data(), nbytes);
    ck.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last array");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  // write-then-rename so an interrupted save never leaves a partial checkpoint
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("error writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace brca
