#include "brca/config.hpp"

#include <fstream>
#include <sstream>

#include "brca/error.hpp"

namespace brca {

namespace {

// paths are resolved against the config file's directory
constexpr const char* kPathKeys[] = {"data.train", "data.test", "experiment.checkpoint"};

bool is_path_key(const std::string& key) {
  for (const char* k : kPathKeys) {
    if (key == k) return true;
  }
  return false;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// strips a trailing comment that is not inside quotes
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v, std::size_t line_no) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (v.find('"') != std::string::npos) {
    throw ConfigError("line " + std::to_string(line_no) + ": unbalanced quotes in " + v);
  }
  return v;
}

}  // namespace

Config Config::defaults() {
  Config c;
  c.entries_ = {
      {"model.kind", "brca"},
      {"model.n", "8"},
      {"model.pool", "max"},
      {"model.share_recursion_weights", "true"},
      {"model.static_length", "1024"},
      {"model.linear_mode", "flattened"},
      {"model.shuffle", "interleaved"},
      {"model.zero_init_residual", "true"},
      {"model.output_init_scale", "0.25"},
      {"model.seed", "1"},
      {"lstm.embed", "1024"},
      {"lstm.hidden", "1024"},
      {"lstm.feed", "ground_truth"},
      {"lstm.beam", "2"},
      {"train.lr0", "0.001"},
      {"train.halve_every", "10"},
      {"train.momentum", "0.9"},
      {"train.weight_decay", "0.00001"},
      {"train.steps_per_epoch", "2000"},
      {"train.epochs", "30"},
      {"train.length_cap", "1024"},
      {"train.seed", "1"},
      {"train.scale_recursion_grads", "true"},
      {"train.divergence_window", "100"},
      {"data.train", "data/en.train.txt"},
      {"data.test", "data/en.test.txt"},
      {"eval.sample_count", "10000"},
      {"eval.seed", "1"},
      {"eval.length_cap", "0"},
      {"experiment.checkpoint", ""},
  };
  return c;
}

Config Config::parse(std::string_view text, const std::filesystem::path& base_dir) {
  Config c = defaults();
  c.base_dir_ = base_dir;
  std::istringstream in{std::string(text)};
  std::string section;
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)), line_no);
    c.set(section.empty() ? key : section + "." + key, value);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.parent_path());
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  // overrides are typed on the command line, so paths stay relative to the CWD
  const std::string key = trim(assignment.substr(0, eq));
  std::string value = unquote(trim(assignment.substr(eq + 1)), 0);
  if (is_path_key(key) && !value.empty()) value = std::filesystem::absolute(value).string();
  set(key, value);
}

const std::string& Config::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError(key + " must be a nonnegative integer, got '" + v + "'");
  }
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError(key + " must be a number, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + " must be true or false, got '" + v + "'");
}

std::filesystem::path Config::get_path(const std::string& key) const {
  const std::filesystem::path p = get(key);
  if (p.empty() || p.is_absolute()) return p;
  return base_dir_ / p;
}

std::string Config::to_toml() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    const std::string shown = is_path_key(key) ? get_path(key).string() : value;
    out << key.substr(dot + 1) << " = \"" << shown << "\"\n";
  }
  return out.str();
}

BrcaConfig brca_config(const Config& c) {
  BrcaConfig m;
  m.n = c.get_size("model.n");
  try {
    m.pool = parse_pool_kind(c.get("model.pool"));
    m.linear_mode = parse_linear_mode(c.get("model.linear_mode"));
    m.shuffle = parse_shuffle_order(c.get("model.shuffle"));
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  m.share_recursion_weights = c.get_bool("model.share_recursion_weights");
  m.static_length = c.get_size("model.static_length");
  m.zero_init_residual = c.get_bool("model.zero_init_residual");
  m.output_init_scale = c.get_double("model.output_init_scale");
  try {
    m.validate();
    if (!m.share_recursion_weights) recursion_count(m.static_length);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return m;
}

TrainConfig train_config(const Config& c) {
  TrainConfig t;
  t.lr0 = c.get_double("train.lr0");
  t.halve_every = c.get_size("train.halve_every");
  t.momentum = c.get_double("train.momentum");
  t.weight_decay = c.get_double("train.weight_decay");
  t.steps_per_epoch = c.get_size("train.steps_per_epoch");
  t.epochs = c.get_size("train.epochs");
  t.length_cap = c.get_size("train.length_cap");
  t.seed = c.get_u64("train.seed");
  t.scale_recursion_grads = c.get_bool("train.scale_recursion_grads");
  t.divergence_window = c.get_size("train.divergence_window");
  t.validate();
  return t;
}

LstmConfig lstm_config(const Config& c) {
  LstmConfig l;
  l.embed = c.get_size("lstm.embed");
  l.hidden = c.get_size("lstm.hidden");
  l.feed = parse_feed_mode(c.get("lstm.feed"));
  l.beam = c.get_size("lstm.beam");
  l.validate();
  return l;
}

EvalOptions eval_options(const Config& c) {
  EvalOptions e;
  e.sample_count = c.get_size("eval.sample_count");
  if (e.sample_count < 1) throw ConfigError("eval.sample_count must be at least 1");
  e.seed = c.get_u64("eval.seed");
  e.length_cap = c.get_size("eval.length_cap");
  return e;
}

}  // namespace brca
