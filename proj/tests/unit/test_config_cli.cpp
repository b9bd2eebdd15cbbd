#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include "brca/cli.hpp"
#include "brca/config.hpp"

using namespace brca;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "brca");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// tiny corpus and config for end-to-end runs
fs::path tiny_setup(const std::string& name) {
  const fs::path dir = test::temp_dir(name);
  {
    std::ofstream out(dir / "train.txt");
    out << "a quick test\nanother line\nbytes\nshort\n";
  }
  {
    std::ofstream out(dir / "test.txt");
    out << "held out\nline two\n";
  }
  std::ofstream out(dir / "tiny.toml");
  out << "# end-to-end fixture\n"
         "[model]\nn = 2\n\n"
         "[train]\nsteps_per_epoch = 3\nepochs = 2\nlength_cap = 16\n\n"
         "[data]\ntrain = \"train.txt\"\ntest = \"test.txt\"\n\n"
         "[eval]\nsample_count = 4\n";
  return dir;
}

}  // namespace

TEST_CASE("config defaults, parsing and overrides") {
  const Config d = Config::defaults();
  CHECK(d.get_size("model.n") == 8);
  CHECK(d.get_double("train.lr0") == 0.001);
  CHECK(d.get_size("eval.sample_count") == 10000);

  const Config c = Config::parse("[model]\nn = 4 # inline\npool = \"average\"\n[train]\nlr0 = 0.01\n", "/base");
  CHECK(c.get_size("model.n") == 4);
  CHECK(c.get("model.pool") == "average");
  CHECK(c.get_double("train.lr0") == 0.01);
  CHECK(c.get_path("data.train") == fs::path("/base/data/en.train.txt"));
  CHECK(brca_config(c).pool == PoolKind::average);

  Config o = c;
  o.apply_override("model.n=16");
  CHECK(brca_config(o).n == 16);
  CHECK_THROWS_AS(o.apply_override("model.depth=3"), ConfigError);
  CHECK_THROWS_AS(o.apply_override("no equals sign"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[model]\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[model\nn = 2\n"), ConfigError);

  Config bad = Config::defaults();
  bad.set("model.n", "3");
  CHECK_THROWS_AS(brca_config(bad), ConfigError);
  bad.set("model.n", "two");
  CHECK_THROWS_AS(bad.get_size("model.n"), ConfigError);
  bad.set("train.scale_recursion_grads", "maybe");
  CHECK_THROWS_AS(bad.get_bool("train.scale_recursion_grads"), ConfigError);

  // the echoed configuration (paths already resolved) is a fixed point
  const Config echoed = Config::parse(c.to_toml(), "/elsewhere");
  CHECK(echoed.to_toml() == c.to_toml());
  CHECK(echoed.get_path("data.test") == c.get_path("data.test"));
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"experiment", "nonsense"}).code == kExitUsage);
  CHECK(cli({"inspect", "--override", "model.n=3"}).code == kExitUsage);
  CHECK(cli({"inspect", "--config", "/definitely/missing.toml"}).code == kExitUsage);
  CHECK(cli({"--version"}).code == kExitOk);
}

TEST_CASE("inspect prints the depth arithmetic") {
  const Run r = cli({"inspect", "--length", "1024"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("padded length 1024") != std::string::npos);
  CHECK(r.out.find("recursion count 8") != std::string::npos);
  CHECK(r.out.find("2n(r+2) = 160") != std::string::npos);
  CHECK(r.out.find("formula 161, actual 161") != std::string::npos);

  const Run n2 = cli({"inspect", "--length", "1024", "--override", "model.n=2"});
  CHECK(n2.out.find("2n(r+2) = 40") != std::string::npos);

  const Run shortest = cli({"inspect", "--length", "3", "-o", "model.n=2"});
  CHECK(shortest.out.find("padded length 4") != std::string::npos);
  CHECK(shortest.out.find("recursion count 0") != std::string::npos);
}

TEST_CASE("experiments that need a checkpoint say so") {
  const fs::path dir = tiny_setup("cli-prereq");
  const Run r = cli({"experiment", "mutate", "-c", (dir / "tiny.toml").string(), "--out",
                     (dir / "out").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("needs a trained checkpoint") != std::string::npos);
}

TEST_CASE("train with a missing corpus fails without a checkpoint") {
  const fs::path dir = tiny_setup("cli-missing");
  const fs::path out = dir / "out";
  const Run r = cli({"train", "-c", (dir / "tiny.toml").string(), "-o", "data.train=" + (dir / "gone.txt").string(),
                     "--out", out.string()});
  CHECK(r.code == kExitRuntime);
  CHECK_FALSE(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("train, eval and experiments end to end") {
  const fs::path dir = tiny_setup("cli-e2e");
  const std::string cfg = (dir / "tiny.toml").string();
  const Run a = cli({"train", "-c", cfg, "--out", (dir / "a").string()});
  REQUIRE(a.code == kExitOk);
  const Run b = cli({"train", "-c", cfg, "--out", (dir / "b").string()});
  REQUIRE(b.code == kExitOk);

  const std::string metrics = slurp(dir / "a" / "metrics.csv");
  CHECK(metrics == slurp(dir / "b" / "metrics.csv"));
  CHECK(metrics.rfind("epoch,step,lr,loss,byte_error\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
  CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["train_seed"] == 1);
  CHECK(manifest["config"]["model.n"] == "2");
  CHECK(Config::load(dir / "a" / "config.toml").get_size("train.epochs") == 2);

  // one epoch, then resume to two
  const Run first = cli({"train", "-c", cfg, "-o", "train.epochs=1", "--out", (dir / "c").string()});
  REQUIRE(first.code == kExitOk);
  const std::string ckpt_before = slurp(dir / "c" / "checkpoint.bin");
  const Run resumed = cli({"train", "-c", cfg, "--resume", (dir / "c" / "checkpoint.bin").string(),
                           "--out", (dir / "d").string()});
  REQUIRE(resumed.code == kExitOk);
  CHECK(slurp(dir / "c" / "checkpoint.bin") == ckpt_before);  // input left untouched
  const std::string head = metrics.substr(0, metrics.find('\n') + 1);
  const std::string last = metrics.substr(metrics.find('\n', head.size()) + 1);
  CHECK(slurp(dir / "d" / "metrics.csv") == head + last);
  CHECK(slurp(dir / "d" / "checkpoint.bin") == slurp(dir / "a" / "checkpoint.bin"));

  const std::string ck = (dir / "a" / "checkpoint.bin").string();
  const Run ev = cli({"eval", "-c", cfg, "--checkpoint", ck, "--out", (dir / "ev").string()});
  REQUIRE(ev.code == kExitOk);
  CHECK(fs::exists(dir / "ev" / "eval-train-seed1.csv"));
  CHECK(fs::exists(dir / "ev" / "eval-test-seed1.json"));
  CHECK(slurp(dir / "ev" / "eval-test-seed1.csv").find("unterminated_rate") != std::string::npos);

  const Run mut = cli({"experiment", "mutate", "-c", cfg, "--checkpoint", ck, "--out", (dir / "mut").string()});
  REQUIRE(mut.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "mut" / "mutate-train-seed1.json"));
  CHECK(j["series"]["error_vs_groundtruth"].size() == 11);
  CHECK(j["series"]["error_vs_mutated"].size() == 11);

  const Run eos = cli({"experiment", "eos", "-c", cfg, "--checkpoint", ck, "--out", (dir / "eos").string()});
  REQUIRE(eos.code == kExitOk);
  CHECK(nlohmann::json::parse(slurp(dir / "eos" / "eos-test-seed1.json"))["histograms"].contains("eos_diff"));

  const Run len = cli({"experiment", "length", "-c", cfg, "--checkpoint", ck, "--out", (dir / "len").string()});
  CHECK(len.code == kExitOk);

  // a damaged checkpoint is a runtime failure
  {
    std::string bytes = slurp(ck);
    bytes[bytes.size() / 2] ^= 0x10;
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << bytes;
  }
  const Run bad = cli({"eval", "-c", cfg, "--checkpoint", (dir / "bad.bin").string(), "--out", (dir / "bad").string()});
  CHECK(bad.code == kExitRuntime);
  CHECK(bad.err.find("checksum") != std::string::npos);
}

TEST_CASE("output root comes from the environment") {
  const fs::path dir = tiny_setup("cli-env");
  const fs::path root = dir / "root";
  setenv("BRCA_OUTPUT_ROOT", root.c_str(), 1);
  const Run r = cli({"train", "-c", (dir / "tiny.toml").string(), "-o", "train.epochs=1"});
  unsetenv("BRCA_OUTPUT_ROOT");
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(root / "train-brca-seed1" / "metrics.csv"));
}
