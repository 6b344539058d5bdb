#include "sepkit/cli.hpp"
#include "sepkit/config.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace sepkit;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sepkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void expect_invalid(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
    FAIL("expected InvalidConfig for ", text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
}

}  // namespace

TEST_SUITE("config") {
TEST_CASE("desk defaults") {
  const auto c = parse_config("");
  CHECK(c.preset == "desk");
  CHECK(c.train().model.hidden == 64);
  CHECK(c.train().model.embed_dim == 8);
  CHECK(c.train().max_epochs <= 40);
  CHECK(c.corpus.num_train == 500);
  CHECK(c.experiment.lambdas == std::vector<double>{0.01, 0.05, 0.1});
  CHECK(c.train().lr_init == 5e-4);
  CHECK(c.train().lr_decay == 0.7);
}

TEST_CASE("full-size preset dimensions") {
  const auto c = parse_config(R"({"preset": "paper"})");
  CHECK(c.train().model.hidden == 896);
  CHECK(c.train().model.embed_dim == 40);
  CHECK(c.train().dc_epochs == 30);
}

TEST_CASE("user values and overrides merge over the preset") {
  const auto c = parse_config(R"({"train": {"lambda": 0.1}, "model": {"hidden": 32}})",
                              {"train.alpha=0.2", "corpus.num_test=7", "train.stage=joint"});
  CHECK(c.train().lambda == 0.1);
  CHECK(c.train().alpha == 0.2);
  CHECK(c.train().model.hidden == 32);
  CHECK(c.corpus.num_test == 7);
  CHECK(c.train().stage == Stage::joint);
  CHECK(parse_config(to_json_string(c)).train().alpha == 0.2);
}

TEST_CASE("schema violations are rejected") {
  expect_invalid("{not json");
  expect_invalid("[1, 2]");
  expect_invalid(R"({"train": {"lamda": 0.1}})");
  expect_invalid(R"({"train": {"lambda": "high"}})");
  expect_invalid(R"({"model": {"hidden": 1.5}})");
  expect_invalid(R"({"train": {"lambda": 2.0}})");
  expect_invalid(R"({"preset": "huge"})");
  expect_invalid("", {"train.lambda"});
  expect_invalid("", {"train.nothing=1"});
  expect_invalid("", {"model.hidden=abc"});
  expect_invalid("", {"train.stage=dc2"});
}
}

TEST_SUITE("cli") {
TEST_CASE("usage errors exit 2") {
  auto r = cli({"gen-data", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"dance"}).code == 2);
  CHECK(cli({"train", "--stage", "xx", "--manifest", "/nonexistent"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("config errors exit 2") {
  const auto dir = sepkit::testing::scratch_dir("cli_cfg");
  std::ofstream(dir / "bad.json") << R"({"train": {"lamda": 1}})";
  CHECK(cli({"gen-data", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()}).code == 2);
  CHECK(cli({"gen-data", "--set", "corpus.num_train=x", "--out", (dir / "o").string()}).code == 2);
}

TEST_CASE("gen-data, train, separate, evaluate and report end to end") {
  const auto dir = sepkit::testing::scratch_dir("cli_e2e");
  std::ofstream(dir / "cfg.json") << R"({
    "corpus": {"num_train": 6, "num_dev": 2, "num_test": 2},
    "train": {"dc_epochs": 1, "max_epochs": 1, "min_epochs": 1, "batch_utts": 3},
    "model": {"hidden": 4, "embed_dim": 2}
  })";
  const std::string cfg = (dir / "cfg.json").string();
  auto r = cli({"gen-data", "--config", cfg, "--out", (dir / "data").string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "data" / "manifest.jsonl"));
  CHECK(std::filesystem::exists(dir / "data" / "wav" / "test" / "te00001_s2.wav"));
  CHECK(std::filesystem::exists(dir / "data" / "run.meta"));
  const std::string manifest = (dir / "data" / "manifest.jsonl").string();

  r = cli({"train", "--stage", "dc", "--config", cfg, "--manifest", manifest, "--out", (dir / "dc").string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "dc" / "train_log.jsonl"));

  // Stage order violation is a runtime error.
  r = cli({"train", "--stage", "dl", "--config", cfg, "--manifest", manifest, "--init",
           (dir / "dc" / "dc.ckpt").string(), "--out", (dir / "bad").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("StageOrderViolation") != std::string::npos);

  r = cli({"train", "--stage", "joint", "--config", cfg, "--manifest", manifest, "--init",
           (dir / "dc" / "dc.ckpt").string(), "--out", (dir / "joint").string()});
  REQUIRE(r.code == 0);

  r = cli({"separate", "--checkpoint", (dir / "joint" / "joint.ckpt").string(), "--input",
           (dir / "data" / "wav" / "test" / "te00000_mix.wav").string(), "--out", (dir / "sep").string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "sep" / "te00000_mix_s1.wav"));
  CHECK(std::filesystem::exists(dir / "sep" / "te00000_mix_s2.wav"));

  r = cli({"evaluate", "--manifest", manifest, "--checkpoint", (dir / "joint" / "joint.ckpt").string(), "--mode",
           "default", "--out", (dir / "eval").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("default") != std::string::npos);
  CHECK(slurp(dir / "eval" / "report.txt") == r.out);

  r = cli({"evaluate", "--manifest", manifest, "--oracle", "ipsm", "--out", (dir / "ipsm").string()});
  REQUIRE(r.code == 0);

  r = cli({"report", "--input", (dir / "eval" / "report.jsonl").string(), "--out", (dir / "rep").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("SDRi") != std::string::npos);
}

TEST_CASE("run.meta records seed, config hash and version; SEPKIT_SEED and --seed") {
  const auto dir = sepkit::testing::scratch_dir("cli_meta");
  const std::vector<std::string> base = {"gen-data", "--set", "corpus.num_train=2", "--set", "corpus.num_dev=1",
                                         "--set", "corpus.num_test=1"};
  auto run = [&](const std::string& out, std::vector<std::string> extra = {}) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back((dir / out).string());
    REQUIRE(cli(args).code == 0);
    return nlohmann::json::parse(slurp(dir / out / "run.meta"));
  };
  const auto a = run("a");
  CHECK(a["seed"] == 1234);
  CHECK(a["version"] == kVersion);
  CHECK(a["config_hash"].get<std::string>().size() == 16);
  const auto b = run("b");
  CHECK(a["config_hash"] == b["config_hash"]);
  CHECK(slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl"));

  setenv("SEPKIT_SEED", "77", 1);
  const auto c = run("c");
  const auto d = run("d", {"--seed", "5"});
  unsetenv("SEPKIT_SEED");
  CHECK(c["seed"] == 77);
  CHECK(d["seed"] == 5);
  CHECK(c["config_hash"] != a["config_hash"]);
}
}
