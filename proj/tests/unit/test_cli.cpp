#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "sfnn/checkpoint.hpp"
#include "sfnn/data.hpp"
#include "sfnn/network.hpp"

using namespace sfnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("sfnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  Outcome run(const std::string& args) const {
    const std::string cmd = std::string(SFNN_CLI_PATH) + " " + args + " > " + (dir / "stdout").string() + " 2> " +
                            (dir / "stderr").string();
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(dir / "stdout"), slurp(dir / "stderr")};
  }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  void write_config(const std::string& name, const std::string& train) const {
    std::ofstream(dir / name) << R"({"model": {"input_dim": 1,
        "layers": [{"kind": "deterministic", "activation": "relu", "width": 8},
                   {"kind": "deterministic", "activation": "relu", "width": 8}],
        "output": {"kind": "gaussian", "dim": 1, "sigma_y": 0.05}},
      "train": )" << train << "}";
  }

  fs::path dir;
};

int error_code(const std::string& err) { return json::parse(err).at("exit_code").get<int>(); }

}  // namespace

TEST_F(Cli, FullPipelineSucceeds) {
  ASSERT_EQ(run("gen-data synthetic --n 200 --seed 1 --out " + p("d.csv")).code, 0);
  write_config("c.json", R"({"epochs": 2, "batch_size": 32})");
  ASSERT_EQ(run("train --config " + p("c.json") + " --data " + p("d.csv") + " --out " + p("dnn.json") +
                " --metrics " + p("m.jsonl")).code, 0);
  const Outcome t = run("transfer --model " + p("dnn.json") + " --data " + p("d.csv") + " --mode thm1 --gamma 50 --out " +
                    p("t.json"));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(json::parse(t.out).at("report").contains("composed_bound"));
  ASSERT_EQ(run("finetune --model " + p("t.json") + " --data " + p("d.csv") + " --samples 4 --epochs 1 --out " +
                p("f.json")).code, 0);
  const Outcome e = run("eval --model " + p("f.json") + " --data " + p("d.csv") + " --mode sfnn --samples 20 --out " +
                    p("e.jsonl"));
  ASSERT_EQ(e.code, 0) << e.err;
  const json rec = json::parse(e.out);
  EXPECT_EQ(rec.at("mode"), "sfnn");
  EXPECT_TRUE(rec.at("nll_quantiles").contains("p95"));

  // Every output carries a provenance record.
  std::istringstream lines(slurp(dir / "e.jsonl"));
  std::string line, last;
  while (std::getline(lines, line)) last = line;
  EXPECT_EQ(json::parse(last).at("provenance").at("command"), "eval");
  EXPECT_NE(slurp(dir / "d.csv").find("# {\"provenance\""), std::string::npos);
  EXPECT_TRUE(load_checkpoint(p("f.json")).provenance.contains("config_hash"));
}

TEST_F(Cli, ZeroEpochModelEvaluatesAsInitialization) {
  ASSERT_EQ(run("gen-data synthetic --n 50 --seed 2 --out " + p("d.csv")).code, 0);
  write_config("c.json", R"({"epochs": 0, "seed": 4})");
  ASSERT_EQ(run("train --config " + p("c.json") + " --data " + p("d.csv") + " --out " + p("dnn.json")).code, 0);
  const Outcome e = run("eval --model " + p("dnn.json") + " --data " + p("d.csv") + " --mode dnn");
  ASSERT_EQ(e.code, 0);
  const Checkpoint c = load_checkpoint(p("dnn.json"));
  EXPECT_EQ(c.model.params, init_params(c.model.spec, RngStream(4).split(3)));
  const Dataset d = read_csv(p("d.csv"));
  EXPECT_EQ(json::parse(e.out).at("mean_nll").get<double>(),
            evaluate(c.model.spec, c.model.params, d.inputs, d.targets, mode::Dnn{}).mean_nll);
}

TEST_F(Cli, StageOrderIsEnforced) {
  ASSERT_EQ(run("gen-data synthetic --n 50 --seed 3 --out " + p("d.csv")).code, 0);
  write_config("c.json", R"({"epochs": 1})");
  ASSERT_EQ(run("train --config " + p("c.json") + " --data " + p("d.csv") + " --out " + p("dnn.json")).code, 0);
  const Outcome f = run("finetune --model " + p("dnn.json") + " --data " + p("d.csv") + " --out " + p("f.json"));
  EXPECT_EQ(f.code, 1);
  EXPECT_EQ(error_code(f.err), 1);
  EXPECT_NE(f.err.find("stage"), std::string::npos);
  ASSERT_EQ(run("transfer --model " + p("dnn.json") + " --data " + p("d.csv") + " --out " + p("t.json")).code, 0);
  EXPECT_EQ(run("transfer --model " + p("t.json") + " --data " + p("d.csv") + " --out " + p("t2.json")).code, 1);
}

TEST_F(Cli, ExitCodesByFailureKind) {
  EXPECT_EQ(run("train --data x.csv").code, 1);  // missing required flags
  EXPECT_EQ(run("frobnicate").code, 1);
  const Outcome io = run("eval --model " + p("missing.json") + " --data " + p("missing.csv"));
  EXPECT_EQ(io.code, 2);
  EXPECT_EQ(json::parse(io.err).at("error").at("kind"), "io");

  std::ofstream(dir / "bad.json") << "{\"format\": \"sfnn-checkpoint\", \"format_version\": 99}";
  ASSERT_EQ(run("gen-data synthetic --n 50 --seed 3 --out " + p("d.csv")).code, 0);
  EXPECT_EQ(run("eval --model " + p("bad.json") + " --data " + p("d.csv")).code, 2);

  write_config("diverge.json", R"({"epochs": 3, "lr": 1e300})");
  const Outcome nan = run("train --config " + p("diverge.json") + " --data " + p("d.csv") + " --out " + p("x.json"));
  EXPECT_EQ(nan.code, 3);
  EXPECT_EQ(json::parse(nan.err).at("error").at("kind"), "numerical");

  write_config("wrongkey.json", R"({"epochz": 3})");
  EXPECT_EQ(run("train --config " + p("wrongkey.json") + " --data " + p("d.csv") + " --out " + p("x.json")).code, 1);
}

TEST_F(Cli, VerifyReportsPerSeed) {
  const Outcome v = run("verify theorem1 --seeds 4 --out " + p("v.jsonl"));
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_TRUE(json::parse(v.out.substr(0, v.out.find('\n'))).at("pass").get<bool>());
  EXPECT_NE(v.out.find("\"summary\""), std::string::npos);
  const Outcome g = run("verify gradcheck --seeds 2");
  EXPECT_EQ(g.code, 0) << g.out;
  EXPECT_EQ(run("verify mc-bias --seeds 2 --samples 20 --runs 50").code, 0);
  EXPECT_EQ(run("verify gamma-sweep --seeds 2").code, 0);
  EXPECT_EQ(run("verify nonsense").code, 1);
}
