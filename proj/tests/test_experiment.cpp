#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "unida/errors.hpp"
#include "unida/experiment.hpp"

using namespace unida;
namespace fs = std::filesystem;

namespace {

const char* kTinyPlan = R"({
  "name": "tiny",
  "repetitions": 2,
  "train": {"total_steps": 30, "batch_size": 8, "feature_hidden": [8], "feature_dim": 6,
            "domain_hidden": [6, 6]},
  "data": {"label_sets": {"n_shared": 2, "n_source_private": 1, "n_target_private": 2},
           "synthetic": {"dim": 4, "per_class": 12}}
})";

class Scratch : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("unida-test-" + std::to_string(::getpid()) + "-" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  }

  ExperimentPlan tiny() {
    auto plan = plan_from_json(kTinyPlan);
    plan.output_root = dir / "runs";
    return plan;
  }

  int cli(const std::string& args) {
    const std::string cmd = std::string(UNIDA_CLI) + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_F(Scratch, PlanJsonRoundTrip) {
  auto plan = tiny();
  plan.train.static_w_alpha = 1.2;
  plan.thresholds[Scheme::uan] = {0.4, -0.1, -0.3};
  const auto back = plan_from_json(plan_to_json(plan));
  EXPECT_EQ(plan_to_json(back), plan_to_json(plan));
  EXPECT_EQ(back.train.static_w_alpha, 1.2);
  EXPECT_EQ(back.data.label_sets, plan.data.label_sets);
}

TEST_F(Scratch, ConfigErrors) {
  EXPECT_THROW(plan_from_json("{\"nme\": 1}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"train\": {\"lr\": \"fast\"}}"), ConfigError);
  EXPECT_THROW(plan_from_json("{\"train\": {\"scheme\": \"magic\"}}"), ConfigError);
  EXPECT_THROW(plan_from_json("{not json"), ParseError);
  EXPECT_THROW(load_plan(dir / "missing.json"), ConfigError);
  auto plan = tiny();
  plan.data.source_features = dir / "nope.csv";
  EXPECT_THROW(plan.validate(), ConfigError);
}

TEST_F(Scratch, OutputRootResolution) {
  ExperimentPlan plan;
  ::unsetenv("UNIDA_OUTPUT_ROOT");
  EXPECT_EQ(resolve_output_root(plan), fs::path("runs"));
  ::setenv("UNIDA_OUTPUT_ROOT", dir.c_str(), 1);
  EXPECT_EQ(resolve_output_root(plan), dir);
  plan.output_root = "elsewhere";
  EXPECT_EQ(resolve_output_root(plan), fs::path("elsewhere"));
  ::unsetenv("UNIDA_OUTPUT_ROOT");
}

TEST_F(Scratch, RunWritesEveryArtifact) {
  const auto results = run(tiny());
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(results[1].seed, 1u);
  for (const char* f : {"config.json", "metrics.jsonl", "scores.csv", "report.json", "report.txt",
                        "histograms.csv", "checkpoint.bin", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(results[0].dir / f)) << f;
  }
  std::ifstream metrics(results[0].dir / "metrics.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(metrics, l);) ++lines;
  EXPECT_EQ(lines, 30u);
  ASSERT_TRUE(results[0].report);
  EXPECT_EQ(results[0].report->n_samples, 4u * 12u);
  // The saved config reproduces the plan.
  const auto saved = plan_from_json(slurp(results[0].dir / "config.json"));
  EXPECT_EQ(saved.train.total_steps, 30u);
}

TEST_F(Scratch, RerunsAreByteIdentical) {
  auto plan = tiny();
  plan.repetitions = 1;
  const auto a = run(plan);
  const auto metrics = slurp(a[0].dir / "metrics.jsonl");
  const auto ckpt = slurp(a[0].dir / "checkpoint.bin");
  const auto scores = slurp(a[0].dir / "scores.csv");
  const auto b = run(plan);
  EXPECT_EQ(slurp(b[0].dir / "metrics.jsonl"), metrics);
  EXPECT_EQ(slurp(b[0].dir / "checkpoint.bin"), ckpt);
  EXPECT_EQ(slurp(b[0].dir / "scores.csv"), scores);
}

TEST_F(Scratch, ConcurrentWorkersMatchSerialRuns) {
  auto plan = tiny();
  const auto serial = run(plan);
  plan.workers = 2;
  plan.name = "tiny-parallel";
  const auto parallel = run(plan);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(slurp(serial[i].dir / "metrics.jsonl"), slurp(parallel[i].dir / "metrics.jsonl"));
  }
}

TEST_F(Scratch, SweepChangesExactlyOneField) {
  const auto base = tiny();
  const auto base_json = nlohmann::json::parse(plan_to_json(base));
  for (auto p : {SweepParameter::w_alpha_static, SweepParameter::w_beta, SweepParameter::w0}) {
    const auto v = nlohmann::json::parse(plan_to_json(with_parameter(base, p, 0.7)));
    std::size_t differing = 0;
    for (const auto& [key, value] : base_json.items()) {
      if (key == "name") continue;
      if (key == "train") {
        for (const auto& [k, x] : value.items()) differing += v["train"][k] != x;
      } else {
        differing += v[key] != value;
      }
    }
    EXPECT_EQ(differing, 1u) << to_string(p);
  }
  EXPECT_THROW(sweep(base, SweepParameter::w0, {}), ConfigError);
}

TEST_F(Scratch, AblationFamilies) {
  const auto base = tiny();
  const auto scoring = ablation_variants(base, "scoring");
  ASSERT_EQ(scoring.size(), all_schemes().size());
  EXPECT_EQ(scoring[1].plan.train.scheme, Scheme::uan);
  EXPECT_EQ(scoring[1].plan.train.w0, default_thresholds(Scheme::uan).w0);
  const auto comps = ablation_variants(base, "components");
  std::vector<std::string> labels;
  for (const auto& v : comps) labels.push_back(v.label);
  EXPECT_EQ(labels, (std::vector<std::string>{"full", "no_pseudo_labels", "w_alpha_0",
                                              "static_w_alpha_1.2", "no_diversity",
                                              "diversity_target_only"}));
  EXPECT_FALSE(comps[1].plan.train.pseudo_labels);
  EXPECT_EQ(comps[2].plan.train.static_w_alpha, 0.0);
  EXPECT_EQ(comps[4].plan.train.diversity_mode, DiversityMode::off);
  EXPECT_THROW(ablation_variants(base, "nonsense"), ConfigError);
}

TEST(Summary, MeanAndSampleStd) {
  std::vector<RunResult> runs(3);
  const double acc[] = {0.5, 0.7, 0.9};
  for (int i = 0; i < 3; ++i) {
    runs[i].report = EvalReport{};
    runs[i].report->average_class_accuracy = acc[i];
  }
  const auto row = summarize("x", runs);
  EXPECT_DOUBLE_EQ(row.mean, 0.7);
  EXPECT_NEAR(row.stddev, 0.2, 1e-15);
  ComparisonTable t{"t", {row}};
  EXPECT_EQ(t.to_csv().substr(0, t.to_csv().find('\n')), "label,mean,std,run0,run1,run2");
}

TEST_F(Scratch, CliExitCodes) {
  EXPECT_EQ(cli("train --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(cli("train --config " + write("bad.json", "{\"bogus\": 1}").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("train --scheme magic"), 2);
  EXPECT_EQ(cli("sweep --param w0 --values ,"), 2);
  EXPECT_EQ(cli("sweep --param nope --values 1"), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST_F(Scratch, CliTrainEvalAndGen) {
  const auto cfg = write("tiny.json", kTinyPlan);
  const std::string root = (dir / "runs").string();
  ASSERT_EQ(cli("train --config " + cfg.string() + " --output-root " + root + " --repetitions 1"),
            0);
  const auto ckpt = dir / "runs" / "tiny" / "seed-0" / "checkpoint.bin";
  ASSERT_TRUE(fs::exists(ckpt));
  const auto report = dir / "eval.json";
  ASSERT_EQ(cli("eval --config " + cfg.string() + " --checkpoint " + ckpt.string() +
                " --report " + report.string()),
            0);
  // Evaluating the saved model reproduces the run's own report.
  EXPECT_EQ(slurp(report), slurp(dir / "runs" / "tiny" / "seed-0" / "report.json"));

  ASSERT_EQ(cli("gen --config " + cfg.string() + " --out " + (dir / "feat").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "feat" / "source.csv"));
  EXPECT_TRUE(fs::exists(dir / "feat" / "target.csv"));

  // Training on the exported files matches training on the generated data.
  auto plan = tiny();
  plan.repetitions = 1;
  plan.data.source_features = dir / "feat" / "source.csv";
  plan.data.target_features = dir / "feat" / "target.csv";
  plan.name = "from-files";
  const auto from_files = run(plan);
  EXPECT_EQ(slurp(from_files[0].dir / "metrics.jsonl"),
            slurp(dir / "runs" / "tiny" / "seed-0" / "metrics.jsonl"));
}

TEST_F(Scratch, CliSweepWritesComparison) {
  const auto cfg = write("tiny.json", kTinyPlan);
  ASSERT_EQ(cli("sweep --config " + cfg.string() + " --output-root " + (dir / "runs").string() +
                " --repetitions 1 --param w0 --values 0.5,1.5"),
            0);
  const auto csv = slurp(dir / "runs" / "tiny" / "sweep-w0" / "comparison.csv");
  EXPECT_NE(csv.find("\n0.5,"), std::string::npos);
  EXPECT_NE(csv.find("\n1.5,"), std::string::npos);
}
