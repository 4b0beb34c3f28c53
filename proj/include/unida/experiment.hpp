#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unida/data.hpp"
#include "unida/eval.hpp"
#include "unida/trainer.hpp"

namespace unida {

// Where the data of an experiment comes from.
struct DataPlan {
  LabelSetSpec label_sets = LabelSetSpec::dense(4, 2, 6);
  // Synthetic benchmark, used when no feature files are given.
  SyntheticOptions synthetic;
  std::uint64_t data_seed = 0;
  // Pre-extracted features. Target labels, if present, are used for evaluation only.
  std::optional<std::filesystem::path> source_features;
  std::optional<std::filesystem::path> target_features;
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::filesystem::path output_root;
  std::size_t repetitions = 3;
  std::uint64_t seed = 0;  // repetition i trains with seed + i on data_seed + i
  std::size_t workers = 1;
  TrainConfig train;
  DataPlan data;
  // Per-scheme threshold overrides used when an ablation switches scheme.
  std::map<Scheme, SchemeThresholds> thresholds;

  std::vector<std::uint64_t> run_seeds() const;
  void validate() const;
};

// Defaults of the synthetic benchmark: |Y| = 4, |Y_s private| = 2, |Y_t private| = 6.
ExperimentPlan default_plan();

// Parses the structured config. Missing fields take defaults; thresholds not
// given default to the scheme's values; unknown keys are errors.
ExperimentPlan plan_from_json(std::string_view text);
ExperimentPlan load_plan(const std::filesystem::path& path);
// Complete effective configuration, every field spelled out.
std::string plan_to_json(const ExperimentPlan& plan);

// Output root: plan value, else $UNIDA_OUTPUT_ROOT, else "runs".
std::filesystem::path resolve_output_root(const ExperimentPlan& plan);

struct LoadedData {
  DomainDataset source;
  DomainDataset target;  // labeled when hidden labels are available
};
LoadedData load_data(const DataPlan& data, std::uint64_t repetition_offset);

struct GroupMeans {
  ScoreGroup group;
  std::size_t size;
  double d, max_prob, w;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  std::optional<EvalReport> report;
  std::vector<GroupMeans> group_means;
};

struct RunOptions {
  bool write_outputs = true;
};

// Trains and evaluates one repetition, writing metrics.jsonl, report.json,
// report.txt, scores.csv, histograms.csv, checkpoint.bin, config.json and
// manifest.json under <root>/<name>/seed-<seed>/.
RunResult run_one(const ExperimentPlan& plan, std::size_t repetition, const RunOptions& opts = {});

// Every repetition of a plan, in parallel up to plan.workers.
std::vector<RunResult> run(const ExperimentPlan& plan, const RunOptions& opts = {});

enum class SweepParameter { w_alpha_static, w_beta, w0 };
std::string_view to_string(SweepParameter p);
std::optional<SweepParameter> parse_sweep_parameter(std::string_view s);

// Base plan with exactly one parameter changed.
ExperimentPlan with_parameter(const ExperimentPlan& base, SweepParameter p, double value);

struct ComparisonRow {
  std::string label;
  std::vector<double> accuracies;  // one per repetition
  double mean = 0.0;
  double stddev = 0.0;
};

struct ComparisonTable {
  std::string title;
  std::vector<ComparisonRow> rows;

  std::string to_csv() const;
  std::string to_text() const;
};

ComparisonRow summarize(std::string label, const std::vector<RunResult>& runs);

ComparisonTable sweep(const ExperimentPlan& plan, SweepParameter p,
                      const std::vector<double>& values, const RunOptions& opts = {});

// Named plan variants of an ablation family:
//   scoring     one row per scheme, each with its own thresholds
//   components  full, no pseudo-labels, w_alpha = 0, static w_alpha = 1.2,
//               no diversity loss, target-only diversity loss
struct Variant {
  std::string label;
  ExperimentPlan plan;
};
std::vector<Variant> ablation_variants(const ExperimentPlan& base, std::string_view family);

ComparisonTable ablate(const ExperimentPlan& plan, std::string_view family,
                       const RunOptions& opts = {});

// Runs many plans as one job pool, preserving order.
std::vector<std::vector<RunResult>> run_variants(const std::vector<Variant>& variants,
                                                 std::size_t workers, const RunOptions& opts);

}  // namespace unida
