// unida: experiment runner for selective pseudo-labeling domain adaptation.
//
//   unida gen    --out DIR            write synthetic source/target feature files
//   unida train  [--config FILE]      train + evaluate every repetition of a plan
//   unida eval   --checkpoint FILE    evaluate a saved model on the plan's target set
//   unida sweep  --param P --values V sensitivity of one threshold
//   unida ablate --ablation FAMILY    scoring schemes or loss components
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or parse
// error, 3 numeric failure during training.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unida/errors.hpp"
#include "unida/experiment.hpp"
#include "unida/model.hpp"

namespace {

using namespace unida;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct PlanFlags {
  std::string config;
  std::optional<std::string> name;
  std::optional<std::string> output_root;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> momentum;
  std::optional<double> gamma;
  std::optional<double> w0;
  std::optional<double> w_beta;
  std::optional<double> alpha_start;
  std::optional<double> static_w_alpha;
  bool no_pseudo_labels = false;
  std::optional<std::string> diversity_mode;
  std::optional<std::string> scheme;
  std::optional<std::string> grl_mode;
  std::optional<double> grl_lambda;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON)");
    app->add_option("--name", name, "Experiment name");
    app->add_option("--output-root", output_root, "Output root (default $UNIDA_OUTPUT_ROOT or runs)");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--repetitions", repetitions, "Seeded repetitions");
    app->add_option("--workers", workers, "Concurrent runs");
    app->add_option("--steps", steps, "Training steps T");
    app->add_option("--batch-size", batch_size, "Batch size (half source, half target)");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--momentum", momentum, "SGD momentum");
    app->add_option("--gamma", gamma, "Pseudo-label loss weight");
    app->add_option("--w0", w0, "Decision threshold");
    app->add_option("--w-beta", w_beta, "Diversity-loss selection threshold");
    app->add_option("--alpha-start", alpha_start, "Pseudo-label threshold at t = 0");
    app->add_option("--static-w-alpha", static_w_alpha, "Fixed pseudo-label threshold");
    app->add_flag("--no-pseudo-labels", no_pseudo_labels, "Disable target pseudo-labels");
    app->add_option("--diversity-mode", diversity_mode, "off | target_only | both");
    app->add_option("--scheme", scheme, "ours | uan | entropy | ours_no_d | ours_no_maxy");
    app->add_option("--grl-mode", grl_mode, "constant | ramp");
    app->add_option("--grl-lambda", grl_lambda, "Gradient reversal coefficient");
  }

  ExperimentPlan build() const {
    ExperimentPlan plan = config.empty() ? default_plan() : load_plan(config);
    if (name) plan.name = *name;
    if (output_root) plan.output_root = *output_root;
    if (seed) plan.seed = *seed;
    if (repetitions) plan.repetitions = *repetitions;
    if (workers) plan.workers = *workers;
    auto& t = plan.train;
    if (scheme) {
      auto s = parse_scheme(*scheme);
      if (!s) throw ConfigError("unknown scheme '" + *scheme + "'");
      if (*s != t.scheme) {
        t.scheme = *s;
        auto it = plan.thresholds.find(*s);
        t.apply_thresholds(it != plan.thresholds.end() ? it->second : default_thresholds(*s));
      }
    }
    if (steps) t.total_steps = *steps;
    if (batch_size) t.batch_size = *batch_size;
    if (lr) t.lr = *lr;
    if (momentum) t.momentum = *momentum;
    if (gamma) t.gamma = *gamma;
    if (w0) t.w0 = *w0;
    if (w_beta) t.w_beta = *w_beta;
    if (alpha_start) t.alpha_start = *alpha_start;
    if (static_w_alpha) t.static_w_alpha = *static_w_alpha;
    if (no_pseudo_labels) t.pseudo_labels = false;
    if (diversity_mode) {
      auto m = parse_diversity_mode(*diversity_mode);
      if (!m) throw ConfigError("unknown diversity mode '" + *diversity_mode + "'");
      t.diversity_mode = *m;
    }
    if (grl_mode) {
      auto m = parse_grl_mode(*grl_mode);
      if (!m) throw ConfigError("unknown grl mode '" + *grl_mode + "'");
      t.grl_mode = *m;
    }
    if (grl_lambda) t.grl_lambda = *grl_lambda;
    plan.validate();
    return plan;
  }
};

void write_table(const ComparisonTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "comparison.csv", std::ios::trunc) << table.to_csv();
  std::ofstream(dir / "comparison.txt", std::ios::trunc) << table.to_text();
  std::cout << table.to_text();
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad sweep value '" + tok + "'");
    }
  }
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Universal domain adaptation by sample selection"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Write synthetic source/target feature files");
  PlanFlags gen_flags;
  std::string gen_out;
  gen->add_option("--config", gen_flags.config, "Experiment config (JSON)");
  gen->add_option("--seed", gen_flags.seed, "Data seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate every repetition of a plan");
  PlanFlags train_flags;
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the plan's target set");
  PlanFlags eval_flags;
  std::string checkpoint;
  std::string eval_json;
  std::size_t eval_rep = 0;
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--repetition", eval_rep, "Which repetition's data to use");
  eval_cmd->add_option("--report", eval_json, "Write the JSON report here");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy as a function of one threshold");
  PlanFlags sweep_flags;
  std::string param;
  std::string values;
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--param", param, "w_alpha_static | w_beta | w0")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare scoring schemes or loss components");
  PlanFlags ablate_flags;
  std::string family = "scoring";
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--ablation", family, "scoring | components");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (gen->parsed()) {
    auto plan = gen_flags.build();
    if (gen_flags.seed) plan.data.data_seed = *gen_flags.seed;
    plan.data.source_features.reset();
    plan.data.target_features.reset();
    const auto data = load_data(plan.data, 0);
    std::filesystem::create_directories(gen_out);
    save_features(data.source, std::filesystem::path(gen_out) / "source.csv");
    save_features(data.target, std::filesystem::path(gen_out) / "target.csv");
    std::cout << "wrote " << data.source.size() << " source and " << data.target.size()
              << " target samples to " << gen_out << " (jaccard "
              << plan.data.label_sets.jaccard() << ")\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const auto plan = train_flags.build();
    const auto runs = run(plan);
    for (const auto& r : runs) {
      std::cout << "seed " << r.seed << " -> " << r.dir.string();
      if (r.report) std::cout << "  average class accuracy " << r.report->average_class_accuracy;
      std::cout << '\n';
    }
    if (runs.front().report) {
      write_table({plan.name, {summarize(plan.name, runs)}}, resolve_output_root(plan) / plan.name);
    }
    return 0;
  }

  if (eval_cmd->parsed()) {
    const auto plan = eval_flags.build();
    const auto model = load_checkpoint(checkpoint);
    const auto data = load_data(plan.data, eval_rep);
    if (!data.target.labeled()) throw ConfigError("target data carries no labels to evaluate against");
    const auto report =
        evaluate(model, data.target, plan.data.label_sets, plan.train.w0, plan.train.scheme);
    std::cout << report_table(report);
    if (!eval_json.empty()) std::ofstream(eval_json, std::ios::trunc) << report_json(report);
    return 0;
  }

  if (sweep_cmd->parsed()) {
    const auto plan = sweep_flags.build();
    const auto p = parse_sweep_parameter(param);
    if (!p) throw ConfigError("unknown sweep parameter '" + param + "'");
    const auto table = sweep(plan, *p, parse_values(values));
    write_table(table, resolve_output_root(plan) / plan.name / ("sweep-" + param));
    return 0;
  }

  if (ablate_cmd->parsed()) {
    const auto plan = ablate_flags.build();
    const auto table = ablate(plan, family);
    write_table(table, resolve_output_root(plan) / plan.name / ("ablation-" + family));
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
