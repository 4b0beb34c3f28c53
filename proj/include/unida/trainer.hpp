#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "unida/data.hpp"
#include "unida/losses.hpp"
#include "unida/model.hpp"
#include "unida/scoring.hpp"

namespace unida {

enum class GrlMode { constant, ramp };

std::string_view to_string(GrlMode m);
std::optional<GrlMode> parse_grl_mode(std::string_view s);

// Selection and decision thresholds, in the native range of a scoring scheme.
struct SchemeThresholds {
  double alpha_start;  // w_alpha at t = 0
  double w0;           // decision threshold and w_alpha at t = T
  double w_beta;       // diversity-loss selection
};

// Defaults per scheme. For `ours` these are 1.5 / 1.0 / 0.8; the [0, 1]
// schemes use half of that and `uan` the same values shifted down by one.
SchemeThresholds default_thresholds(Scheme s);

struct TrainConfig {
  double gamma = 0.6;
  double w0 = 1.0;
  double w_beta = 0.8;
  double alpha_start = 1.5;
  std::optional<double> static_w_alpha;
  bool pseudo_labels = true;
  DiversityMode diversity_mode = DiversityMode::both;
  Scheme scheme = Scheme::ours;

  std::size_t total_steps = 3000;
  std::size_t batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  GrlMode grl_mode = GrlMode::constant;
  double grl_lambda = 1.0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> feature_hidden{64, 64};
  std::size_t feature_dim = 32;
  std::vector<std::size_t> domain_hidden{64, 64};

  void apply_thresholds(const SchemeThresholds& t);
  // Throws ConfigError.
  void validate() const;
};

// 1.5 - (t/T)(1.5 - w0), generalized to an arbitrary start value.
double w_alpha(std::size_t t, std::size_t total_steps, double w0, double start = 1.5);

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  double w_alpha = 0.0;
  double grl_lambda = 0.0;
};

// Architecture for the three networks implied by a config.
struct Architecture {
  MlpSpec feature;
  MlpSpec label;
  MlpSpec domain;
};
Architecture make_architecture(const TrainConfig& cfg, std::size_t input_dim,
                               std::size_t num_source_classes);

// Everything one step needs, with selection already fixed. Exposed so tests
// can evaluate the compound loss with a frozen selection.
struct StepGraph {
  ForwardGraph forward;
  ad::Var source_probs, target_probs, d_source, d_target;
  std::vector<double> target_scores;
  CompoundLoss loss;
};

// Builds the full training graph for one batch. `target_scores`, if given,
// replaces the scores computed from this forward pass.
StepGraph build_step_graph(const ModelBundle& m, const DomainBatch& batch, const TrainConfig& cfg,
                           double w_alpha_now, double grl_lambda_now,
                           const std::vector<double>* target_scores = nullptr);

class Trainer {
 public:
  Trainer(ModelBundle model, TrainConfig cfg);

  // One SGD-with-momentum step on F, C and D. Throws NumericError naming the
  // step on non-finite loss, ContractError once t == T.
  StepRecord train_step(const DomainBatch& batch);

  double current_w_alpha() const;
  double current_grl_lambda() const;
  std::size_t step() const { return step_; }
  const ModelBundle& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  ModelBundle model_;
  TrainConfig cfg_;
  std::vector<ad::Var> params_;
  std::vector<Tensor> velocity_;
  std::size_t step_ = 0;
};

struct TrainResult {
  ModelBundle model;
  std::vector<StepRecord> log;
};

// Target labels are not an input: the trainer only ever sees target features.
TrainResult train(const SourceSamples& source, const Tensor& target_features,
                  std::size_t num_source_classes, const TrainConfig& cfg);

// One JSON object per line.
void write_metrics(std::ostream& out, const std::vector<StepRecord>& log);

}  // namespace unida
