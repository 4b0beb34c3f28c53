#include "unida/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "json.hpp"
#include "unida/errors.hpp"

namespace unida {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::size_t> iota_from(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> v(count);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace

std::string_view to_string(GrlMode m) { return m == GrlMode::constant ? "constant" : "ramp"; }

std::optional<GrlMode> parse_grl_mode(std::string_view s) {
  if (s == "constant") return GrlMode::constant;
  if (s == "ramp") return GrlMode::ramp;
  return std::nullopt;
}

SchemeThresholds default_thresholds(Scheme s) {
  switch (s) {
    case Scheme::ours: return {1.5, 1.0, 0.8};
    case Scheme::uan: return {0.5, 0.0, -0.2};
    case Scheme::entropy:
    case Scheme::ours_no_d:
    case Scheme::ours_no_maxy: return {0.75, 0.5, 0.4};
  }
  return {1.5, 1.0, 0.8};
}

void TrainConfig::apply_thresholds(const SchemeThresholds& t) {
  alpha_start = t.alpha_start;
  w0 = t.w0;
  w_beta = t.w_beta;
}

void TrainConfig::validate() const {
  const auto range = score_range(scheme);
  auto in_range = [&](double v) { return v >= range.lo && v <= range.hi; };
  if (!in_range(w0)) {
    throw ConfigError("w0 must lie in the score range of scheme " + std::string(to_string(scheme)));
  }
  if (!std::isfinite(w_beta) || !std::isfinite(alpha_start)) {
    throw ConfigError("thresholds must be finite");
  }
  if (static_w_alpha && !std::isfinite(*static_w_alpha)) {
    throw ConfigError("static_w_alpha must be finite");
  }
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(grl_lambda >= 0.0)) throw ConfigError("grl_lambda must be >= 0");
  if (feature_dim == 0) throw ConfigError("feature_dim must be >= 1");
  for (auto h : feature_hidden) {
    if (h == 0) throw ConfigError("feature_hidden widths must be >= 1");
  }
  for (auto h : domain_hidden) {
    if (h == 0) throw ConfigError("domain_hidden widths must be >= 1");
  }
}

double w_alpha(std::size_t t, std::size_t total_steps, double w0, double start) {
  if (total_steps < 1) throw ContractError("w_alpha: T must be >= 1");
  if (t > total_steps) throw ContractError("w_alpha: t must lie in [0, T]");
  if (t == total_steps) return w0;
  return start - (static_cast<double>(t) / static_cast<double>(total_steps)) * (start - w0);
}

Architecture make_architecture(const TrainConfig& cfg, std::size_t input_dim,
                               std::size_t num_source_classes) {
  Architecture a;
  a.feature = {input_dim, cfg.feature_hidden, cfg.feature_dim, Activation::none};
  a.label = {cfg.feature_dim, {}, num_source_classes, Activation::softmax};
  a.domain = {cfg.feature_dim, cfg.domain_hidden, 1, Activation::sigmoid};
  return a;
}

StepGraph build_step_graph(const ModelBundle& m, const DomainBatch& batch, const TrainConfig& cfg,
                           double w_alpha_now, double grl_lambda_now,
                           const std::vector<double>* target_scores) {
  const std::size_t ns = batch.source_x.rows();
  const std::size_t nt = batch.target_x.rows();
  if (ns == 0 || nt == 0 || batch.source_y.size() != ns) {
    throw ContractError("batch needs at least one labeled source and one target sample");
  }

  StepGraph g;
  g.forward = forward_graph(m, concat_rows(batch.source_x, batch.target_x), grl_lambda_now);
  const auto src_rows = iota_from(0, ns);
  const auto tgt_rows = iota_from(ns, nt);
  g.source_probs = ad::gather_rows(g.forward.probs, src_rows);
  g.target_probs = ad::gather_rows(g.forward.probs, tgt_rows);
  g.d_source = ad::gather_rows(g.forward.domain, src_rows);
  g.d_target = ad::gather_rows(g.forward.domain, tgt_rows);

  if (target_scores) {
    if (target_scores->size() != nt) throw ContractError("one target score per sample required");
    g.target_scores = *target_scores;
  } else {
    for (const auto& r : score_outputs(g.target_probs->value, g.d_target->value, cfg.scheme)) {
      g.target_scores.push_back(r.w);
    }
  }

  const double alpha = cfg.pseudo_labels ? w_alpha_now : std::numeric_limits<double>::infinity();
  auto l_c = loss_classification(g.source_probs, batch.source_y, g.target_probs, g.target_scores,
                                 alpha, cfg.gamma);
  auto l_bd = loss_batch_diversity(g.source_probs, g.target_probs, g.target_scores, cfg.w_beta,
                                   cfg.diversity_mode);
  auto l_d = loss_domain(g.d_source, g.d_target);
  g.loss = loss_compound(l_c, l_bd, l_d);
  return g;
}

Trainer::Trainer(ModelBundle model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)), params_(model_.parameters()) {
  cfg_.validate();
  for (const auto& p : params_) velocity_.push_back(Tensor::zeros_like(p->value));
}

double Trainer::current_w_alpha() const {
  if (cfg_.static_w_alpha) return *cfg_.static_w_alpha;
  return w_alpha(step_, cfg_.total_steps, cfg_.w0, cfg_.alpha_start);
}

double Trainer::current_grl_lambda() const {
  if (cfg_.grl_mode == GrlMode::constant) return cfg_.grl_lambda;
  return cfg_.grl_lambda * grl_ramp(step_, cfg_.total_steps);
}

StepRecord Trainer::train_step(const DomainBatch& batch) {
  if (step_ >= cfg_.total_steps) throw ContractError("train_step: already at t == T");
  StepRecord rec;
  rec.step = step_;
  rec.w_alpha = current_w_alpha();
  rec.grl_lambda = current_grl_lambda();

  ad::zero_grad(params_);
  try {
    auto g = build_step_graph(model_, batch, cfg_, rec.w_alpha, rec.grl_lambda);
    ad::backward(g.loss.total);
    rec.loss = g.loss.breakdown;
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step_) + ": " + e.what());
  }

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = cfg_.momentum * v[j] + p->grad[j];
      p->value[j] -= cfg_.lr * v[j];
    }
    if (!p->value.all_finite()) {
      throw NumericError("step " + std::to_string(step_) + ": parameter update is not finite");
    }
  }
  ++step_;
  return rec;
}

TrainResult train(const SourceSamples& source, const Tensor& target_features,
                  std::size_t num_source_classes, const TrainConfig& cfg) {
  // T = 0 is accepted here and yields the untouched initial model.
  TrainConfig checked = cfg;
  checked.total_steps = std::max<std::size_t>(cfg.total_steps, 1);
  checked.validate();
  if (source.features.cols() != target_features.cols()) {
    throw ConfigError("source and target feature widths differ");
  }
  const auto arch = make_architecture(cfg, source.features.cols(), num_source_classes);
  auto model = ModelBundle::init(arch.feature, arch.label, arch.domain, splitmix64(cfg.seed));
  if (cfg.total_steps == 0) return {std::move(model), {}};

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5eed5eed5eed5eedULL));
  Trainer trainer(std::move(model), cfg);
  std::vector<StepRecord> log;
  log.reserve(cfg.total_steps);
  while (trainer.step() < cfg.total_steps) {
    log.push_back(trainer.train_step(sample_batch(source, target_features, cfg.batch_size, rng)));
  }
  return {trainer.model(), std::move(log)};
}

void write_metrics(std::ostream& out, const std::vector<StepRecord>& log) {
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["l_c"] = r.loss.l_c;
    j["l_bd"] = r.loss.l_bd;
    j["l_d"] = r.loss.l_d;
    j["total"] = r.loss.total;
    j["n_pseudo_selected"] = r.loss.n_pseudo_selected;
    j["n_diversity_selected"] = r.loss.n_diversity_selected;
    j["w_alpha"] = r.w_alpha;
    j["grl_lambda"] = r.grl_lambda;
    out << j.dump() << '\n';
  }
}

}  // namespace unida
