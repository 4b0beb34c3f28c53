#include "unida/experiment.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "unida/errors.hpp"
#include "unida/format.hpp"
#include "unida/model.hpp"

namespace unida {

using json = nlohmann::ordered_json;

namespace {

// Strict object reader: every key must be consumed.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  bool get_if(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return false;
    get(key, out);
    return true;
  }

  const json* child(const char* key) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Scheme scheme_from(const std::string& s) {
  auto v = parse_scheme(s);
  if (!v) throw ConfigError("unknown scheme '" + s + "'");
  return *v;
}

SchemeThresholds thresholds_from(const json& j, const std::string& where, SchemeThresholds t) {
  Fields f(j, where);
  f.get("alpha_start", t.alpha_start);
  f.get("w0", t.w0);
  f.get("w_beta", t.w_beta);
  f.finish();
  return t;
}

json thresholds_json(const SchemeThresholds& t) {
  return json{{"alpha_start", t.alpha_start}, {"w0", t.w0}, {"w_beta", t.w_beta}};
}

void read_train(const json& j, TrainConfig& cfg) {
  Fields f(j, "train");
  std::string scheme = std::string(to_string(cfg.scheme));
  f.get("scheme", scheme);
  cfg.scheme = scheme_from(scheme);
  cfg.apply_thresholds(default_thresholds(cfg.scheme));
  f.get("gamma", cfg.gamma);
  f.get("w0", cfg.w0);
  f.get("w_beta", cfg.w_beta);
  f.get("alpha_start", cfg.alpha_start);
  double static_alpha = 0.0;
  if (f.get_if("static_w_alpha", static_alpha)) cfg.static_w_alpha = static_alpha;
  f.get("pseudo_labels", cfg.pseudo_labels);
  std::string mode = std::string(to_string(cfg.diversity_mode));
  f.get("diversity_mode", mode);
  auto dm = parse_diversity_mode(mode);
  if (!dm) throw ConfigError("unknown diversity_mode '" + mode + "'");
  cfg.diversity_mode = *dm;
  f.get("total_steps", cfg.total_steps);
  f.get("batch_size", cfg.batch_size);
  f.get("lr", cfg.lr);
  f.get("momentum", cfg.momentum);
  std::string grl = std::string(to_string(cfg.grl_mode));
  f.get("grl_mode", grl);
  auto gm = parse_grl_mode(grl);
  if (!gm) throw ConfigError("unknown grl_mode '" + grl + "'");
  cfg.grl_mode = *gm;
  f.get("grl_lambda", cfg.grl_lambda);
  f.get("feature_hidden", cfg.feature_hidden);
  f.get("feature_dim", cfg.feature_dim);
  f.get("domain_hidden", cfg.domain_hidden);
  f.finish();
}

json train_json(const TrainConfig& c) {
  json j;
  j["scheme"] = std::string(to_string(c.scheme));
  j["gamma"] = c.gamma;
  j["w0"] = c.w0;
  j["w_beta"] = c.w_beta;
  j["alpha_start"] = c.alpha_start;
  j["static_w_alpha"] = c.static_w_alpha ? json(*c.static_w_alpha) : json(nullptr);
  j["pseudo_labels"] = c.pseudo_labels;
  j["diversity_mode"] = std::string(to_string(c.diversity_mode));
  j["total_steps"] = c.total_steps;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["grl_mode"] = std::string(to_string(c.grl_mode));
  j["grl_lambda"] = c.grl_lambda;
  j["feature_hidden"] = c.feature_hidden;
  j["feature_dim"] = c.feature_dim;
  j["domain_hidden"] = c.domain_hidden;
  return j;
}

void read_data(const json& j, DataPlan& d) {
  Fields f(j, "data");
  if (const json* ls = f.child("label_sets")) {
    Fields l(*ls, "data.label_sets");
    if (ls->contains("n_shared") || ls->contains("n_source_private") ||
        ls->contains("n_target_private")) {
      std::size_t a = 0, b = 0, c = 0;
      l.get("n_shared", a);
      l.get("n_source_private", b);
      l.get("n_target_private", c);
      d.label_sets = LabelSetSpec::dense(a, b, c);
    } else {
      d.label_sets = {};
      l.get("shared", d.label_sets.shared);
      l.get("source_private", d.label_sets.source_private);
      l.get("target_private", d.label_sets.target_private);
    }
    l.finish();
  }
  if (const json* s = f.child("synthetic")) {
    Fields g(*s, "data.synthetic");
    auto& o = d.synthetic;
    g.get("dim", o.dim);
    g.get("per_class", o.per_class);
    g.get("center_spread", o.center_spread);
    g.get("noise", o.noise);
    g.get("rotation_deg", o.shift.rotation_deg);
    g.get("translation", o.shift.translation);
    g.get("scale", o.shift.scale);
    g.get("noise_inflation", o.shift.noise_inflation);
    g.get("seed", d.data_seed);
    g.finish();
  }
  std::string path;
  if (f.get_if("source_features", path)) d.source_features = path;
  if (f.get_if("target_features", path)) d.target_features = path;
  f.finish();
}

json data_json(const DataPlan& d) {
  json j;
  j["label_sets"] = json{{"shared", d.label_sets.shared},
                         {"source_private", d.label_sets.source_private},
                         {"target_private", d.label_sets.target_private}};
  const auto& o = d.synthetic;
  j["synthetic"] = json{{"dim", o.dim},
                        {"per_class", o.per_class},
                        {"center_spread", o.center_spread},
                        {"noise", o.noise},
                        {"rotation_deg", o.shift.rotation_deg},
                        {"translation", o.shift.translation},
                        {"scale", o.shift.scale},
                        {"noise_inflation", o.shift.noise_inflation},
                        {"seed", d.data_seed}};
  j["source_features"] = d.source_features ? json(d.source_features->string()) : json(nullptr);
  j["target_features"] = d.target_features ? json(d.target_features->string()) : json(nullptr);
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string value_label(double v) { return fmt_double(v); }

}  // namespace

std::vector<std::uint64_t> ExperimentPlan::run_seeds() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < repetitions; ++i) out.push_back(seed + i);
  return out;
}

void ExperimentPlan::validate() const {
  if (name.empty()) throw ConfigError("plan name must be non-empty");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  train.validate();
  data.label_sets.validate();
  if (data.source_features.has_value() != data.target_features.has_value()) {
    throw ConfigError("source_features and target_features must be given together");
  }
  if (data.source_features) {
    for (const auto& p : {*data.source_features, *data.target_features}) {
      if (!std::filesystem::exists(p)) throw ConfigError("feature file not found: " + p.string());
    }
  }
}

ExperimentPlan default_plan() {
  ExperimentPlan plan;
  plan.name = "synthetic";
  plan.data.label_sets = LabelSetSpec::dense(4, 2, 6);
  auto& s = plan.data.synthetic;
  s.dim = 16;
  // Enough samples per class that the label classifier stays calibrated
  // instead of memorizing the source set.
  s.per_class = 1000;
  s.center_spread = 1.0;
  s.noise = 0.5;
  s.shift.rotation_deg = 75.0;
  s.shift.translation = 1.0;
  s.shift.scale = 1.0;
  s.shift.noise_inflation = 1.2;
  // A full-strength reversal erases the private-class signal D carries.
  plan.train.grl_lambda = 0.01;
  return plan;
}

ExperimentPlan plan_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  ExperimentPlan plan = default_plan();
  Fields f(j, "config");
  f.get("name", plan.name);
  std::string root;
  if (f.get_if("output_root", root)) plan.output_root = root;
  f.get("repetitions", plan.repetitions);
  f.get("seed", plan.seed);
  f.get("workers", plan.workers);
  if (const json* t = f.child("train")) read_train(*t, plan.train);
  if (const json* d = f.child("data")) read_data(*d, plan.data);
  if (const json* th = f.child("thresholds")) {
    if (!th->is_object()) throw ConfigError("thresholds: expected an object");
    for (const auto& [k, v] : th->items()) {
      const Scheme s = scheme_from(k);
      plan.thresholds[s] = thresholds_from(v, "thresholds." + k, default_thresholds(s));
    }
  }
  f.finish();
  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return plan_from_json(ss.str());
}

std::string plan_to_json(const ExperimentPlan& plan) {
  json j;
  j["name"] = plan.name;
  j["output_root"] = plan.output_root.empty() ? json(nullptr) : json(plan.output_root.string());
  j["repetitions"] = plan.repetitions;
  j["seed"] = plan.seed;
  j["workers"] = plan.workers;
  j["train"] = train_json(plan.train);
  j["data"] = data_json(plan.data);
  json th = json::object();
  for (const auto& [s, t] : plan.thresholds) th[std::string(to_string(s))] = thresholds_json(t);
  j["thresholds"] = th;
  return j.dump(2) + "\n";
}

std::filesystem::path resolve_output_root(const ExperimentPlan& plan) {
  if (!plan.output_root.empty()) return plan.output_root;
  if (const char* env = std::getenv("UNIDA_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

LoadedData load_data(const DataPlan& data, std::uint64_t repetition_offset) {
  data.label_sets.validate();
  if (data.source_features) {
    const auto src_classes = data.label_sets.source_classes();
    const auto tgt_classes = data.label_sets.target_classes();
    LoadedData out;
    out.source = load_features(*data.source_features, Domain::source, true, src_classes);
    // Labels of the target file, if any, are read for evaluation only.
    std::ifstream probe(*data.target_features);
    std::string header;
    std::getline(probe, header);
    const bool has_labels = header.find("labeled=1") != std::string::npos;
    out.target = load_features(*data.target_features, Domain::target, has_labels, tgt_classes);
    if (out.source.dim() != out.target.dim()) {
      throw ConfigError("source and target feature files differ in dimension");
    }
    return out;
  }
  auto [src, tgt] = gen_synthetic(data.label_sets, data.synthetic, data.data_seed + repetition_offset);
  return {std::move(src), std::move(tgt)};
}

RunResult run_one(const ExperimentPlan& plan, std::size_t repetition, const RunOptions& opts) {
  const auto& spec = plan.data.label_sets;
  const auto data = load_data(plan.data, repetition);

  ExperimentPlan effective = plan;
  effective.seed = plan.seed + repetition;
  effective.repetitions = 1;
  effective.data.data_seed = plan.data.data_seed + repetition;
  TrainConfig cfg = plan.train;
  cfg.seed = effective.seed;

  const auto source = source_samples(data.source, spec);
  auto trained = train(source, data.target.features, spec.source_classes().size(), cfg);

  RunResult result;
  result.seed = cfg.seed;
  const auto target_records = score_batch(trained.model, data.target.features, cfg.scheme);
  const auto source_records = score_batch(trained.model, data.source.features, cfg.scheme);

  std::vector<GroupHistograms> hists;
  if (data.target.labeled()) {
    const auto src_classes = spec.source_classes();
    std::vector<Prediction> preds;
    preds.reserve(target_records.size());
    for (std::size_t i = 0; i < target_records.size(); ++i) {
      preds.push_back(decide(target_records[i], cfg.w0, src_classes, i));
    }
    auto report = evaluate_predictions(preds, data.target.labels, spec);
    report.w0 = cfg.w0;
    report.scheme = cfg.scheme;
    result.report = std::move(report);

    const auto grouped = group_scores(source_records, data.source.labels, target_records,
                                      data.target.labels, spec);
    hists = score_distributions(grouped, cfg.scheme);
    for (const auto& h : hists) {
      result.group_means.push_back({h.group, h.size, h.mean_d, h.mean_max_prob, h.mean_w});
    }
  }

  if (!opts.write_outputs) return result;

  result.dir = resolve_output_root(plan) / plan.name / ("seed-" + std::to_string(cfg.seed));
  std::filesystem::create_directories(result.dir);
  std::vector<std::string> files;
  auto emit = [&](const std::string& file, const std::string& text) {
    write_text(result.dir / file, text);
    files.push_back(file);
  };

  emit("config.json", plan_to_json(effective));
  {
    std::ostringstream m;
    write_metrics(m, trained.log);
    emit("metrics.jsonl", m.str());
  }
  {
    std::vector<ScoreDumpRow> rows;
    for (std::size_t i = 0; i < source_records.size(); ++i) {
      rows.push_back({i, "source", data.source.labels[i], &source_records[i]});
    }
    for (std::size_t i = 0; i < target_records.size(); ++i) {
      std::optional<int> label;
      if (data.target.labeled()) label = data.target.labels[i];
      rows.push_back({i, "target", label, &target_records[i]});
    }
    std::ostringstream s;
    write_score_dump(s, rows);
    emit("scores.csv", s.str());
  }
  if (result.report) {
    emit("report.json", report_json(*result.report));
    emit("report.txt", report_table(*result.report));
    std::ostringstream h;
    export_score_distributions(h, hists);
    emit("histograms.csv", h.str());
  }
  {
    std::ostringstream ck(std::ios::binary);
    write_checkpoint(trained.model, ck);
    emit("checkpoint.bin", ck.str());
  }

  json manifest;
  manifest["name"] = plan.name;
  manifest["seed"] = cfg.seed;
  manifest["config"] = json::parse(plan_to_json(effective));
  manifest["files"] = files;
  write_text(result.dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

std::vector<RunResult> run(const ExperimentPlan& plan, const RunOptions& opts) {
  plan.validate();
  auto all = run_variants({{plan.name, plan}}, plan.workers, opts);
  return std::move(all.front());
}

std::vector<std::vector<RunResult>> run_variants(const std::vector<Variant>& variants,
                                                 std::size_t workers, const RunOptions& opts) {
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  std::vector<std::vector<RunResult>> results(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    variants[v].plan.validate();
    results[v].resize(variants[v].plan.repetitions);
    for (std::size_t r = 0; r < variants[v].plan.repetitions; ++r) jobs.emplace_back(v, r);
  }

  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
  // Runs share nothing mutable; each is internally single-threaded.
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(workers))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto [v, r] = jobs[static_cast<std::size_t>(i)];
    try {
      results[v][r] = run_one(variants[v].plan, r, opts);
    } catch (...) {
#pragma omp critical(unida_run_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::w_alpha_static: return "w_alpha_static";
    case SweepParameter::w_beta: return "w_beta";
    case SweepParameter::w0: return "w0";
  }
  return "?";
}

std::optional<SweepParameter> parse_sweep_parameter(std::string_view s) {
  for (auto p : {SweepParameter::w_alpha_static, SweepParameter::w_beta, SweepParameter::w0}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

ExperimentPlan with_parameter(const ExperimentPlan& base, SweepParameter p, double value) {
  ExperimentPlan plan = base;
  switch (p) {
    case SweepParameter::w_alpha_static: plan.train.static_w_alpha = value; break;
    case SweepParameter::w_beta: plan.train.w_beta = value; break;
    case SweepParameter::w0: plan.train.w0 = value; break;
  }
  plan.name = base.name + "/sweep-" + std::string(to_string(p)) + "-" + value_label(value);
  return plan;
}

ComparisonRow summarize(std::string label, const std::vector<RunResult>& runs) {
  ComparisonRow row;
  row.label = std::move(label);
  for (const auto& r : runs) {
    if (!r.report) throw ConfigError("comparison needs labeled target data");
    row.accuracies.push_back(r.report->average_class_accuracy);
  }
  const double n = static_cast<double>(row.accuracies.size());
  for (double a : row.accuracies) row.mean += a;
  row.mean /= n;
  if (row.accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
    row.stddev = std::sqrt(ss / (n - 1.0));
  }
  return row;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "label,mean,std";
  const std::size_t reps = rows.empty() ? 0 : rows.front().accuracies.size();
  for (std::size_t i = 0; i < reps; ++i) out << ",run" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << r.label << ',' << fmt_double(r.mean) << ',' << fmt_double(r.stddev);
    for (double a : r.accuracies) out << ',' << fmt_double(a);
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_text() const {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
  std::ostringstream out;
  out << title << '\n';
  out << std::left << std::setw(static_cast<int>(width)) << "variant" << "average class accuracy (%)\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.label << r.mean * 100.0 << " +- "
        << r.stddev * 100.0 << "  [";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
      out << (i ? " " : "") << r.accuracies[i] * 100.0;
    }
    out << "]\n";
  }
  return out.str();
}

ComparisonTable sweep(const ExperimentPlan& plan, SweepParameter p,
                      const std::vector<double>& values, const RunOptions& opts) {
  if (values.empty()) throw ConfigError("sweep: empty value list");
  std::vector<Variant> variants;
  for (double v : values) variants.push_back({value_label(v), with_parameter(plan, p, v)});
  const auto results = run_variants(variants, plan.workers, opts);
  ComparisonTable table;
  table.title = "sweep of " + std::string(to_string(p)) + " (" + plan.name + ")";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    table.rows.push_back(summarize(variants[i].label, results[i]));
  }
  return table;
}

std::vector<Variant> ablation_variants(const ExperimentPlan& base, std::string_view family) {
  std::vector<Variant> out;
  auto variant = [&](const std::string& label, auto&& edit) {
    ExperimentPlan p = base;
    p.name = base.name + "/" + std::string(family) + "-" + label;
    edit(p);
    out.push_back({label, std::move(p)});
  };
  if (family == "scoring") {
    for (Scheme s : all_schemes()) {
      variant(std::string(to_string(s)), [&](ExperimentPlan& p) {
        p.train.scheme = s;
        if (auto it = base.thresholds.find(s); it != base.thresholds.end()) {
          p.train.apply_thresholds(it->second);
        } else if (s != base.train.scheme) {
          p.train.apply_thresholds(default_thresholds(s));
        }
      });
    }
  } else if (family == "components") {
    variant("full", [](ExperimentPlan&) {});
    variant("no_pseudo_labels", [](ExperimentPlan& p) { p.train.pseudo_labels = false; });
    variant("w_alpha_0", [](ExperimentPlan& p) { p.train.static_w_alpha = 0.0; });
    variant("static_w_alpha_1.2", [](ExperimentPlan& p) { p.train.static_w_alpha = 1.2; });
    variant("no_diversity", [](ExperimentPlan& p) { p.train.diversity_mode = DiversityMode::off; });
    variant("diversity_target_only",
            [](ExperimentPlan& p) { p.train.diversity_mode = DiversityMode::target_only; });
  } else {
    throw ConfigError("unknown ablation family '" + std::string(family) +
                      "' (expected scoring or components)");
  }
  return out;
}

ComparisonTable ablate(const ExperimentPlan& plan, std::string_view family, const RunOptions& opts) {
  const auto variants = ablation_variants(plan, family);
  const auto results = run_variants(variants, plan.workers, opts);
  ComparisonTable table;
  table.title = "ablation: " + std::string(family) + " (" + plan.name + ")";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    table.rows.push_back(summarize(variants[i].label, results[i]));
  }
  return table;
}

}  // namespace unida
