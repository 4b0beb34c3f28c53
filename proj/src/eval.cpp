#include "unida/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "unida/errors.hpp"
#include "unida/format.hpp"
#include "unida/model.hpp"

namespace unida {

Prediction decide(const ScoreRecord& record, double w0, std::span<const ClassId> source_classes,
                  std::size_t sample_id) {
  if (record.argmax >= source_classes.size() ||
      (!record.y_bar.empty() && record.y_bar.size() != source_classes.size())) {
    throw ContractError("decide: prediction does not match the source label set");
  }
  Prediction p;
  p.sample_id = sample_id;
  p.raw_argmax = source_classes[record.argmax];
  p.w = record.w;
  p.decision = record.w > w0 ? p.raw_argmax : kTau;
  return p;
}

EvalReport evaluate_predictions(std::span<const Prediction> predictions,
                                std::span<const ClassId> true_labels, const LabelSetSpec& spec) {
  if (predictions.empty()) throw ContractError("evaluate: target set is empty");
  if (predictions.size() != true_labels.size()) {
    throw ContractError("evaluate: one true label per prediction required");
  }
  std::vector<ClassRecall> all;
  for (ClassId c : spec.shared) all.push_back({c, 0, 0, 0.0});
  all.push_back({kTau, 0, 0, 0.0});
  auto slot = [&all](ClassId c) -> ClassRecall& {
    return *std::find_if(all.begin(), all.end(), [c](const ClassRecall& r) { return r.label == c; });
  };

  EvalReport report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const ClassId truth = spec.target_truth(true_labels[i]);
    auto& entry = slot(truth);
    ++entry.count;
    if (predictions[i].decision == truth) {
      ++entry.correct;
      ++correct;
    }
    if (predictions[i].decision == kTau) ++report.n_tau_predictions;
  }

  double sum = 0.0;
  for (auto& r : all) {
    if (r.count == 0) {
      report.excluded.push_back(r.label);
      continue;
    }
    r.recall = static_cast<double>(r.correct) / static_cast<double>(r.count);
    sum += r.recall;
    report.per_class.push_back(r);
  }
  report.average_class_accuracy =
      report.per_class.empty() ? 0.0 : sum / static_cast<double>(report.per_class.size());
  report.n_samples = predictions.size();
  report.micro_accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
  return report;
}

EvalReport evaluate(const ModelBundle& m, const DomainDataset& target, const LabelSetSpec& spec,
                    double w0, Scheme scheme) {
  if (target.size() == 0) throw ContractError("evaluate: target set is empty");
  if (!target.labeled()) throw ContractError("evaluate: target labels are required");
  const auto records = score_batch(m, target.features, scheme);
  const auto source_classes = spec.source_classes();
  std::vector<Prediction> preds(records.size());
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  // decide() is pure; per-sample slots keep the result order-independent.
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    preds[i] = decide(records[i], w0, source_classes, static_cast<std::size_t>(i));
  }
  auto report = evaluate_predictions(preds, target.labels, spec);
  report.w0 = w0;
  report.scheme = scheme;
  return report;
}

namespace {

std::string label_name(ClassId c) { return c == kTau ? "tau" : std::to_string(c); }

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["scheme"] = std::string(to_string(r.scheme));
  j["w0"] = r.w0;
  j["n_samples"] = r.n_samples;
  j["n_tau_predictions"] = r.n_tau_predictions;
  j["average_class_accuracy"] = r.average_class_accuracy;
  j["micro_accuracy"] = r.micro_accuracy;
  auto& per = j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_class) {
    per.push_back({{"label", label_name(c.label)},
                   {"count", c.count},
                   {"correct", c.correct},
                   {"recall", c.recall}});
  }
  auto& ex = j["excluded"] = nlohmann::ordered_json::array();
  for (auto c : r.excluded) ex.push_back(label_name(c));
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  out << "scheme " << to_string(r.scheme) << ", w0 = " << fmt_double(r.w0) << ", "
      << r.n_samples << " target samples, " << r.n_tau_predictions << " labelled tau\n";
  out << std::left << std::setw(8) << "class" << std::right << std::setw(8) << "count"
      << std::setw(10) << "correct" << std::setw(10) << "recall" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& c : r.per_class) {
    out << std::left << std::setw(8) << label_name(c.label) << std::right << std::setw(8) << c.count
        << std::setw(10) << c.correct << std::setw(10) << c.recall << '\n';
  }
  for (auto c : r.excluded) out << "warning: class " << label_name(c) << " has no test samples\n";
  out << "average class accuracy " << r.average_class_accuracy * 100.0 << "%\n";
  out << "overall accuracy       " << r.micro_accuracy * 100.0 << "%\n";
  return out.str();
}

std::string_view to_string(ScoreGroup g) {
  switch (g) {
    case ScoreGroup::source_shared: return "source-shared";
    case ScoreGroup::source_private: return "source-private";
    case ScoreGroup::target_shared: return "target-shared";
    case ScoreGroup::target_private: return "target-private";
  }
  return "?";
}

void Histogram::add(double v) {
  const double t = (v - lo) / (hi - lo) * static_cast<double>(kHistogramBins);
  const auto bin = static_cast<std::ptrdiff_t>(std::floor(t));
  const auto clamped = std::clamp<std::ptrdiff_t>(bin, 0, kHistogramBins - 1);
  ++counts[static_cast<std::size_t>(clamped)];
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<GroupHistograms> score_distributions(std::span<const GroupedScore> records,
                                                 Scheme scheme) {
  const auto range = score_range(scheme);
  std::vector<GroupHistograms> out;
  for (auto g : {ScoreGroup::source_shared, ScoreGroup::source_private, ScoreGroup::target_shared,
                 ScoreGroup::target_private}) {
    GroupHistograms h;
    h.group = g;
    h.w.lo = range.lo;
    h.w.hi = range.hi;
    for (const auto& r : records) {
      if (r.group != g) continue;
      ++h.size;
      h.d.add(r.record->d);
      h.max_prob.add(r.record->max_prob);
      h.w.add(r.record->w);
      h.mean_d += r.record->d;
      h.mean_max_prob += r.record->max_prob;
      h.mean_w += r.record->w;
    }
    if (h.size == 0) continue;
    const double n = static_cast<double>(h.size);
    h.mean_d /= n;
    h.mean_max_prob /= n;
    h.mean_w /= n;
    out.push_back(h);
  }
  return out;
}

void export_score_distributions(std::ostream& out, std::span<const GroupHistograms> groups) {
  out << "group,quantity,bin,bin_lo,bin_hi,count\n";
  for (const auto& g : groups) {
    const std::pair<const char*, const Histogram*> quantities[] = {
        {"d", &g.d}, {"max_prob", &g.max_prob}, {"w", &g.w}};
    for (const auto& [name, h] : quantities) {
      const double width = (h->hi - h->lo) / static_cast<double>(kHistogramBins);
      for (std::size_t b = 0; b < kHistogramBins; ++b) {
        out << to_string(g.group) << ',' << name << ',' << b << ','
            << fmt_double(h->lo + width * static_cast<double>(b)) << ','
            << fmt_double(h->lo + width * static_cast<double>(b + 1)) << ',' << h->counts[b]
            << '\n';
      }
    }
  }
}

std::vector<GroupedScore> group_scores(std::span<const ScoreRecord> source_records,
                                       std::span<const ClassId> source_labels,
                                       std::span<const ScoreRecord> target_records,
                                       std::span<const ClassId> target_labels,
                                       const LabelSetSpec& spec) {
  if (source_records.size() != source_labels.size() ||
      target_records.size() != target_labels.size()) {
    throw ContractError("group_scores: one label per record required");
  }
  std::vector<GroupedScore> out;
  for (std::size_t i = 0; i < source_records.size(); ++i) {
    out.push_back({spec.is_shared(source_labels[i]) ? ScoreGroup::source_shared
                                                    : ScoreGroup::source_private,
                   &source_records[i]});
  }
  for (std::size_t i = 0; i < target_records.size(); ++i) {
    out.push_back({spec.is_shared(target_labels[i]) ? ScoreGroup::target_shared
                                                    : ScoreGroup::target_private,
                   &target_records[i]});
  }
  return out;
}

}  // namespace unida
