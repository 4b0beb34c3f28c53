#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unida/data.hpp"
#include "unida/scoring.hpp"

namespace unida {

class ModelBundle;

struct Prediction {
  std::size_t sample_id = 0;
  ClassId raw_argmax = 0;  // a class of Y_s
  double w = 0.0;
  ClassId decision = kTau;  // raw_argmax if w > w0, else tau
};

// `source_classes[i]` is the class id of classifier output i.
Prediction decide(const ScoreRecord& record, double w0, std::span<const ClassId> source_classes,
                  std::size_t sample_id = 0);

struct ClassRecall {
  ClassId label = 0;  // kTau for the unknown class
  std::size_t count = 0;
  std::size_t correct = 0;
  double recall = 0.0;
};

struct EvalReport {
  // Shared classes in LabelSetSpec order, then tau. Classes without test
  // samples are listed in `excluded` and left out of the averages.
  std::vector<ClassRecall> per_class;
  std::vector<ClassId> excluded;
  double average_class_accuracy = 0.0;  // macro mean over per_class
  double micro_accuracy = 0.0;          // fraction of all samples correct
  std::size_t n_samples = 0;
  std::size_t n_tau_predictions = 0;
  double w0 = 0.0;
  Scheme scheme = Scheme::ours;
};

// Pure scoring of decisions against hidden target labels.
EvalReport evaluate_predictions(std::span<const Prediction> predictions,
                                std::span<const ClassId> true_labels, const LabelSetSpec& spec);

// Deployment-stage classification of the target set with tau rejection.
EvalReport evaluate(const ModelBundle& m, const DomainDataset& target, const LabelSetSpec& spec,
                    double w0, Scheme scheme);

std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

// Histograms of score components per sample group.
enum class ScoreGroup { source_shared, source_private, target_shared, target_private };
std::string_view to_string(ScoreGroup g);

struct GroupedScore {
  ScoreGroup group;
  const ScoreRecord* record;
};

inline constexpr std::size_t kHistogramBins = 50;

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::array<std::size_t, kHistogramBins> counts{};

  // Values outside [lo, hi] go to the edge bins; hi falls in the last bin.
  void add(double v);
  std::size_t total() const;
};

struct GroupHistograms {
  ScoreGroup group;
  std::size_t size = 0;
  Histogram d, max_prob, w;
  double mean_d = 0.0, mean_max_prob = 0.0, mean_w = 0.0;
};

// One entry per group present in `records`, in enum order.
std::vector<GroupHistograms> score_distributions(std::span<const GroupedScore> records,
                                                 Scheme scheme);

// CSV: group,quantity,bin,bin_lo,bin_hi,count
void export_score_distributions(std::ostream& out, std::span<const GroupHistograms> groups);

// Groups every source and target sample of a run by its true label.
std::vector<GroupedScore> group_scores(std::span<const ScoreRecord> source_records,
                                       std::span<const ClassId> source_labels,
                                       std::span<const ScoreRecord> target_records,
                                       std::span<const ClassId> target_labels,
                                       const LabelSetSpec& spec);

}  // namespace unida
