#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "unida/autodiff.hpp"

namespace unida {

enum class DiversityMode { off, target_only, both };

std::string_view to_string(DiversityMode m);
std::optional<DiversityMode> parse_diversity_mode(std::string_view s);

// Probabilities are clamped at this floor before taking logs.
inline constexpr double kProbFloor = 1e-12;

struct LossBreakdown {
  double l_c = 0.0;
  double l_bd = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  std::size_t n_pseudo_selected = 0;
  std::size_t n_diversity_selected = 0;
};

// Mean of -ln(max(probs[i, labels[i]], floor)) over rows.
ad::Var cross_entropy(const ad::Var& probs, std::span<const std::size_t> labels);
ad::Var cross_entropy(const ad::Var& y_bar, std::size_t label);

// Indices i with scores[i] > threshold, ascending.
std::vector<std::size_t> select_above(std::span<const double> scores, double threshold);

struct ClassificationTerm {
  ad::Var loss;
  std::size_t n_selected = 0;
};

// Source cross-entropy plus gamma times the pseudo-label cross-entropy of
// targets scoring strictly above w_alpha. Pseudo-labels are the argmax of the
// current prediction (lowest index on ties) and carry no gradient. The target
// term is averaged over the whole target batch, non-selected samples counting
// as zero.
ClassificationTerm loss_classification(const ad::Var& source_probs,
                                       std::span<const std::size_t> source_labels,
                                       const ad::Var& target_probs,
                                       std::span<const double> target_scores, double w_alpha,
                                       double gamma);

// sum_j (mean_i probs[i, j])^2, in [1/k, 1].
ad::Var diversity_term(const ad::Var& probs);

struct DiversityTerm {
  ad::Var loss;
  std::size_t n_selected = 0;
};

// Diversity over all source rows plus the target rows scoring above w_beta.
DiversityTerm loss_batch_diversity(const ad::Var& source_probs, const ad::Var& target_probs,
                                   std::span<const double> target_scores, double w_beta,
                                   DiversityMode mode);

// Binary cross-entropy with source label 1 and target label 0, per-domain means.
ad::Var loss_domain(const ad::Var& d_source, const ad::Var& d_target);

struct CompoundLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

// total = l_c + l_bd + l_d. The domain term reaches F through the gradient
// reversal placed in front of D, which turns this into minimizing
// L_C + L_BD - L_D for F and C while D minimizes L_D.
CompoundLoss loss_compound(const ClassificationTerm& l_c, const DiversityTerm& l_bd,
                           const ad::Var& l_d);

}  // namespace unida
