#include "unida/losses.hpp"

#include "unida/errors.hpp"
#include "unida/scoring.hpp"

namespace unida {

namespace {

ad::Var zero() { return ad::leaf(Tensor::scalar(0.0)); }

}  // namespace

std::string_view to_string(DiversityMode m) {
  switch (m) {
    case DiversityMode::off: return "off";
    case DiversityMode::target_only: return "target_only";
    case DiversityMode::both: return "both";
  }
  return "?";
}

std::optional<DiversityMode> parse_diversity_mode(std::string_view s) {
  for (auto m : {DiversityMode::off, DiversityMode::target_only, DiversityMode::both}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

ad::Var cross_entropy(const ad::Var& probs, std::span<const std::size_t> labels) {
  if (labels.empty()) throw ContractError("cross_entropy: empty batch");
  return ad::scale(ad::mean(ad::log(ad::pick(probs, labels), kProbFloor)), -1.0);
}

ad::Var cross_entropy(const ad::Var& y_bar, std::size_t label) {
  const std::size_t labels[] = {label};
  return cross_entropy(y_bar, labels);
}

std::vector<std::size_t> select_above(std::span<const double> scores, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > threshold) out.push_back(i);
  }
  return out;
}

ClassificationTerm loss_classification(const ad::Var& source_probs,
                                       std::span<const std::size_t> source_labels,
                                       const ad::Var& target_probs,
                                       std::span<const double> target_scores, double w_alpha,
                                       double gamma) {
  if (source_labels.empty()) throw ContractError("loss_classification: empty source batch");
  if (!(gamma >= 0.0)) throw ContractError("loss_classification: gamma must be >= 0");
  const std::size_t n_target = target_probs->value.rows();
  if (target_scores.size() != n_target) {
    throw ContractError("loss_classification: one score per target sample required");
  }

  ClassificationTerm term;
  term.loss = cross_entropy(source_probs, source_labels);

  const auto selected = select_above(target_scores, w_alpha);
  term.n_selected = selected.size();
  if (selected.empty() || gamma == 0.0) return term;

  std::vector<std::size_t> pseudo;
  pseudo.reserve(selected.size());
  for (auto i : selected) pseudo.push_back(argmax(target_probs->value.row_span(i)));

  auto picked = ad::pick(ad::gather_rows(target_probs, selected), pseudo);
  auto target_ce = ad::scale(ad::sum(ad::log(picked, kProbFloor)),
                             -gamma / static_cast<double>(n_target));
  term.loss = ad::add(term.loss, target_ce);
  return term;
}

ad::Var diversity_term(const ad::Var& probs) {
  if (probs->value.size() == 0) throw ContractError("diversity_term: empty batch");
  return ad::sum(ad::square(ad::col_mean(probs)));
}

DiversityTerm loss_batch_diversity(const ad::Var& source_probs, const ad::Var& target_probs,
                                   std::span<const double> target_scores, double w_beta,
                                   DiversityMode mode) {
  if (target_scores.size() != target_probs->value.rows()) {
    throw ContractError("loss_batch_diversity: one score per target sample required");
  }
  DiversityTerm term;
  if (mode == DiversityMode::off) {
    term.loss = zero();
    return term;
  }
  const auto selected = select_above(target_scores, w_beta);
  term.n_selected = selected.size();

  if (selected.empty()) {
    term.loss = mode == DiversityMode::both ? diversity_term(source_probs) : zero();
    return term;
  }
  auto chosen = ad::gather_rows(target_probs, selected);
  term.loss = mode == DiversityMode::both ? diversity_term(ad::concat_rows(source_probs, chosen))
                                          : diversity_term(chosen);
  return term;
}

ad::Var loss_domain(const ad::Var& d_source, const ad::Var& d_target) {
  if (d_source->value.size() == 0 || d_target->value.size() == 0) {
    throw ContractError("loss_domain: both batches must be non-empty");
  }
  auto source_term = ad::mean(ad::log(d_source, kProbFloor));
  auto target_term = ad::mean(ad::log(ad::one_minus(d_target), kProbFloor));
  return ad::scale(ad::add(source_term, target_term), -1.0);
}

CompoundLoss loss_compound(const ClassificationTerm& l_c, const DiversityTerm& l_bd,
                           const ad::Var& l_d) {
  CompoundLoss out;
  out.total = ad::add(ad::add(l_c.loss, l_bd.loss), l_d);
  auto& b = out.breakdown;
  b.l_c = l_c.loss->value.item();
  b.l_bd = l_bd.loss->value.item();
  b.l_d = l_d->value.item();
  b.total = out.total->value.item();
  b.n_pseudo_selected = l_c.n_selected;
  b.n_diversity_selected = l_bd.n_selected;
  return out;
}

}  // namespace unida
