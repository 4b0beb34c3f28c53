#include "unida/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "unida/errors.hpp"
#include "unida/format.hpp"
#include "unida/model.hpp"

namespace unida {

namespace {

void require_probability(std::span<const double> p) {
  if (p.empty()) throw ContractError("probability vector must be non-empty");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw ContractError("probability vector has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("probability vector does not sum to 1");
}

void require_domain_prob(double d) {
  if (!(d >= 0.0 && d <= 1.0)) throw ContractError("d(x) must lie in [0, 1]");
}

double normalized_entropy(std::span<const double> y_bar) {
  if (y_bar.size() < 2) throw ContractError("entropy normalization needs at least two classes");
  // H <= ln n holds exactly; clamp the rounding excess for near-uniform vectors.
  return std::clamp(entropy(y_bar) / std::log(static_cast<double>(y_bar.size())), 0.0, 1.0);
}

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::ours: return "ours";
    case Scheme::uan: return "uan";
    case Scheme::entropy: return "entropy";
    case Scheme::ours_no_d: return "ours_no_d";
    case Scheme::ours_no_maxy: return "ours_no_maxy";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view s) {
  for (auto scheme : all_schemes()) {
    if (to_string(scheme) == s) return scheme;
  }
  return std::nullopt;
}

const std::vector<Scheme>& all_schemes() {
  static const std::vector<Scheme> schemes{Scheme::ours, Scheme::uan, Scheme::entropy,
                                           Scheme::ours_no_d, Scheme::ours_no_maxy};
  return schemes;
}

ScoreRange score_range(Scheme s) {
  switch (s) {
    case Scheme::ours: return {0.0, 2.0};
    case Scheme::uan: return {-1.0, 1.0};
    case Scheme::entropy:
    case Scheme::ours_no_d:
    case Scheme::ours_no_maxy: return {0.0, 1.0};
  }
  return {0.0, 1.0};
}

double entropy(std::span<const double> p) {
  require_probability(p);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

double max_prob(std::span<const double> p) {
  if (p.empty()) throw ContractError("max_prob of empty vector");
  return *std::max_element(p.begin(), p.end());
}

std::size_t argmax(std::span<const double> p) {
  if (p.empty()) throw ContractError("argmax of empty vector");
  // max_element returns the first maximum.
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double score_ours(double d, std::span<const double> y_bar) {
  require_domain_prob(d);
  return d + max_prob(y_bar);
}

double score_uan(double d, std::span<const double> y_bar) {
  require_domain_prob(d);
  return d - normalized_entropy(y_bar);
}

double score_uan_source(double d, std::span<const double> y_bar) { return -score_uan(d, y_bar); }

double score_entropy(std::span<const double> y_bar) {
  return 1.0 - normalized_entropy(y_bar);
}

double score(Scheme scheme, double d, std::span<const double> y_bar) {
  switch (scheme) {
    case Scheme::ours: return score_ours(d, y_bar);
    case Scheme::uan: return score_uan(d, y_bar);
    case Scheme::entropy: return score_entropy(y_bar);
    case Scheme::ours_no_d: return max_prob(y_bar);
    case Scheme::ours_no_maxy: require_domain_prob(d); return d;
  }
  return 0.0;
}

ScoreRecord make_record(Scheme scheme, double d, std::span<const double> y_bar) {
  ScoreRecord r;
  r.d = d;
  r.y_bar.assign(y_bar.begin(), y_bar.end());
  r.max_prob = max_prob(y_bar);
  r.entropy = entropy(y_bar);
  r.argmax = argmax(y_bar);
  r.w = score(scheme, d, y_bar);
  return r;
}

std::vector<ScoreRecord> score_outputs(const Tensor& probs, const Tensor& domain, Scheme scheme) {
  if (probs.rows() != domain.size()) {
    throw DimensionError("score_outputs: one domain probability per row required");
  }
  std::vector<ScoreRecord> out(probs.rows());
  const auto n = static_cast<std::ptrdiff_t>(probs.rows());
  std::exception_ptr failure;
  // Rows are independent; each writes only its own slot.
#pragma omp parallel for schedule(static) if (n >= 1024)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = make_record(scheme, domain[i], probs.row_span(i));
    } catch (...) {
#pragma omp critical(unida_score_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<ScoreRecord> score_batch(const ModelBundle& m, const Tensor& x, Scheme scheme) {
  // A fresh input leaf; parameter grads are never touched because backward is not called.
  const auto g = forward_graph(m, x, 1.0);
  return score_outputs(g.probs->value, g.domain->value, scheme);
}

void write_score_dump(std::ostream& out, std::span<const ScoreDumpRow> rows) {
  out << "sample_id,domain,true_label,d,max_prob,entropy,w\n";
  for (const auto& row : rows) {
    out << row.sample_id << ',' << row.domain << ',';
    if (row.true_label) out << *row.true_label;
    out << ',' << fmt_double(row.record->d) << ',' << fmt_double(row.record->max_prob) << ','
        << fmt_double(row.record->entropy) << ',' << fmt_double(row.record->w) << '\n';
  }
}

}  // namespace unida
