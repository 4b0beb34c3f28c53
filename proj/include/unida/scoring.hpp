#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unida/tensor.hpp"

namespace unida {

class ModelBundle;

// Sample transfer score variants.
//   ours          d + max(y)
//   uan           d - H(y)/ln|Y_s|
//   entropy       1 - H(y)/ln|Y_s|
//   ours_no_d     max(y)
//   ours_no_maxy  d
enum class Scheme { ours, uan, entropy, ours_no_d, ours_no_maxy };

std::string_view to_string(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view s);
const std::vector<Scheme>& all_schemes();

struct ScoreRange {
  double lo;
  double hi;
};
ScoreRange score_range(Scheme s);

// -sum p ln p with 0 ln 0 = 0. Requires a probability vector (tolerance 1e-9).
double entropy(std::span<const double> p);
double max_prob(std::span<const double> p);
// Lowest index among ties.
std::size_t argmax(std::span<const double> p);

double score_ours(double d, std::span<const double> y_bar);
double score_uan(double d, std::span<const double> y_bar);
// Source-side counterpart of score_uan: w_s = -w_t.
double score_uan_source(double d, std::span<const double> y_bar);
double score_entropy(std::span<const double> y_bar);
double score(Scheme scheme, double d, std::span<const double> y_bar);

struct ScoreRecord {
  double d = 0.0;
  std::vector<double> y_bar;
  double max_prob = 0.0;
  double entropy = 0.0;
  double w = 0.0;
  std::size_t argmax = 0;  // index into the source classes
};

ScoreRecord make_record(Scheme scheme, double d, std::span<const double> y_bar);

// Scores from already computed outputs: probs [n x |Y_s|], domain [n x 1].
std::vector<ScoreRecord> score_outputs(const Tensor& probs, const Tensor& domain, Scheme scheme);
// Forward pass without touching any gradient, then score every row of x.
std::vector<ScoreRecord> score_batch(const ModelBundle& m, const Tensor& x, Scheme scheme);

struct ScoreDumpRow {
  std::size_t sample_id;
  std::string domain;
  std::optional<int> true_label;
  const ScoreRecord* record;
};

// Header "sample_id,domain,true_label,d,max_prob,entropy,w"; unknown labels empty.
void write_score_dump(std::ostream& out, std::span<const ScoreDumpRow> rows);

}  // namespace unida
