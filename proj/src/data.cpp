#include "unida/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "unida/errors.hpp"
#include "unida/format.hpp"

namespace unida {

LabelSetSpec LabelSetSpec::dense(std::size_t n_shared, std::size_t n_source_private,
                                 std::size_t n_target_private) {
  LabelSetSpec spec;
  ClassId next = 0;
  for (std::size_t i = 0; i < n_shared; ++i) spec.shared.push_back(next++);
  for (std::size_t i = 0; i < n_source_private; ++i) spec.source_private.push_back(next++);
  for (std::size_t i = 0; i < n_target_private; ++i) spec.target_private.push_back(next++);
  return spec;
}

void LabelSetSpec::validate() const {
  std::set<ClassId> seen;
  for (const auto* set : {&shared, &source_private, &target_private}) {
    for (ClassId c : *set) {
      if (c < 0) throw ConfigError("class ids must be non-negative");
      if (!seen.insert(c).second) {
        throw ConfigError("class id " + std::to_string(c) + " appears in more than one label set");
      }
    }
  }
  if (shared.empty() && source_private.empty()) throw ConfigError("source label set is empty");
}

std::vector<ClassId> LabelSetSpec::source_classes() const {
  std::vector<ClassId> out = shared;
  out.insert(out.end(), source_private.begin(), source_private.end());
  return out;
}

std::vector<ClassId> LabelSetSpec::target_classes() const {
  std::vector<ClassId> out = shared;
  out.insert(out.end(), target_private.begin(), target_private.end());
  return out;
}

std::vector<ClassId> LabelSetSpec::all_classes() const {
  std::vector<ClassId> out = source_classes();
  out.insert(out.end(), target_private.begin(), target_private.end());
  std::sort(out.begin(), out.end());
  return out;
}

double LabelSetSpec::jaccard() const {
  const auto total = shared.size() + source_private.size() + target_private.size();
  if (total == 0) return 0.0;
  return static_cast<double>(shared.size()) / static_cast<double>(total);
}

bool LabelSetSpec::is_shared(ClassId c) const {
  return std::find(shared.begin(), shared.end(), c) != shared.end();
}

ClassId LabelSetSpec::target_truth(ClassId y) const { return is_shared(y) ? y : kTau; }

std::optional<std::size_t> LabelSetSpec::source_index(ClassId c) const {
  const auto src = source_classes();
  auto it = std::find(src.begin(), src.end(), c);
  if (it == src.end()) return std::nullopt;
  return static_cast<std::size_t>(it - src.begin());
}

namespace {

std::vector<double> gaussian_vector(std::size_t dim, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
}

struct AffineShift {
  std::vector<double> u, v, translation;
  double cos_t = 1.0, sin_t = 0.0, scale = 1.0;

  void apply(std::span<double> x) const {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      a += u[i] * x[i];
      b += v[i] * x[i];
    }
    const double a2 = a * cos_t - b * sin_t;
    const double b2 = a * sin_t + b * cos_t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = scale * (x[i] + (a2 - a) * u[i] + (b2 - b) * v[i]) + translation[i];
    }
  }
};

AffineShift make_shift(const ShiftConfig& cfg, std::size_t dim, std::mt19937_64& rng) {
  AffineShift s;
  s.u = gaussian_vector(dim, 1.0, rng);
  normalize(s.u);
  s.v = gaussian_vector(dim, 1.0, rng);
  const double proj = dot(s.u, s.v);
  for (std::size_t i = 0; i < dim; ++i) s.v[i] -= proj * s.u[i];
  normalize(s.v);
  const double theta = cfg.rotation_deg * std::numbers::pi / 180.0;
  s.cos_t = std::cos(theta);
  s.sin_t = std::sin(theta);
  s.scale = cfg.scale;
  s.translation = gaussian_vector(dim, 1.0, rng);
  normalize(s.translation);
  for (auto& x : s.translation) x *= cfg.translation;
  return s;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> gen_synthetic(const LabelSetSpec& spec,
                                                      const SyntheticOptions& opts,
                                                      std::uint64_t seed) {
  spec.validate();
  if (opts.dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (opts.per_class < 1) throw ConfigError("synthetic data needs per_class >= 1");
  if (!(opts.noise >= 0.0) || !(opts.shift.noise_inflation >= 0.0) || !(opts.shift.scale > 0.0)) {
    throw ConfigError("synthetic noise must be >= 0 and scale > 0");
  }

  std::mt19937_64 rng(seed);
  const auto classes = spec.all_classes();
  std::vector<std::vector<double>> centers;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    centers.push_back(gaussian_vector(opts.dim, opts.center_spread, rng));
  }
  auto center_of = [&](ClassId c) -> const std::vector<double>& {
    return centers[std::find(classes.begin(), classes.end(), c) - classes.begin()];
  };
  const AffineShift shift = make_shift(opts.shift, opts.dim, rng);

  auto draw = [&](const std::vector<ClassId>& ids, double sd, bool shifted) {
    DomainDataset ds;
    ds.domain = shifted ? Domain::target : Domain::source;
    ds.features = Tensor({ids.size() * opts.per_class, opts.dim});
    std::size_t row = 0;
    for (ClassId c : ids) {
      const auto& center = center_of(c);
      for (std::size_t k = 0; k < opts.per_class; ++k, ++row) {
        auto x = ds.features.row_span(row);
        auto noise = gaussian_vector(opts.dim, sd, rng);
        for (std::size_t i = 0; i < opts.dim; ++i) x[i] = center[i] + noise[i];
        if (shifted) shift.apply(x);
        ds.labels.push_back(c);
      }
    }
    return ds;
  };

  auto source = draw(spec.source_classes(), opts.noise, false);
  auto target = draw(spec.target_classes(), opts.noise * opts.shift.noise_inflation, true);
  return {std::move(source), std::move(target)};
}

void write_features(const DomainDataset& ds, std::ostream& out) {
  out << "# unida-features dim=" << ds.dim() << " count=" << ds.size()
      << " labeled=" << (ds.labeled() ? 1 : 0) << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    auto row = ds.features.row_span(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << fmt_double(row[j]);
    }
    if (ds.labeled()) out << ',' << ds.labels[r];
    out << '\n';
  }
}

void save_features(const DomainDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_features(ds, out);
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg);
}

std::size_t header_field(const std::string& header, const std::string& key, std::size_t line) {
  const auto pos = header.find(" " + key + "=");
  if (pos == std::string::npos) fail(line, "header is missing " + key);
  std::istringstream ss(header.substr(pos + key.size() + 2));
  std::string tok;
  ss >> tok;
  long long v = 0;
  if (!parse_int(tok, v) || v < 0) fail(line, "bad header value for " + key);
  return static_cast<std::size_t>(v);
}

}  // namespace

DomainDataset read_features(std::istream& in, Domain domain, bool labeled,
                            std::span<const ClassId> known_classes) {
  std::string header;
  if (!std::getline(in, header)) fail(1, "empty file");
  if (header.rfind("# unida-features", 0) != 0) fail(1, "missing '# unida-features' header");
  const std::size_t dim = header_field(header, "dim", 1);
  const std::size_t count = header_field(header, "count", 1);
  const bool file_labeled = header_field(header, "labeled", 1) != 0;
  if (dim == 0) fail(1, "dim must be positive");
  if (count == 0) fail(1, "file holds no samples");
  if (labeled && !file_labeled) fail(1, "labels requested but file is unlabeled");

  const std::size_t expected_fields = dim + (file_labeled ? 1 : 0);
  DomainDataset ds;
  ds.domain = domain;
  std::vector<double> data;
  data.reserve(count * dim);

  std::string text;
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      fields.push_back(text.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != expected_fields) {
      fail(line_no, "expected " + std::to_string(expected_fields) + " fields, got " +
                        std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j], v) || !std::isfinite(v)) {
        fail(line_no, "non-numeric feature '" + fields[j] + "'");
      }
      data.push_back(v);
    }
    if (file_labeled && labeled) {
      long long label = 0;
      if (!parse_int(fields[dim], label) || label < 0) {
        fail(line_no, "bad class id '" + fields[dim] + "'");
      }
      const auto c = static_cast<ClassId>(label);
      if (!known_classes.empty() &&
          std::find(known_classes.begin(), known_classes.end(), c) == known_classes.end()) {
        fail(line_no, "unknown class id " + std::to_string(c));
      }
      ds.labels.push_back(c);
    }
    ++rows;
  }
  if (rows != count) {
    fail(line_no, "header declares " + std::to_string(count) + " rows, found " +
                      std::to_string(rows));
  }
  ds.features = Tensor({rows, dim}, std::move(data));
  return ds;
}

DomainDataset load_features(const std::filesystem::path& path, Domain domain, bool labeled,
                            std::span<const ClassId> known_classes) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open feature file " + path.string());
  try {
    return read_features(in, domain, labeled, known_classes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

SourceSamples source_samples(const DomainDataset& source, const LabelSetSpec& spec) {
  if (!source.labeled()) throw ContractError("source dataset must be labeled");
  SourceSamples out;
  out.features = source.features;
  for (ClassId c : source.labels) {
    auto idx = spec.source_index(c);
    if (!idx) throw ConfigError("source label " + std::to_string(c) + " is not in Y_s");
    out.class_index.push_back(*idx);
  }
  return out;
}

DomainBatch sample_batch(const SourceSamples& source, const Tensor& target_features,
                         std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw ContractError("batch_size must be even and >= 2");
  }
  if (source.class_index.empty() || target_features.size() == 0) {
    throw ContractError("sample_batch: empty dataset");
  }
  const std::size_t half = batch_size / 2;
  const std::size_t dim = source.features.cols();
  std::uniform_int_distribution<std::size_t> pick_src(0, source.class_index.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_tgt(0, target_features.rows() - 1);

  DomainBatch b;
  b.source_x = Tensor({half, dim});
  b.target_x = Tensor({half, target_features.cols()});
  for (std::size_t i = 0; i < half; ++i) {
    const auto s = pick_src(rng);
    std::copy_n(source.features.row_span(s).begin(), dim, b.source_x.row_span(i).begin());
    b.source_y.push_back(source.class_index[s]);
  }
  for (std::size_t i = 0; i < half; ++i) {
    const auto t = pick_tgt(rng);
    auto src = target_features.row_span(t);
    std::copy(src.begin(), src.end(), b.target_x.row_span(i).begin());
  }
  return b;
}

}  // namespace unida
