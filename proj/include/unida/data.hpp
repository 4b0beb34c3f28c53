#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "unida/tensor.hpp"

namespace unida {

using ClassId = int;
// The "unknown" output class. Never a valid class id.
inline constexpr ClassId kTau = -1;

// Partition of class ids into shared, source-private and target-private sets.
struct LabelSetSpec {
  std::vector<ClassId> shared;
  std::vector<ClassId> source_private;
  std::vector<ClassId> target_private;

  // Dense ids: shared 0..a-1, source-private a..a+b-1, target-private after.
  static LabelSetSpec dense(std::size_t n_shared, std::size_t n_source_private,
                            std::size_t n_target_private);

  // Throws ConfigError on overlap, negative ids or an empty source label set.
  void validate() const;

  // Y_s = shared then source_private; position is the classifier output index.
  std::vector<ClassId> source_classes() const;
  std::vector<ClassId> target_classes() const;
  std::vector<ClassId> all_classes() const;  // sorted union

  double jaccard() const;
  bool is_shared(ClassId c) const;
  // y if y is shared, tau otherwise.
  ClassId target_truth(ClassId y) const;
  std::optional<std::size_t> source_index(ClassId c) const;

  friend bool operator==(const LabelSetSpec&, const LabelSetSpec&) = default;
};

enum class Domain { source, target };

struct DomainDataset {
  Domain domain = Domain::source;
  Tensor features;             // n x dim
  std::vector<ClassId> labels;  // empty when unlabeled; hidden truth for targets

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return !labels.empty(); }
};

// Domain gap applied to every target sample: x -> scale * R (x + noise) + t,
// with R a rotation in a random 2D subspace.
struct ShiftConfig {
  double rotation_deg = 0.0;
  double translation = 0.0;  // norm of a random translation vector
  double scale = 1.0;
  double noise_inflation = 1.0;  // target noise std relative to source

  static ShiftConfig identity() { return {}; }
};

struct SyntheticOptions {
  std::size_t dim = 16;
  std::size_t per_class = 100;
  double center_spread = 1.0;  // std of class centers
  double noise = 0.35;         // source within-class std
  ShiftConfig shift;
};

// Isotropic Gaussian blob per class. Shared target classes reuse the source
// centers; private classes get their own.
std::pair<DomainDataset, DomainDataset> gen_synthetic(const LabelSetSpec& spec,
                                                      const SyntheticOptions& opts,
                                                      std::uint64_t seed);

// Feature file: header "# unida-features dim=<d> count=<n> labeled=<0|1>",
// then one comma-separated row per sample, with a trailing integer class id
// when labeled. `known_classes` (if non-empty) restricts accepted labels.
void save_features(const DomainDataset& ds, const std::filesystem::path& path);
void write_features(const DomainDataset& ds, std::ostream& out);
DomainDataset load_features(const std::filesystem::path& path, Domain domain, bool labeled,
                            std::span<const ClassId> known_classes = {});
DomainDataset read_features(std::istream& in, Domain domain, bool labeled,
                            std::span<const ClassId> known_classes = {});

// Paired mini-batch. Source labels are classifier output indices.
struct DomainBatch {
  Tensor source_x;
  std::vector<std::size_t> source_y;
  Tensor target_x;
};

// Labeled source samples as seen by the trainer.
struct SourceSamples {
  Tensor features;
  std::vector<std::size_t> class_index;  // into LabelSetSpec::source_classes()
};

SourceSamples source_samples(const DomainDataset& source, const LabelSetSpec& spec);

// batch_size / 2 samples from each domain, uniformly with replacement.
DomainBatch sample_batch(const SourceSamples& source, const Tensor& target_features,
                         std::size_t batch_size, std::mt19937_64& rng);

}  // namespace unida
