#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "unida/autodiff.hpp"
#include "unida/tensor.hpp"

namespace unida {

enum class Activation { none, softmax, sigmoid };

// Fully connected network descriptor. Hidden layers are followed by ReLU;
// the output layer by `final_activation`.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  Activation final_activation = Activation::none;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Linear {
  ad::Var weight;  // in x out
  ad::Var bias;    // {out}
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::mt19937_64& rng);
  Mlp(MlpSpec spec, std::vector<Linear> layers);

  ad::Var forward(const ad::Var& x) const;

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<ad::Var> parameters() const;

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

struct NamedParameter {
  std::string name;
  ad::Var var;
};

// Feature extractor F, label classifier C and domain classifier D.
//
// C ends in softmax over the source classes, D in a sigmoid giving the
// probability that a sample is from the source domain.
class ModelBundle {
 public:
  static ModelBundle init(const MlpSpec& spec_f, const MlpSpec& spec_c, const MlpSpec& spec_d,
                          std::uint64_t seed);
  static ModelBundle from_layers(Mlp feature, Mlp label, Mlp domain);

  const Mlp& feature() const { return feature_; }
  const Mlp& label() const { return label_; }
  const Mlp& domain() const { return domain_; }
  std::size_t feature_dim() const { return feature_.spec().output_dim; }
  std::size_t num_source_classes() const { return label_.spec().output_dim; }
  std::size_t input_dim() const { return feature_.spec().input_dim; }

  // Stable order: F layers, C layers, D layers; weight then bias.
  std::vector<NamedParameter> named_parameters() const;
  std::vector<ad::Var> parameters() const;

  // Deep copy: parameters are fresh leaves with equal values.
  ModelBundle clone() const;

 private:
  ModelBundle(Mlp f, Mlp c, Mlp d);
  static void validate(const MlpSpec& f, const MlpSpec& c, const MlpSpec& d);

  Mlp feature_;
  Mlp label_;
  Mlp domain_;
};

// Graph handles for one forward pass over a batch.
struct ForwardGraph {
  ad::Var input;
  ad::Var features;
  ad::Var probs;   // C(F(x)), rows sum to one
  ad::Var domain;  // D(GRL(F(x))), column of probabilities
};

ForwardGraph forward_graph(const ModelBundle& m, const Tensor& x, double grl_lambda);

Tensor forward_label(const ModelBundle& m, const Tensor& x);
Tensor forward_domain(const ModelBundle& m, const Tensor& x, double lambda);

// Linear ramp-up schedule for the reversal coefficient: 2/(1+exp(-10 t/T)) - 1.
double grl_ramp(std::size_t t, std::size_t total_steps);

// Checkpoint file: magic "UNIDACK1", u32 array count, then per array
// u32 name length, name bytes, u32 rank, u64 dims, raw little-endian doubles.
void save_checkpoint(const ModelBundle& m, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const ModelBundle& m, std::ostream& out);
ModelBundle read_checkpoint(std::istream& in);

}  // namespace unida
