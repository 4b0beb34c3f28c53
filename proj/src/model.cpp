#include "unida/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <string_view>

#include "unida/errors.hpp"

namespace unida {

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "UNIDACK1";

void check_spec(const MlpSpec& s, const char* name) {
  if (s.input_dim == 0 || s.output_dim == 0) {
    throw ConfigError(std::string(name) + ": dimensions must be >= 1");
  }
  for (auto h : s.hidden_dims) {
    if (h == 0) throw ConfigError(std::string(name) + ": hidden widths must be >= 1");
  }
}

}  // namespace

Mlp::Mlp(MlpSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  std::size_t in = spec_.input_dim;
  std::vector<std::size_t> outs = spec_.hidden_dims;
  outs.push_back(spec_.output_dim);
  for (std::size_t out : outs) {
    // He-style fan-in scaling, uniform: Var = 2 / fan_in.
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w({in, out});
    for (auto& v : w.data()) v = dist(rng);
    layers_.push_back({ad::leaf(std::move(w)), ad::leaf(Tensor({out}))});
    in = out;
  }
}

Mlp::Mlp(MlpSpec spec, std::vector<Linear> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {
  if (layers_.size() != spec_.hidden_dims.size() + 1) {
    throw ConfigError("Mlp: layer count does not match spec");
  }
}

ad::Var Mlp::forward(const ad::Var& x) const {
  ad::Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = ad::add_bias(ad::matmul(h, layers_[i].weight), layers_[i].bias);
    if (i + 1 < layers_.size()) h = ad::relu(h);
  }
  switch (spec_.final_activation) {
    case Activation::none: return h;
    case Activation::softmax: return ad::softmax(h);
    case Activation::sigmoid: return ad::sigmoid(h);
  }
  return h;
}

std::vector<ad::Var> Mlp::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

ModelBundle::ModelBundle(Mlp f, Mlp c, Mlp d)
    : feature_(std::move(f)), label_(std::move(c)), domain_(std::move(d)) {}

void ModelBundle::validate(const MlpSpec& f, const MlpSpec& c, const MlpSpec& d) {
  check_spec(f, "F");
  check_spec(c, "C");
  check_spec(d, "D");
  if (c.input_dim != f.output_dim || d.input_dim != f.output_dim) {
    throw ConfigError("C and D input width must equal the feature dimension");
  }
  if (d.output_dim != 1) throw ConfigError("D must have a single output");
  if (c.final_activation != Activation::softmax) throw ConfigError("C must end in softmax");
  if (d.final_activation != Activation::sigmoid) throw ConfigError("D must end in sigmoid");
}

ModelBundle ModelBundle::init(const MlpSpec& spec_f, const MlpSpec& spec_c, const MlpSpec& spec_d,
                              std::uint64_t seed) {
  validate(spec_f, spec_c, spec_d);
  std::mt19937_64 rng(seed);
  Mlp f(spec_f, rng);
  Mlp c(spec_c, rng);
  Mlp d(spec_d, rng);
  return ModelBundle(std::move(f), std::move(c), std::move(d));
}

ModelBundle ModelBundle::from_layers(Mlp feature, Mlp label, Mlp domain) {
  validate(feature.spec(), label.spec(), domain.spec());
  return ModelBundle(std::move(feature), std::move(label), std::move(domain));
}

std::vector<NamedParameter> ModelBundle::named_parameters() const {
  std::vector<NamedParameter> out;
  auto add = [&out](const char* prefix, const Mlp& net) {
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      const std::string base = std::string(prefix) + "." + std::to_string(i);
      out.push_back({base + ".weight", net.layers()[i].weight});
      out.push_back({base + ".bias", net.layers()[i].bias});
    }
  };
  add("F", feature_);
  add("C", label_);
  add("D", domain_);
  return out;
}

std::vector<ad::Var> ModelBundle::parameters() const {
  std::vector<ad::Var> out;
  for (auto& p : named_parameters()) out.push_back(p.var);
  return out;
}

ModelBundle ModelBundle::clone() const {
  auto copy = [](const Mlp& net) {
    std::vector<Linear> layers;
    for (const auto& l : net.layers()) {
      layers.push_back({ad::leaf(l.weight->value), ad::leaf(l.bias->value)});
    }
    return Mlp(net.spec(), std::move(layers));
  };
  return ModelBundle(copy(feature_), copy(label_), copy(domain_));
}

ForwardGraph forward_graph(const ModelBundle& m, const Tensor& x, double grl_lambda) {
  if (x.cols() != m.input_dim()) throw DimensionError("forward: input width mismatch");
  ForwardGraph g;
  g.input = ad::leaf(x);
  g.features = m.feature().forward(g.input);
  g.probs = m.label().forward(g.features);
  g.domain = m.domain().forward(ad::grad_reverse(g.features, grl_lambda));
  return g;
}

Tensor forward_label(const ModelBundle& m, const Tensor& x) {
  if (x.cols() != m.input_dim()) throw DimensionError("forward: input width mismatch");
  return m.label().forward(m.feature().forward(ad::leaf(x)))->value;
}

Tensor forward_domain(const ModelBundle& m, const Tensor& x, double lambda) {
  if (x.cols() != m.input_dim()) throw DimensionError("forward: input width mismatch");
  auto f = m.feature().forward(ad::leaf(x));
  return m.domain().forward(ad::grad_reverse(f, lambda))->value;
}

double grl_ramp(std::size_t t, std::size_t total_steps) {
  const double p = total_steps == 0 ? 1.0 : static_cast<double>(t) / static_cast<double>(total_steps);
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw ParseError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_checkpoint(const ModelBundle& m, std::ostream& out) {
  const auto params = m.named_parameters();
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.var->value.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    for (double v : p.var->value.data()) put<double>(out, v);
  }
}

ModelBundle read_checkpoint(std::istream& in) {
  std::string magic(kMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic) {
    throw ParseError("checkpoint: bad magic");
  }
  const auto count = get<std::uint32_t>(in);
  std::map<std::string, Tensor> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError("checkpoint: truncated name");
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 2) throw ParseError("checkpoint: bad rank for " + name);
    std::vector<std::size_t> shape;
    std::size_t volume = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(get<std::uint64_t>(in));
      volume *= shape.back();
    }
    std::vector<double> data(volume);
    for (auto& v : data) v = get<double>(in);
    arrays.emplace(name, Tensor(std::move(shape), std::move(data)));
  }

  auto rebuild = [&arrays](const std::string& prefix, Activation act) {
    std::vector<Linear> layers;
    for (std::size_t i = 0;; ++i) {
      const std::string base = prefix + "." + std::to_string(i);
      auto w = arrays.find(base + ".weight");
      auto b = arrays.find(base + ".bias");
      if (w == arrays.end() || b == arrays.end()) break;
      if (w->second.rank() != 2 || b->second.size() != w->second.cols()) {
        throw ParseError("checkpoint: inconsistent shapes in " + base);
      }
      layers.push_back({ad::leaf(w->second), ad::leaf(b->second)});
    }
    if (layers.empty()) throw ParseError("checkpoint: missing network " + prefix);
    MlpSpec spec;
    spec.input_dim = layers.front().weight->value.rows();
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
      if (layers[i].weight->value.cols() != layers[i + 1].weight->value.rows()) {
        throw ParseError("checkpoint: layer widths do not chain in " + prefix);
      }
      spec.hidden_dims.push_back(layers[i].weight->value.cols());
    }
    spec.output_dim = layers.back().weight->value.cols();
    spec.final_activation = act;
    return Mlp(std::move(spec), std::move(layers));
  };

  try {
    return ModelBundle::from_layers(rebuild("F", Activation::none), rebuild("C", Activation::softmax),
                                    rebuild("D", Activation::sigmoid));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelBundle& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(m, out);
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace unida
