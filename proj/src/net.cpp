#include "citadel/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "citadel/errors.hpp"
#include "citadel/random.hpp"

namespace citadel {
namespace {

thread_local std::uint64_t g_op_count = 0;

void check_input_dim(const Classifier& model, std::size_t got) {
  if (got != model.input_dim()) {
    std::ostringstream os;
    os << "input has " << got << " features, model expects " << model.input_dim();
    throw ShapeError(os.str());
  }
}

Vector to_vector(const FeatureVector& x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

}  // namespace

namespace ops {
std::uint64_t count() { return g_op_count; }
void add(std::uint64_t n) { g_op_count += n; }
void reset() { g_op_count = 0; }
std::uint64_t dense_forward(std::size_t batch, std::size_t in, std::size_t out) {
  return static_cast<std::uint64_t>(batch) * (2 * in * out + out);
}
}  // namespace ops

ParameterSet zeros_like(std::span<const DenseLayer> layers) {
  ParameterSet out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return out;
}

void add_into(ParameterSet& acc, const ParameterSet& g) {
  if (acc.size() != g.size()) throw StateError("gradient layer count mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i].weight += g[i].weight;
    acc[i].bias += g[i].bias;
  }
}

std::vector<LayerSpec> mlp_architecture(std::size_t input_dim,
                                        std::span<const std::size_t> hidden) {
  std::vector<LayerSpec> arch;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    arch.push_back({in, h, Activation::kReLU});
    in = h;
  }
  arch.push_back({in, 2, Activation::kIdentity});
  validate_architecture(arch);
  return arch;
}

void validate_architecture(std::span<const LayerSpec> arch) {
  if (arch.empty()) throw ConfigError("architecture has no layers");
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i].input_dim == 0 || arch[i].output_dim == 0) {
      throw ConfigError("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && arch[i].input_dim != arch[i - 1].output_dim) {
      throw ConfigError("layer " + std::to_string(i) + " input does not chain with layer " +
                        std::to_string(i - 1));
    }
  }
  if (arch.back().output_dim != 2 || arch.back().activation != Activation::kIdentity) {
    throw ConfigError("final layer must be a 2-way Identity (logit) layer");
  }
}

Classifier::Classifier(std::vector<LayerSpec> architecture, ParameterSet layers)
    : architecture_(std::move(architecture)), layers_(std::move(layers)) {
  validate();
}

Classifier Classifier::initialize(std::vector<LayerSpec> architecture, std::uint64_t seed) {
  validate_architecture(architecture);
  RandomSource rng(seed);
  ParameterSet layers;
  for (const auto& spec : architecture) {
    const auto rows = static_cast<Eigen::Index>(spec.output_dim);
    const auto cols = static_cast<Eigen::Index>(spec.input_dim);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
    DenseLayer layer{Matrix(rows, cols), Vector::Zero(rows)};
    // Row-major fill order keeps the draw sequence independent of Eigen storage.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
    layers.push_back(std::move(layer));
  }
  return Classifier(std::move(architecture), std::move(layers));
}

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Classifier::validate() const {
  validate_architecture(architecture_);
  if (layers_.size() != architecture_.size()) {
    throw StateError("parameter layer count does not match architecture");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = architecture_[i];
    const auto& l = layers_[i];
    if (static_cast<std::size_t>(l.weight.rows()) != spec.output_dim ||
        static_cast<std::size_t>(l.weight.cols()) != spec.input_dim ||
        static_cast<std::size_t>(l.bias.size()) != spec.output_dim) {
      throw StateError("layer " + std::to_string(i) + " parameter shape mismatch");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

Probabilities softmax2(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m);
  const double e1 = std::exp(l1 - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

ForwardTrace forward(const Classifier& model, std::span<const double> x) {
  check_input_dim(model, x.size());
  ForwardTrace t;
  const std::size_t n = model.num_layers();
  t.pre_activations.reserve(n);
  t.activations.reserve(n + 1);
  t.activations.emplace_back(
      Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())));
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = model.layers()[l];
    Vector z = layer.weight * t.activations.back() + layer.bias;
    ops::add(ops::dense_forward(1, model.architecture()[l].input_dim,
                                model.architecture()[l].output_dim));
    Vector a = model.architecture()[l].activation == Activation::kReLU ? Vector(z.cwiseMax(0.0))
                                                                        : z;
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(a));
  }
  t.logits = t.activations.back();
  t.probabilities = softmax2(t.logits[0], t.logits[1]);
  return t;
}

ForwardTrace forward(const Classifier& model, const FeatureVector& x) {
  check_input_dim(model, x.size());
  const Vector v = to_vector(x);
  return forward(model, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Gradients backward(const Classifier& model, const ForwardTrace& trace,
                   const Probabilities& logit_grad, const Vector* embedding_grad) {
  const std::size_t n = model.num_layers();
  if (trace.activations.size() != n + 1 || trace.pre_activations.size() != n) {
    throw StateError("forward trace was produced by a model with a different depth");
  }
  for (std::size_t l = 0; l < n; ++l) {
    if (static_cast<std::size_t>(trace.activations[l].size()) !=
            model.architecture()[l].input_dim ||
        static_cast<std::size_t>(trace.pre_activations[l].size()) !=
            model.architecture()[l].output_dim) {
      throw StateError("forward trace shape does not match model at layer " + std::to_string(l));
    }
  }
  if (embedding_grad &&
      static_cast<std::size_t>(embedding_grad->size()) != model.embedding_dim()) {
    throw ShapeError("embedding gradient has wrong dimension");
  }

  Gradients grads = zeros_like(model.layers());
  Vector delta(2);
  delta << logit_grad[0], logit_grad[1];
  for (std::size_t li = n; li-- > 0;) {
    const auto& layer = model.layers()[li];
    if (model.architecture()[li].activation == Activation::kReLU) {
      delta = (trace.pre_activations[li].array() > 0.0).select(delta, 0.0);
    }
    grads[li].weight.noalias() = delta * trace.activations[li].transpose();
    grads[li].bias = delta;
    if (li == 0) break;
    Vector upstream = layer.weight.transpose() * delta;
    if (embedding_grad && li == model.embedding_index()) upstream += *embedding_grad;
    delta = std::move(upstream);
  }
  return grads;
}

std::vector<Probabilities> predict_batch(const Classifier& model,
                                         std::span<const FeatureVector> xs) {
  std::vector<Probabilities> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(model, x).probabilities);
  return out;
}

RowMatrix embed_batch(const Classifier& model, std::span<const FeatureVector> xs) {
  RowMatrix out(static_cast<Eigen::Index>(xs.size()),
                static_cast<Eigen::Index>(model.embedding_dim()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = forward(model, xs[i]).embedding(model).transpose();
  }
  return out;
}

PoolView predict_and_embed(const Classifier& model, std::span<const FeatureVector> xs) {
  PoolView view;
  view.probabilities.reserve(xs.size());
  view.embeddings.resize(static_cast<Eigen::Index>(xs.size()),
                         static_cast<Eigen::Index>(model.embedding_dim()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ForwardTrace t = forward(model, xs[i]);
    view.probabilities.push_back(t.probabilities);
    view.embeddings.row(static_cast<Eigen::Index>(i)) = t.embedding(model).transpose();
  }
  return view;
}

Matrix to_matrix(std::span<const FeatureVector> xs) {
  if (xs.empty()) return Matrix(0, 0);
  const auto d = static_cast<Eigen::Index>(xs.front().size());
  Matrix m(static_cast<Eigen::Index>(xs.size()), d);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    if (static_cast<Eigen::Index>(xs[r].size()) != d) {
      throw ShapeError("ragged feature batch at row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      m(static_cast<Eigen::Index>(r), c) = xs[r][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

BatchTrace forward_batch(const Classifier& model, const Matrix& inputs) {
  check_input_dim(model, static_cast<std::size_t>(inputs.cols()));
  const std::size_t n = model.num_layers();
  const auto b = static_cast<std::size_t>(inputs.rows());
  BatchTrace t;
  t.pre_activations.reserve(n);
  t.activations.reserve(n + 1);
  t.activations.push_back(inputs);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = model.layers()[l];
    Matrix z = t.activations.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    ops::add(ops::dense_forward(b, model.architecture()[l].input_dim,
                                model.architecture()[l].output_dim));
    Matrix a = model.architecture()[l].activation == Activation::kReLU ? Matrix(z.cwiseMax(0.0))
                                                                        : z;
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(a));
  }
  t.logits = t.activations.back();
  t.probabilities.resize(t.logits.rows(), 2);
  for (Eigen::Index r = 0; r < t.logits.rows(); ++r) {
    const Probabilities p = softmax2(t.logits(r, 0), t.logits(r, 1));
    t.probabilities(r, 0) = p[0];
    t.probabilities(r, 1) = p[1];
  }
  return t;
}

void backward_batch(const Classifier& model, const BatchTrace& trace, const Matrix& logit_grad,
                    const Matrix* embedding_grad, Gradients& grads) {
  const std::size_t n = model.num_layers();
  if (trace.activations.size() != n + 1 || grads.size() != n) {
    throw StateError("batch trace or gradient buffer does not match model depth");
  }
  const Eigen::Index b = trace.logits.rows();
  if (logit_grad.rows() != b || logit_grad.cols() != 2) {
    throw ShapeError("logit gradient must be batch x 2");
  }
  if (embedding_grad && (embedding_grad->rows() != b ||
                         static_cast<std::size_t>(embedding_grad->cols()) != model.embedding_dim())) {
    throw ShapeError("embedding gradient must be batch x embedding_dim");
  }
  Matrix delta = logit_grad;
  for (std::size_t li = n; li-- > 0;) {
    const auto& layer = model.layers()[li];
    const auto in = model.architecture()[li].input_dim;
    const auto out = model.architecture()[li].output_dim;
    if (model.architecture()[li].activation == Activation::kReLU) {
      delta = (trace.pre_activations[li].array() > 0.0).select(delta, 0.0);
    }
    grads[li].weight.noalias() += delta.transpose() * trace.activations[li];
    grads[li].bias += delta.colwise().sum().transpose();
    ops::add(ops::dense_forward(static_cast<std::size_t>(b), in, out));
    if (li == 0) break;
    Matrix upstream = delta * layer.weight;
    ops::add(static_cast<std::uint64_t>(b) * 2 * in * out);
    if (embedding_grad && li == model.embedding_index()) upstream += *embedding_grad;
    delta = std::move(upstream);
  }
}

void OptimizerSettings::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer.learning_rate must be > 0");
  }
  if (kind == OptimizerKind::kAdam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be > 0");
  }
}

OptimizerState OptimizerState::for_model(const Classifier& model, OptimizerSettings settings) {
  settings.validate();
  OptimizerState s;
  s.settings = settings;
  if (settings.kind == OptimizerKind::kAdam) {
    s.first_moment = zeros_like(model.layers());
    s.second_moment = zeros_like(model.layers());
  }
  return s;
}

void step(Classifier& model, const Gradients& grads, OptimizerState& state, double lr_scale) {
  auto& layers = model.mutable_layers();
  if (grads.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads[l].weight.rows() != layers[l].weight.rows() ||
        grads[l].weight.cols() != layers[l].weight.cols() ||
        grads[l].bias.size() != layers[l].bias.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
    }
    for (Eigen::Index c = 0; c < grads[l].weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < grads[l].weight.rows(); ++r) {
        if (!std::isfinite(grads[l].weight(r, c))) {
          throw NumericError("non-finite gradient at layer " + std::to_string(l) + " weight(" +
                             std::to_string(r) + "," + std::to_string(c) + ")");
        }
      }
    }
    for (Eigen::Index r = 0; r < grads[l].bias.size(); ++r) {
      if (!std::isfinite(grads[l].bias[r])) {
        throw NumericError("non-finite gradient at layer " + std::to_string(l) + " bias(" +
                           std::to_string(r) + ")");
      }
    }
  }

  const auto& s = state.settings;
  const double lr = s.learning_rate * lr_scale;
  ++state.step_count;
  if (s.kind == OptimizerKind::kSGD) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weight -= lr * grads[l].weight;
      layers[l].bias -= lr * grads[l].bias;
    }
    return;
  }

  if (state.first_moment.size() != layers.size()) {
    throw StateError("Adam state does not match model");
  }
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, state.first_moment[l].weight, state.second_moment[l].weight,
           grads[l].weight);
    update(layers[l].bias, state.first_moment[l].bias, state.second_moment[l].bias,
           grads[l].bias);
  }
}

}  // namespace citadel
