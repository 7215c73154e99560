#pragma once

// Dense feed-forward binary classifier with hand-written backpropagation.
//
// Layout convention: activation 0 is the input, activation l+1 is the output
// of layer l. The final layer always produces two logits; the activation
// feeding it is the embedding used for contrastive training and for
// nearest-labeled-neighbour distances during sample selection.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "citadel/types.hpp"

namespace citadel {

enum class Activation { kReLU, kIdentity };

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kReLU;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  Matrix weight;  // output_dim x input_dim
  Vector bias;    // output_dim
};

// Gradients and optimizer moments share the parameter layout.
using ParameterSet = std::vector<DenseLayer>;
using Gradients = ParameterSet;

ParameterSet zeros_like(std::span<const DenseLayer> layers);
void add_into(ParameterSet& acc, const ParameterSet& g);

// input -> hidden[0] (ReLU) -> ... -> hidden.back() (ReLU) -> 2 (Identity).
std::vector<LayerSpec> mlp_architecture(std::size_t input_dim,
                                        std::span<const std::size_t> hidden);

// Throws ConfigError if dims are zero, do not chain, or the last layer is not
// a 2-way Identity layer.
void validate_architecture(std::span<const LayerSpec> arch);

class Classifier {
 public:
  Classifier() = default;
  Classifier(std::vector<LayerSpec> architecture, ParameterSet layers);

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static Classifier initialize(std::vector<LayerSpec> architecture, std::uint64_t seed);

  const std::vector<LayerSpec>& architecture() const { return architecture_; }
  const ParameterSet& layers() const { return layers_; }
  ParameterSet& mutable_layers() { return layers_; }

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return architecture_.front().input_dim; }
  // Index into ForwardTrace::activations of the embedding.
  std::size_t embedding_index() const { return layers_.size() - 1; }
  std::size_t embedding_dim() const { return architecture_.back().input_dim; }
  std::size_t parameter_count() const;

  // Shapes chain and every parameter is finite.
  void validate() const;

 private:
  std::vector<LayerSpec> architecture_;
  ParameterSet layers_;
};

struct ForwardTrace {
  std::vector<Vector> pre_activations;  // one per layer
  std::vector<Vector> activations;      // num_layers + 1, [0] is the input
  Vector logits;
  Probabilities probabilities{};

  const Vector& embedding(const Classifier& model) const {
    return activations[model.embedding_index()];
  }
};

ForwardTrace forward(const Classifier& model, std::span<const double> x);
ForwardTrace forward(const Classifier& model, const FeatureVector& x);

// Gradients of a scalar loss given dL/dlogits, plus an optional gradient
// injected directly at the embedding activation.
Gradients backward(const Classifier& model, const ForwardTrace& trace,
                   const Probabilities& logit_grad, const Vector* embedding_grad = nullptr);

// Element-wise forward; output order matches input order.
std::vector<Probabilities> predict_batch(const Classifier& model,
                                         std::span<const FeatureVector> xs);
RowMatrix embed_batch(const Classifier& model, std::span<const FeatureVector> xs);

// Both of the above from a single pass per row.
struct PoolView {
  std::vector<Probabilities> probabilities;
  RowMatrix embeddings;
};
PoolView predict_and_embed(const Classifier& model, std::span<const FeatureVector> xs);

// Batched passes used by the trainer. Rows are samples.
struct BatchTrace {
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  Matrix logits;         // batch x 2
  Matrix probabilities;  // batch x 2

  const Matrix& embeddings(const Classifier& model) const {
    return activations[model.embedding_index()];
  }
};

Matrix to_matrix(std::span<const FeatureVector> xs);

BatchTrace forward_batch(const Classifier& model, const Matrix& inputs);

// Adds this batch's parameter gradients into `grads`. `embedding_grad` may be
// null. Gradients are summed over rows; per-sample averaging belongs in the
// upstream gradients.
void backward_batch(const Classifier& model, const BatchTrace& trace, const Matrix& logit_grad,
                    const Matrix* embedding_grad, Gradients& grads);

// Numerically stable two-way softmax.
Probabilities softmax2(double l0, double l1);

enum class OptimizerKind { kSGD, kAdam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct OptimizerState {
  OptimizerSettings settings;
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step_count = 0;

  static OptimizerState for_model(const Classifier& model, OptimizerSettings settings);
};

// One update. SGD: theta -= lr * g. Adam: bias-corrected moments.
// A non-finite gradient throws NumericError naming the parameter and leaves
// model and state untouched. `lr_scale` multiplies the configured rate.
void step(Classifier& model, const Gradients& grads, OptimizerState& state,
          double lr_scale = 1.0);

// Multiply-accumulate accounting for benchmarks. Every dense forward on a
// batch of b rows adds b * (2 * in * out + out); backward adds
// b * (2 * in * out + out) for the weight and bias gradients plus
// b * 2 * in * out for the input gradient of every layer except the first.
namespace ops {
std::uint64_t count();
void add(std::uint64_t n);
void reset();

std::uint64_t dense_forward(std::size_t batch, std::size_t in, std::size_t out);
}  // namespace ops

}  // namespace citadel
