#pragma once

// Training objective: supervised cross-entropy, thresholded pseudo-label
// consistency on strong views, and supervised contrastive loss on labeled
// embeddings. Every term returns its value together with the analytic
// gradient with respect to its differentiable input.

#include <cstddef>
#include <span>

#include "citadel/types.hpp"

namespace citadel {

inline constexpr double kProbClamp = 1e-12;

struct LossConfig {
  double confidence_threshold = 0.95;
  double lambda_u = 1.0;
  double lambda_con = 0.5;
  double contrastive_temperature = 0.07;
  // Raw dot products when false; the loss then scales with embedding norm.
  bool normalize_embeddings = true;

  // A threshold above 1 is accepted and disables the consistency term.
  void validate() const;
};

struct LossBreakdown {
  double sup = 0.0;
  double unsup = 0.0;
  double con = 0.0;
  double total = 0.0;
  std::size_t confident_count = 0;
};

struct LossResult {
  double value = 0.0;
  Matrix grad;  // same shape as the differentiable input
};

struct ConsistencyResult {
  double value = 0.0;
  std::size_t confident_count = 0;
  Matrix grad;  // d loss / d strong logits
};

// Mean of -log p_y. `probs` is batch x 2; gradient is w.r.t. the logits that
// produced `probs`: (softmax - onehot(y)) / batch.
LossResult supervised_ce(const Matrix& probs, std::span<const int> labels);

// Sum over samples whose weak max-probability reaches `threshold` of
// CE(softmax(strong_logits), argmax(weak)), divided by the full batch size.
// The pseudo-label carries no gradient.
ConsistencyResult consistency_loss(const Matrix& weak_probs, const Matrix& strong_logits,
                                   double threshold);

// Supervised contrastive loss over a labeled batch (rows of `embeddings`).
// Anchors with no same-label partner contribute zero. Gradient is w.r.t. the
// raw (pre-normalisation) embeddings.
LossResult supervised_contrastive(const Matrix& embeddings, std::span<const int> labels,
                                  double temperature, bool normalize = true);

// total = sup + lambda_u * unsup + lambda_con * con
LossBreakdown total_loss(double sup, double unsup, double con, const LossConfig& cfg,
                         std::size_t confident_count = 0);

}  // namespace citadel
