#include "citadel/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "citadel/errors.hpp"

namespace citadel {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (labeled_batch < 1) throw ConfigError("train.labeled_batch must be >= 1");
  if (unlabeled_batch < 1) throw ConfigError("train.unlabeled_batch must be >= 1");
  loss.validate();
  augment.validate();
  optimizer.validate();
}

MinibatchSampler::MinibatchSampler(std::size_t n_labeled, std::size_t n_unlabeled,
                                   const TrainConfig& cfg, RandomSource rng)
    : n_labeled_(n_labeled),
      n_unlabeled_(n_unlabeled),
      labeled_batch_(cfg.labeled_batch),
      unlabeled_batch_(cfg.unlabeled_batch),
      basis_(n_unlabeled == 0 ? EpochBasis::kLabeled : cfg.epoch_basis),
      rng_(rng),
      labeled_order_(iota_indices(n_labeled)),
      unlabeled_order_(iota_indices(n_unlabeled)),
      labeled_cursor_(n_labeled),
      unlabeled_cursor_(n_unlabeled) {
  if (n_labeled == 0) throw PreconditionError("minibatch sampler needs a nonempty labeled set");
}

std::vector<std::size_t> MinibatchSampler::take_cyclic(std::vector<std::size_t>& order,
                                                       std::size_t& cursor, std::size_t count) {
  std::vector<std::size_t> out;
  count = std::min(count, order.size());
  out.reserve(count);
  while (out.size() < count) {
    if (cursor >= order.size()) {
      rng_.shuffle(order);
      cursor = 0;
    }
    out.push_back(order[cursor++]);
  }
  return out;
}

std::vector<BatchPair> MinibatchSampler::next_epoch() {
  std::vector<BatchPair> batches;
  if (basis_ == EpochBasis::kLabeled) {
    rng_.shuffle(labeled_order_);
    for (std::size_t start = 0; start < n_labeled_; start += labeled_batch_) {
      BatchPair bp;
      const std::size_t end = std::min(n_labeled_, start + labeled_batch_);
      bp.labeled.assign(labeled_order_.begin() + static_cast<std::ptrdiff_t>(start),
                        labeled_order_.begin() + static_cast<std::ptrdiff_t>(end));
      if (n_unlabeled_ > 0) bp.unlabeled = take_cyclic(unlabeled_order_, unlabeled_cursor_, unlabeled_batch_);
      batches.push_back(std::move(bp));
    }
    // Keep the cyclic cursor meaningful for the labeled set in the other basis.
    labeled_cursor_ = n_labeled_;
  } else {
    rng_.shuffle(unlabeled_order_);
    for (std::size_t start = 0; start < n_unlabeled_; start += unlabeled_batch_) {
      BatchPair bp;
      const std::size_t end = std::min(n_unlabeled_, start + unlabeled_batch_);
      bp.unlabeled.assign(unlabeled_order_.begin() + static_cast<std::ptrdiff_t>(start),
                          unlabeled_order_.begin() + static_cast<std::ptrdiff_t>(end));
      bp.labeled = take_cyclic(labeled_order_, labeled_cursor_, labeled_batch_);
      batches.push_back(std::move(bp));
    }
    unlabeled_cursor_ = n_unlabeled_;
  }
  return batches;
}

StepResult compute_step(const Classifier& model, const Matrix& labeled_x,
                        std::span<const int> labels, const Matrix& weak_x, const Matrix& strong_x,
                        const LossConfig& loss_cfg) {
  StepResult r;
  r.grads = zeros_like(model.layers());

  const BatchTrace lt = forward_batch(model, labeled_x);
  LossResult ce = supervised_ce(lt.probabilities, labels);
  double con_value = 0.0;
  Matrix emb_grad;
  const bool use_con = loss_cfg.lambda_con > 0.0 && labeled_x.rows() >= 2;
  if (use_con) {
    LossResult con = supervised_contrastive(lt.embeddings(model), labels,
                                            loss_cfg.contrastive_temperature,
                                            loss_cfg.normalize_embeddings);
    con_value = con.value;
    emb_grad = loss_cfg.lambda_con * con.grad;
  }
  backward_batch(model, lt, ce.grad, use_con ? &emb_grad : nullptr, r.grads);

  double unsup_value = 0.0;
  std::size_t confident = 0;
  r.unlabeled_count = static_cast<std::size_t>(weak_x.rows());
  if (weak_x.rows() > 0) {
    if (strong_x.rows() != weak_x.rows() || strong_x.cols() != weak_x.cols()) {
      throw ShapeError("weak and strong views differ in shape");
    }
    const BatchTrace wt = forward_batch(model, weak_x);
    // Every strong view goes through the network and the mask zeroes the
    // rows below the threshold, so the work per step does not depend on how
    // confident the model happens to be.
    const BatchTrace st = forward_batch(model, strong_x);
    const ConsistencyResult cons = consistency_loss(wt.probabilities, st.logits, loss_cfg.confidence_threshold);
    unsup_value = cons.value;
    confident = cons.confident_count;
    if (loss_cfg.lambda_u > 0.0) backward_batch(model, st, loss_cfg.lambda_u * cons.grad, nullptr, r.grads);
  }
  r.loss = total_loss(ce.value, unsup_value, con_value, loss_cfg, confident);
  return r;
}

TrainReport train(Classifier& model, const LabeledSet& labeled,
                  const std::vector<FeatureVector>& unlabeled, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  if (labeled.empty()) throw PreconditionError("train: labeled set is empty");
  if (labeled.labels.size() != labeled.features.size()) {
    throw ShapeError("train: labeled features and labels differ in length");
  }
  for (const auto& x : labeled.features) {
    if (x.size() != model.input_dim()) throw ShapeError("train: labeled sample dimension mismatch");
  }
  for (const auto& x : unlabeled) {
    if (x.size() != model.input_dim()) throw ShapeError("train: unlabeled sample dimension mismatch");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const RandomSource root(cfg.seed);
  MinibatchSampler sampler(labeled.size(), unlabeled.size(), cfg, root.fork(1));
  RandomSource aug_rng = root.fork(2);
  OptimizerState opt = OptimizerState::for_model(model, cfg.optimizer);

  TrainReport report;
  report.seed = cfg.seed;
  std::size_t total_steps = 0;
  const auto d = static_cast<Eigen::Index>(model.input_dim());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<BatchPair> batches = sampler.next_epoch();
    if (epoch == 0) total_steps = batches.size() * cfg.epochs;
    LossBreakdown acc;
    std::size_t seen_unlabeled = 0;
    for (std::size_t s = 0; s < batches.size(); ++s) {
      const BatchPair& bp = batches[s];
      Matrix lx(static_cast<Eigen::Index>(bp.labeled.size()), d);
      std::vector<int> ly(bp.labeled.size());
      for (std::size_t i = 0; i < bp.labeled.size(); ++i) {
        const auto& x = labeled.features[bp.labeled[i]];
        for (Eigen::Index c = 0; c < d; ++c) lx(static_cast<Eigen::Index>(i), c) = x[static_cast<std::size_t>(c)];
        ly[i] = labeled.labels[bp.labeled[i]];
      }
      Matrix wx(static_cast<Eigen::Index>(bp.unlabeled.size()), d);
      Matrix sx(static_cast<Eigen::Index>(bp.unlabeled.size()), d);
      for (std::size_t j = 0; j < bp.unlabeled.size(); ++j) {
        const auto& x = unlabeled[bp.unlabeled[j]];
        const FeatureVector w = weak_view(x, cfg.augment, aug_rng);
        const FeatureVector st = strong_view(x, cfg.augment, aug_rng);
        for (Eigen::Index c = 0; c < d; ++c) {
          wx(static_cast<Eigen::Index>(j), c) = w[static_cast<std::size_t>(c)];
          sx(static_cast<Eigen::Index>(j), c) = st[static_cast<std::size_t>(c)];
        }
      }
      StepResult r = compute_step(model, lx, ly, wx, sx, cfg.loss);
      if (!std::isfinite(r.loss.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(s + 1));
      }
      double scale = 1.0;
      if (cfg.schedule == LrSchedule::kCosine && total_steps > 0) {
        scale = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(report.steps) /
                                      static_cast<double>(total_steps)));
      }
      try {
        step(model, r.grads, opt, scale);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                           ", step " + std::to_string(s + 1) + ")");
      }
      ++report.steps;
      acc.sup += r.loss.sup;
      acc.unsup += r.loss.unsup;
      acc.con += r.loss.con;
      acc.total += r.loss.total;
      acc.confident_count += r.loss.confident_count;
      seen_unlabeled += r.unlabeled_count;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(batches.size(), 1));
    acc.sup /= nb;
    acc.unsup /= nb;
    acc.con /= nb;
    acc.total = acc.sup + cfg.loss.lambda_u * acc.unsup + cfg.loss.lambda_con * acc.con;
    report.epoch_losses.push_back(acc);
    report.confident_fraction.push_back(
        seen_unlabeled == 0 ? 0.0
                            : static_cast<double>(acc.confident_count) / static_cast<double>(seen_unlabeled));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace citadel
