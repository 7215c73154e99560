#include "citadel/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "citadel/errors.hpp"
#include "citadel/net.hpp"

namespace citadel {
namespace {

double neg_log_clamped(double p) { return -std::log(std::clamp(p, kProbClamp, 1.0)); }

void check_pairs(const Matrix& m, const char* what) {
  if (m.cols() != 2) throw ShapeError(std::string(what) + " must have two columns");
}

}  // namespace

void LossConfig::validate() const {
  if (!(confidence_threshold > 0.0)) throw ConfigError("loss.confidence_threshold must be > 0");
  if (!(lambda_u >= 0.0) || !std::isfinite(lambda_u)) throw ConfigError("loss.lambda_u must be >= 0");
  if (!(lambda_con >= 0.0) || !std::isfinite(lambda_con)) {
    throw ConfigError("loss.lambda_con must be >= 0");
  }
  if (!(contrastive_temperature > 0.0)) {
    throw ConfigError("loss.contrastive_temperature must be > 0");
  }
}

LossResult supervised_ce(const Matrix& probs, std::span<const int> labels) {
  check_pairs(probs, "probabilities");
  if (probs.rows() == 0) throw PreconditionError("supervised_ce: empty batch");
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw ShapeError("supervised_ce: probabilities and labels differ in length");
  }
  const auto n = static_cast<double>(probs.rows());
  LossResult r;
  r.grad = probs / n;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw PreconditionError("supervised_ce: labels must be 0 or 1");
    r.value += neg_log_clamped(probs(i, y));
    r.grad(i, y) -= 1.0 / n;
  }
  r.value /= n;
  return r;
}

ConsistencyResult consistency_loss(const Matrix& weak_probs, const Matrix& strong_logits,
                                   double threshold) {
  check_pairs(weak_probs, "weak probabilities");
  check_pairs(strong_logits, "strong logits");
  if (weak_probs.rows() != strong_logits.rows()) {
    throw ShapeError("consistency_loss: weak and strong batches differ in length");
  }
  ConsistencyResult r;
  r.grad = Matrix::Zero(strong_logits.rows(), 2);
  if (weak_probs.rows() == 0) return r;
  const auto n = static_cast<double>(weak_probs.rows());
  for (Eigen::Index j = 0; j < weak_probs.rows(); ++j) {
    const double p0 = weak_probs(j, 0);
    const double p1 = weak_probs(j, 1);
    const double confidence = std::max(p0, p1);
    if (!(confidence >= threshold)) continue;
    const int pseudo = p1 > p0 ? 1 : 0;
    const Probabilities q = softmax2(strong_logits(j, 0), strong_logits(j, 1));
    r.value += neg_log_clamped(q[static_cast<std::size_t>(pseudo)]);
    r.grad(j, 0) = q[0] / n;
    r.grad(j, 1) = q[1] / n;
    r.grad(j, pseudo) -= 1.0 / n;
    ++r.confident_count;
  }
  r.value /= n;
  return r;
}

LossResult supervised_contrastive(const Matrix& embeddings, std::span<const int> labels,
                                  double temperature, bool normalize) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw PreconditionError("supervised_contrastive: need at least 2 samples");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ShapeError("supervised_contrastive: embeddings and labels differ in length");
  }
  if (!(temperature > 0.0)) throw PreconditionError("supervised_contrastive: temperature must be > 0");

  constexpr double kNormFloor = 1e-12;
  Vector norms = Vector::Ones(n);
  Matrix u = embeddings;
  if (normalize) {
    for (Eigen::Index i = 0; i < n; ++i) {
      norms[i] = std::max(embeddings.row(i).norm(), kNormFloor);
      u.row(i) /= norms[i];
    }
  }
  const Matrix sim = (u * u.transpose()) / temperature;

  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix g = Matrix::Zero(n, n);  // d loss / d sim
  LossResult r;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i && labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)]) ++positives;
    }
    if (positives == 0) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) m = std::max(m, sim(i, a));
    }
    double denom = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a) - m);
    }
    const double lse = m + std::log(denom);
    const double inv_p = 1.0 / static_cast<double>(positives);
    double pos_sum = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      const bool positive = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)];
      if (positive) pos_sum += sim(i, a);
      g(i, a) = inv_n * (std::exp(sim(i, a) - lse) - (positive ? inv_p : 0.0));
    }
    r.value += lse - inv_p * pos_sum;
  }
  r.value *= inv_n;

  const Matrix du = ((g + g.transpose()) * u) / temperature;
  if (!normalize) {
    r.grad = du;
    return r;
  }
  r.grad.resize(n, embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms[i] <= kNormFloor) {
      r.grad.row(i) = du.row(i) / kNormFloor;
    } else {
      r.grad.row(i) = (du.row(i) - u.row(i) * u.row(i).dot(du.row(i))) / norms[i];
    }
  }
  return r;
}

LossBreakdown total_loss(double sup, double unsup, double con, const LossConfig& cfg,
                         std::size_t confident_count) {
  if (!std::isfinite(sup) || !std::isfinite(unsup) || !std::isfinite(con)) {
    throw NumericError("total_loss: non-finite loss component");
  }
  LossBreakdown b;
  b.sup = sup;
  b.unsup = unsup;
  b.con = con;
  b.total = sup + cfg.lambda_u * unsup + cfg.lambda_con * con;
  b.confident_count = confident_count;
  return b;
}

}  // namespace citadel
