#include <doctest.h>

#include <cmath>
#include <numeric>

#include "citadel/errors.hpp"
#include "citadel/losses.hpp"
#include "citadel/net.hpp"
#include "support.hpp"

using namespace citadel;
using namespace testing;

namespace {

Matrix probs_rows(std::initializer_list<std::array<double, 2>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index r = 0;
  for (const auto& p : rows) {
    m(r, 0) = p[0];
    m(r, 1) = p[1];
    ++r;
  }
  return m;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), 2);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Probabilities s = softmax2(logits(r, 0), logits(r, 1));
    p(r, 0) = s[0];
    p(r, 1) = s[1];
  }
  return p;
}

// Direct transcription of the supervised contrastive loss with explicit loops.
double contrastive_oracle(const Matrix& emb, const std::vector<int>& labels, double t) {
  const auto n = emb.rows();
  Matrix z = emb;
  for (Eigen::Index i = 0; i < n; ++i) z.row(i) /= z.row(i).norm();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(z.row(i).dot(z.row(a)) / t);
    }
    double sum = 0.0;
    int positives = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == i || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(i)]) continue;
      sum += std::log(std::exp(z.row(i).dot(z.row(p)) / t) / denom);
      ++positives;
    }
    if (positives > 0) total += sum / positives;
  }
  return -total / static_cast<double>(n);
}

double max_rel(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

template <typename F>
Matrix numeric_grad(Matrix x, F f, double eps = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const double up = f(x);
    x.data()[i] = saved - eps;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  CHECK(supervised_ce(probs_rows({{1.0, 0.0}}), std::vector<int>{0}).value == doctest::Approx(0.0));
  CHECK(supervised_ce(probs_rows({{0.5, 0.5}}), std::vector<int>{1}).value == doctest::Approx(std::log(2.0)));
  const double hand = (-std::log(0.8) - std::log(0.3) - std::log(0.6)) / 3.0;
  CHECK(supervised_ce(probs_rows({{0.8, 0.2}, {0.7, 0.3}, {0.4, 0.6}}), std::vector<int>{0, 1, 1}).value ==
        doctest::Approx(hand).epsilon(1e-14));
  // p_y = 0 is clamped instead of producing infinity.
  const double clamped = supervised_ce(probs_rows({{1.0, 0.0}}), std::vector<int>{1}).value;
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-std::log(kProbClamp)));
  CHECK_THROWS_AS(supervised_ce(Matrix(0, 2), std::vector<int>{}), PreconditionError);
  CHECK_THROWS_AS(supervised_ce(probs_rows({{0.5, 0.5}}), std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("consistency loss examples") {
  SUBCASE("nothing confident") {
    const Matrix weak = probs_rows({{0.9, 0.1}, {0.1, 0.9}});
    const auto r = consistency_loss(weak, Matrix::Zero(2, 2), 0.95);
    CHECK(r.value == 0.0);
    CHECK(r.confident_count == 0);
    CHECK(r.grad.isZero(0.0));
  }
  SUBCASE("one confident sample") {
    const Matrix weak = probs_rows({{0.96, 0.04}});
    Matrix strong(1, 2);
    strong << std::log(0.96), std::log(0.04);
    const auto r = consistency_loss(weak, strong, 0.95);
    CHECK(r.value == doctest::Approx(-std::log(0.96)).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(0.0408).epsilon(1e-3));
    CHECK(r.confident_count == 1);
  }
  SUBCASE("divides by the whole batch") {
    const Matrix weak = probs_rows({{0.97, 0.03}, {0.5, 0.5}, {0.02, 0.98}, {0.6, 0.4}});
    Matrix strong(4, 2);
    strong << 0.3, -0.2, 1.0, 1.0, -0.5, 0.7, 2.0, 0.0;
    const Matrix sp = softmax_rows(strong);
    const double hand = (-std::log(sp(0, 0)) - std::log(sp(2, 1))) / 4.0;
    const auto r = consistency_loss(weak, strong, 0.95);
    CHECK(r.value == doctest::Approx(hand).epsilon(1e-14));
    CHECK(r.confident_count == 2);
    CHECK(r.grad.row(1).isZero(0.0));
    CHECK(r.grad.row(3).isZero(0.0));
  }
}

TEST_CASE("contrastive loss examples") {
  SUBCASE("two identical same-label embeddings") {
    Matrix e(2, 3);
    e << 1, 2, 3, 1, 2, 3;
    CHECK(supervised_contrastive(e, std::vector<int>{1, 1}, 0.07).value == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("no positives") {
    Matrix e(2, 3);
    e << 1, 0, 0, 0, 1, 0;
    const auto r = supervised_contrastive(e, std::vector<int>{0, 1}, 0.07);
    CHECK(r.value == 0.0);
    CHECK(r.grad.isZero(0.0));
  }
  SUBCASE("matches the double-loop oracle") {
    RandomSource rng(4);
    const Matrix e = random_matrix(4, 5, rng);
    const std::vector<int> y = {0, 0, 1, 1};
    CHECK(std::abs(supervised_contrastive(e, y, 0.07).value - contrastive_oracle(e, y, 0.07)) < 1e-10);
  }
  SUBCASE("degenerate batch") {
    CHECK_THROWS_AS(supervised_contrastive(Matrix::Ones(1, 3), std::vector<int>{0}, 0.07), PreconditionError);
  }
}

TEST_CASE("total loss combination") {
  LossConfig cfg;
  const LossBreakdown b = total_loss(1.0, 2.0, 4.0, cfg);
  CHECK(b.total == 5.0);
  cfg.lambda_con = 0.0;
  CHECK(total_loss(1.0, 2.0, 4.0, cfg).total == 3.0);
  const LossConfig defaults;
  CHECK(defaults.lambda_u == 1.0);
  CHECK(defaults.lambda_con == 0.5);
  CHECK(defaults.confidence_threshold == 0.95);
  CHECK(defaults.contrastive_temperature == 0.07);
  CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, 0.0, defaults), NumericError);
}

TEST_CASE("doubling lambda_con doubles the contrastive contribution") {
  RandomSource rng(13);
  for (int t = 0; t < 20; ++t) {
    const double sup = rng.uniform(0, 2), unsup = rng.uniform(0, 2), con = rng.uniform(0, 2);
    LossConfig a;
    a.lambda_con = rng.uniform(0.1, 1.0);
    LossConfig b = a;
    b.lambda_con = 2 * a.lambda_con;
    const double ca = total_loss(sup, unsup, con, a).total - sup - a.lambda_u * unsup;
    const double cb = total_loss(sup, unsup, con, b).total - sup - b.lambda_u * unsup;
    CHECK(cb == doctest::Approx(2 * ca).epsilon(1e-12));
  }
}

TEST_CASE("loss gradients match central differences") {
  RandomSource rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(2));

    const Matrix logits = random_matrix(n, 2, rng, -3, 3);
    const LossResult ce = supervised_ce(softmax_rows(logits), y);
    const Matrix ce_num = numeric_grad(logits, [&](const Matrix& l) { return supervised_ce(softmax_rows(l), y).value; });
    CHECK(max_rel(ce.grad, ce_num) < 1e-4);

    Matrix weak = softmax_rows(random_matrix(n, 2, rng, -5, 5));
    const Matrix strong = random_matrix(n, 2, rng, -3, 3);
    const auto cons = consistency_loss(weak, strong, 0.8);
    const Matrix cons_num =
        numeric_grad(strong, [&](const Matrix& s) { return consistency_loss(weak, s, 0.8).value; });
    CHECK(max_rel(cons.grad, cons_num) < 1e-4);

    const Matrix emb = random_matrix(n, 4, rng);
    for (bool normalize : {true, false}) {
      const double temp = normalize ? 0.07 : 1.0;
      const LossResult con = supervised_contrastive(emb, y, temp, normalize);
      const Matrix con_num =
          numeric_grad(emb, [&](const Matrix& e) { return supervised_contrastive(e, y, temp, normalize).value; });
      CHECK(max_rel(con.grad, con_num) < 1e-4);
    }
  }
}

TEST_CASE("consistency loss is non-increasing in the threshold") {
  RandomSource rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix weak = softmax_rows(random_matrix(16, 2, rng, -4, 4));
    const Matrix strong = random_matrix(16, 2, rng, -2, 2);
    double prev = consistency_loss(weak, strong, 0.5).value;
    for (double tau = 0.55; tau <= 1.0; tau += 0.05) {
      const double cur = consistency_loss(weak, strong, tau).value;
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("contrastive loss is invariant to batch order and label names") {
  RandomSource rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6;
    const Matrix e = random_matrix(n, 3, rng);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    const double base = supervised_contrastive(e, y, 0.1).value;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix pe(n, 3);
    std::vector<int> py(n);
    for (std::size_t i = 0; i < n; ++i) {
      pe.row(static_cast<Eigen::Index>(i)) = e.row(static_cast<Eigen::Index>(perm[i]));
      py[i] = y[perm[i]];
    }
    CHECK(supervised_contrastive(pe, py, 0.1).value == doctest::Approx(base).epsilon(1e-12));

    std::vector<int> swapped(y);
    for (auto& v : swapped) v = 1 - v;
    CHECK(supervised_contrastive(e, swapped, 0.1).value == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("each loss term is non-negative") {
  RandomSource rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    CHECK(supervised_ce(softmax_rows(random_matrix(8, 2, rng, -4, 4)), y).value >= 0.0);
    CHECK(consistency_loss(softmax_rows(random_matrix(8, 2, rng, -6, 6)), random_matrix(8, 2, rng), 0.7).value >= 0.0);
    CHECK(supervised_contrastive(random_matrix(8, 3, rng), y, 0.07).value >= -1e-12);
  }
}

TEST_CASE("config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.contrastive_temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda_u = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.confidence_threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
