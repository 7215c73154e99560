#include "citadel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_set>

#include "citadel/errors.hpp"

namespace citadel {
namespace {

// Indices sorted by key, ascending or descending, ties to the lower index.
std::vector<std::size_t> rank_by(std::span<const double> key, bool descending) {
  std::vector<std::size_t> idx = iota_indices(key.size());
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return descending ? key[a] > key[b] : key[a] < key[b];
    return a < b;
  });
  return idx;
}

template <typename F>
std::vector<double> project(std::span<const SelectionScore> scores, F field) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(field(s));
  return out;
}

std::vector<std::size_t> take(std::vector<std::size_t> ranked, std::size_t k) {
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

}  // namespace

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kMultiCriteria: return "multi";
    case SelectorKind::kMarginOnly: return "margin";
    case SelectorKind::kLpOnly: return "lp";
    case SelectorKind::kLowConfidenceOnly: return "lowconf";
    case SelectorKind::kRandom: return "random";
  }
  return "unknown";
}

SelectorKind selector_from_string(const std::string& name) {
  if (name == "multi" || name == "multi-criteria") return SelectorKind::kMultiCriteria;
  if (name == "margin") return SelectorKind::kMarginOnly;
  if (name == "lp") return SelectorKind::kLpOnly;
  if (name == "lowconf" || name == "low-confidence") return SelectorKind::kLowConfidenceOnly;
  if (name == "random") return SelectorKind::kRandom;
  throw ConfigError("unknown selector '" + name + "' (expected multi, margin, lp, lowconf, random)");
}

void SelectorConfig::validate() const {
  if (!(p_norm >= 1.0) || !std::isfinite(p_norm)) throw ConfigError("selector.p_norm must be >= 1");
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) {
    throw ConfigError("selector weights alpha, beta, gamma must be >= 0");
  }
  if (kind == SelectorKind::kMultiCriteria && alpha == 0.0 && beta == 0.0 && gamma == 0.0) {
    throw ConfigError("selector weights must not all be zero for multi-criteria selection");
  }
  if (intersection_quantile && !(*intersection_quantile > 0.0 && *intersection_quantile <= 1.0)) {
    throw ConfigError("selector.intersection_quantile must be in (0,1]");
  }
}

std::vector<double> margin_scores(std::span<const Probabilities> probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(std::max(p[0], p[1]) - std::min(p[0], p[1]));
  return out;
}

std::vector<double> confidence_scores(std::span<const Probabilities> probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(std::max(p[0], p[1]));
  return out;
}

std::vector<double> lp_distances(const RowMatrix& unlabeled, const RowMatrix& labeled,
                                 double p_norm) {
  if (labeled.rows() == 0) throw PreconditionError("lp_distances: labeled set is empty");
  if (unlabeled.rows() > 0 && unlabeled.cols() != labeled.cols()) {
    throw ShapeError("lp_distances: embedding dimensions differ");
  }
  if (!(p_norm >= 1.0)) throw PreconditionError("lp_distances: p must be >= 1");

  const Eigen::Index nl = labeled.rows();
  const Eigen::Index dim = labeled.cols();
  // Coordinate-major copy so the inner loop runs over labeled points and
  // vectorises without reordering any per-pair sum.
  const Matrix by_coord = labeled;  // column-major: column j holds coordinate j
  const bool squared = p_norm == 2.0;
  const bool manhattan = p_norm == 1.0;
  std::vector<double> acc(static_cast<std::size_t>(nl));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(unlabeled.rows()));
  for (Eigen::Index i = 0; i < unlabeled.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double* a = acc.data();
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double u = unlabeled(i, j);
      const double* col = by_coord.col(j).data();
      if (squared) {
        for (Eigen::Index l = 0; l < nl; ++l) {
          const double d = u - col[l];
          a[l] += d * d;
        }
      } else if (manhattan) {
        for (Eigen::Index l = 0; l < nl; ++l) a[l] += std::abs(u - col[l]);
      } else {
        for (Eigen::Index l = 0; l < nl; ++l) a[l] += std::pow(std::abs(u - col[l]), p_norm);
      }
    }
    double best;
    if (squared) {
      // sqrt is correctly rounded and monotone, so the root of the minimum is
      // the minimum of the roots.
      best = std::sqrt(*std::min_element(acc.begin(), acc.end()));
    } else if (manhattan) {
      best = *std::min_element(acc.begin(), acc.end());
    } else {
      best = std::numeric_limits<double>::infinity();
      for (double s : acc) best = std::min(best, std::pow(s, 1.0 / p_norm));
    }
    out.push_back(best);
  }
  ops::add(static_cast<std::uint64_t>(unlabeled.rows()) * static_cast<std::uint64_t>(nl) *
           static_cast<std::uint64_t>(dim) * 3);
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("minmax_normalize: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(values.size(), 0.5);
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
  }
  return out;
}

std::vector<double> hybrid_scores(std::span<const double> margin_norm,
                                  std::span<const double> distance_norm,
                                  std::span<const double> confidence_norm, double alpha,
                                  double beta, double gamma) {
  if (margin_norm.size() != distance_norm.size() || margin_norm.size() != confidence_norm.size()) {
    throw ShapeError("hybrid_scores: criterion lengths differ");
  }
  std::vector<double> out(margin_norm.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = alpha * (1.0 - margin_norm[i]) + beta * distance_norm[i] +
             gamma * (1.0 - confidence_norm[i]);
  }
  return out;
}

std::vector<SelectionScore> score_pool(std::span<const Probabilities> pool_probs,
                                       const RowMatrix& pool_embeddings,
                                       const RowMatrix& labeled_embeddings,
                                       const SelectorConfig& cfg) {
  cfg.validate();
  const std::size_t n = pool_probs.size();
  std::vector<SelectionScore> scores(n);
  if (n == 0) return scores;

  const bool need_distance = cfg.kind == SelectorKind::kLpOnly ||
                             (cfg.kind == SelectorKind::kMultiCriteria &&
                              (cfg.beta > 0.0 || cfg.intersection_quantile.has_value()));
  const std::vector<double> margin = margin_scores(pool_probs);
  const std::vector<double> conf = confidence_scores(pool_probs);
  std::vector<double> dist(n, 0.0);
  if (need_distance) {
    if (static_cast<std::size_t>(pool_embeddings.rows()) != n) {
      throw ShapeError("score_pool: embeddings and probabilities differ in length");
    }
    dist = lp_distances(pool_embeddings, labeled_embeddings, cfg.p_norm);
  }
  const std::vector<double> mn = minmax_normalize(margin);
  const std::vector<double> dn = minmax_normalize(dist);
  const std::vector<double> cn = minmax_normalize(conf);
  const std::vector<double> hy = hybrid_scores(mn, dn, cn, cfg.alpha, cfg.beta, cfg.gamma);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = {margin[i], dist[i], conf[i], mn[i], dn[i], cn[i], hy[i]};
  }
  return scores;
}

std::vector<std::size_t> select_from_scores(std::span<const SelectionScore> scores,
                                            const SelectorConfig& cfg, std::size_t k,
                                            RandomSource& rng) {
  cfg.validate();
  const std::size_t n = scores.size();
  if (k == 0 || n == 0) return {};
  switch (cfg.kind) {
    case SelectorKind::kMultiCriteria: {
      const auto hybrid = project(scores, [](const SelectionScore& s) { return s.hybrid; });
      std::vector<std::size_t> ranked = rank_by(hybrid, /*descending=*/true);
      if (cfg.intersection_quantile) {
        const auto quota = static_cast<std::size_t>(
            std::ceil(*cfg.intersection_quantile * static_cast<double>(n)));
        auto top = [&](std::vector<double> key, bool desc) {
          auto r = rank_by(key, desc);
          r.resize(std::min(quota, r.size()));
          return std::unordered_set<std::size_t>(r.begin(), r.end());
        };
        const auto low_margin = top(project(scores, [](const SelectionScore& s) { return s.margin; }), false);
        const auto far = top(project(scores, [](const SelectionScore& s) { return s.lp_distance; }), true);
        const auto low_conf = top(project(scores, [](const SelectionScore& s) { return s.confidence; }), false);
        std::erase_if(ranked, [&](std::size_t i) {
          return !low_margin.contains(i) || !far.contains(i) || !low_conf.contains(i);
        });
      }
      return take(std::move(ranked), k);
    }
    case SelectorKind::kMarginOnly:
      return take(rank_by(project(scores, [](const SelectionScore& s) { return s.margin; }), false), k);
    case SelectorKind::kLpOnly:
      return take(rank_by(project(scores, [](const SelectionScore& s) { return s.lp_distance; }), true), k);
    case SelectorKind::kLowConfidenceOnly: {
      const auto conf = project(scores, [](const SelectionScore& s) { return s.confidence; });
      std::vector<std::size_t> ranked = rank_by(conf, false);
      std::erase_if(ranked, [&](std::size_t i) { return !(conf[i] < cfg.low_confidence_cutoff); });
      return take(std::move(ranked), k);
    }
    case SelectorKind::kRandom: {
      std::vector<std::size_t> idx = iota_indices(n);
      const std::size_t m = std::min(k, n);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + rng.below(n - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(m);
      return idx;
    }
  }
  return {};
}

Selection select(std::span<const FeatureVector> pool, const Classifier& model,
                 const RowMatrix& labeled_embeddings, const SelectorConfig& cfg, std::size_t k,
                 RandomSource& rng) {
  Selection out;
  if (pool.empty()) return out;
  const PoolView view = predict_and_embed(model, pool);
  out.scores = score_pool(view.probabilities, view.embeddings, labeled_embeddings, cfg);
  out.indices = select_from_scores(out.scores, cfg, k, rng);
  return out;
}

void write_scores_csv(const std::filesystem::path& path, std::span<const SelectionScore> scores,
                      std::span<const std::size_t> selected) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<char> flag(scores.size(), 0);
  for (std::size_t i : selected) {
    if (i < flag.size()) flag[i] = 1;
  }
  out << "index,margin,lp_distance,confidence,hybrid,selected\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    out << i << ',' << s.margin << ',' << s.lp_distance << ',' << s.confidence << ',' << s.hybrid
        << ',' << static_cast<int>(flag[i]) << '\n';
  }
}

}  // namespace citadel
