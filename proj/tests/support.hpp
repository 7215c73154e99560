#pragma once

// Shared helpers for the unit tests: small random networks, a plain-loop
// reference forward pass, central finite differences, and scratch dirs.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "citadel/net.hpp"
#include "citadel/random.hpp"

namespace testing {

using namespace citadel;

inline Classifier random_net(std::size_t in, std::vector<std::size_t> hidden, std::uint64_t seed,
                             double scale = 1.0) {
  Classifier m = Classifier::initialize(mlp_architecture(in, hidden), seed);
  RandomSource rng(mix_seed(seed, 99));
  for (auto& l : m.mutable_layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = scale * rng.uniform(-0.5, 0.5);
    l.weight *= scale;
  }
  return m;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, RandomSource& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  }
  return m;
}

inline std::vector<FeatureVector> random_bits(std::size_t n, std::size_t d, RandomSource& rng, double p = 0.5) {
  std::vector<FeatureVector> out(n, FeatureVector(d));
  for (auto& x : out) {
    for (auto& b : x) b = rng.bernoulli(p) ? 1 : 0;
  }
  return out;
}

// Textbook forward pass with explicit loops, long double accumulation.
inline std::vector<long double> reference_probabilities(const Classifier& model, const std::vector<double>& x) {
  std::vector<long double> a(x.begin(), x.end());
  const auto& arch = model.architecture();
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& layer = model.layers()[l];
    std::vector<long double> z(arch[l].output_dim);
    for (std::size_t o = 0; o < z.size(); ++o) {
      long double s = layer.bias(static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<long double>(layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i))) * a[i];
      }
      z[o] = arch[l].activation == Activation::kReLU ? std::max<long double>(0.0L, s) : s;
    }
    a = std::move(z);
  }
  const long double m = std::max(a[0], a[1]);
  const long double e0 = std::exp(a[0] - m), e1 = std::exp(a[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients with central differences for every parameter.
// Relative error uses max(|a|, |n|, floor) in the denominator so parameters
// with vanishing gradients are judged on an absolute scale.
inline GradCheck check_parameter_gradients(Classifier model, const Gradients& analytic,
                                           const std::function<double(const Classifier&)>& loss,
                                           double eps = 1e-5, double floor = 1e-6) {
  GradCheck out;
  auto relerr = [&](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    auto& layer = model.mutable_layers()[l];
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        const double saved = layer.weight(r, c);
        layer.weight(r, c) = saved + eps;
        const double up = loss(model);
        layer.weight(r, c) = saved - eps;
        const double down = loss(model);
        layer.weight(r, c) = saved;
        out.max_rel_error = std::max(out.max_rel_error, relerr(analytic[l].weight(r, c), (up - down) / (2 * eps)));
        ++out.checked;
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      const double saved = layer.bias(r);
      layer.bias(r) = saved + eps;
      const double up = loss(model);
      layer.bias(r) = saved - eps;
      const double down = loss(model);
      layer.bias(r) = saved;
      out.max_rel_error = std::max(out.max_rel_error, relerr(analytic[l].bias(r), (up - down) / (2 * eps)));
      ++out.checked;
    }
  }
  return out;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("citadel-test-" + name + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
