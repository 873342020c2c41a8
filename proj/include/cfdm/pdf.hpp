#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfdm/gaussian.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

inline constexpr double kArgmaxGridStep = 0.01;  // m/s^2

/// The joint density at fixed z, as a function of a, renormalized: a 1-D
/// Gaussian mixture with input-dependent weights.
struct ConditionalMixture1d {
  Eigen::VectorXd weights;    // on the simplex
  Eigen::VectorXd means;      // m/s^2
  Eigen::VectorXd variances;  // (m/s^2)^2

  /// Log density; stable against far-tail underflow.
  double log_density(double a) const {
    const Eigen::ArrayXd lt =
        weights.array().max(1e-300).log() - 0.5 * kLog2Pi -
        0.5 * variances.array().log() -
        (a - means.array()).square() / (2.0 * variances.array());
    const double m = lt.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((lt - m).exp().sum());
  }
};

class PdfPredictor;

/// Conditional decomposition at one input: w_i proportional to
/// pi_i N(z; mu_i^z, Sigma_i^zz); means and variances from the per-component
/// conditional Gaussians. Weights are normalized in log space.
inline ConditionalMixture1d conditional_mixture(const Eigen::VectorXd& z,
                                                const ConditionalGaussianMixture& cond) {
  ConditionalMixture1d mix;
  const Eigen::VectorXd logs = cond.log_weights() + cond.log_marginals(z);
  const double lse = log_sum_exp(logs);
  if (std::isfinite(lse)) {
    mix.weights = (logs.array() - lse).exp();
    mix.weights /= mix.weights.sum();
  } else {
    // every marginal underflowed; fall back to the priors
    mix.weights = cond.log_weights().array().exp();
    mix.weights /= mix.weights.sum();
  }
  mix.means = cond.conditional_means(z);
  mix.variances = cond.conditional_variances();
  return mix;
}

inline ConditionalMixture1d conditional_mixture(const Eigen::VectorXd& z,
                                                const GmmParams& gmm) {
  return conditional_mixture(z, ConditionalGaussianMixture(gmm));
}

namespace detail {

/// Golden-section maximization of a unimodal bracket; returns the best point
/// probed, preferring smaller a on exact density ties.
template <typename F>
std::pair<double, double> golden_max(F&& f, double lo, double hi) {
  constexpr double invphi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60 && (b - a) > 1e-12; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  if (f1 >= f2) return {x1, f1};
  return {x2, f2};
}

}  // namespace detail

/// Constrained mode of a 1-D Gaussian mixture: coarse grid over the bounds
/// plus each mean clamped into them as candidates, then golden-section
/// refinement around the best candidate. Ties break toward the smallest a.
inline double argmax_mixture_density(const ConditionalMixture1d& mix,
                                     const AccelBounds& bounds) {
  bounds.validate();
  const int n = static_cast<int>(mix.weights.size());
  if (n < 1) throw std::invalid_argument("empty mixture");

  const double lo = bounds.a_min, hi = bounds.a_max;
  const auto grid_count =
      static_cast<int>(std::floor((hi - lo) / kArgmaxGridStep + 1e-9)) + 1;

  // vectorized log density over the whole grid
  Eigen::ArrayXd grid(grid_count);
  for (int k = 0; k < grid_count; ++k) grid(k) = std::min(hi, lo + k * kArgmaxGridStep);
  Eigen::MatrixXd lt(n, grid_count);
  for (int i = 0; i < n; ++i) {
    const double c = std::log(std::max(mix.weights(i), 1e-300)) - 0.5 * kLog2Pi -
                     0.5 * std::log(mix.variances(i));
    lt.row(i) = c - (grid - mix.means(i)).square() / (2.0 * mix.variances(i));
  }
  Eigen::ArrayXd log_dens(grid_count);
  if (n == 1) {
    log_dens = lt.row(0).transpose().array();
  } else {
    const Eigen::RowVectorXd colmax = lt.colwise().maxCoeff();
    log_dens = (colmax.array() +
                (lt.rowwise() - colmax).array().exp().colwise().sum().log())
                   .transpose();
  }

  double best_a = grid(0);
  double best_f = log_dens(0);
  for (int k = 1; k < grid_count; ++k) {
    if (log_dens(k) > best_f) {  // ties keep the smaller a
      best_f = log_dens(k);
      best_a = grid(k);
    }
  }
  for (int i = 0; i < n; ++i) {
    const double cand = bounds.clamp(mix.means(i));
    const double f = mix.log_density(cand);
    if (f > best_f || (f == best_f && cand < best_a)) {
      best_f = f;
      best_a = cand;
    }
  }

  const auto [ref_a, ref_f] = detail::golden_max(
      [&](double a) { return mix.log_density(a); },
      std::max(lo, best_a - kArgmaxGridStep), std::min(hi, best_a + kArgmaxGridStep));
  if (ref_f > best_f || (ref_f == best_f && ref_a < best_a)) {
    best_f = ref_f;
    best_a = ref_a;
  }
  return best_a;
}

inline double argmax_acceleration(const Eigen::VectorXd& z, const GmmParams& gmm,
                                  const AccelBounds& bounds) {
  return argmax_mixture_density(conditional_mixture(z, gmm), bounds);
}

/// Batch form that reuses the conditional decomposition across samples.
class PdfPredictor {
 public:
  PdfPredictor(GmmParams gmm, AccelBounds bounds)
      : gmm_(std::move(gmm)), cond_(gmm_), bounds_(bounds) {
    bounds_.validate();
  }

  const GmmParams& params() const { return gmm_; }
  const AccelBounds& bounds() const { return bounds_; }

  double predict(const Eigen::VectorXd& z) const {
    return argmax_mixture_density(conditional_mixture(z, cond_), bounds_);
  }

  std::vector<double> predict_sequence(std::span<const ObservationVector> event) const {
    std::vector<double> out;
    out.reserve(event.size());
    for (const auto& ov : event) out.push_back(predict(ov.z));
    return out;
  }

 private:
  GmmParams gmm_;
  ConditionalGaussianMixture cond_;
  AccelBounds bounds_;
};

}  // namespace cfdm
