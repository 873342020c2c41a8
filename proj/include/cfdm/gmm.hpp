#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cfdm/gaussian.hpp"
#include "cfdm/rng.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

struct EmConfig {
  int max_iter = 500;
  double rel_tol = 1e-6;               // relative log-likelihood change
  std::optional<double> cov_reg;       // diagonal ridge; default 1e-6 x mean variance
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
    if (cov_reg && *cov_reg < 0.0) throw std::invalid_argument("cov_reg must be >= 0");
  }
};

/// Ridge magnitude used when the config leaves it automatic: scaled to the
/// mean per-dimension variance so behavior is unit-insensitive.
inline double effective_cov_reg(const Eigen::MatrixXd& data, const EmConfig& cfg) {
  if (cfg.cov_reg) return *cfg.cov_reg;
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const double mean_var =
      (data.rowwise() - mean).squaredNorm() /
      (static_cast<double>(data.rows()) * static_cast<double>(data.cols()));
  return 1e-6 * mean_var;
}

namespace detail {

/// n x N matrix of log pi_i + log N_i(x_k).
inline Eigen::MatrixXd weighted_log_densities(const Eigen::MatrixXd& data,
                                              const GmmParams& p) {
  const int n = static_cast<int>(data.rows());
  Eigen::MatrixXd out(n, p.n_components);
  for (int i = 0; i < p.n_components; ++i) {
    const MvnChol g = MvnChol::from(p.means[i], p.covariances[i]);
    out.col(i) = g.log_pdf_rows(data).array() + std::log(std::max(p.weights(i), 1e-300));
  }
  return out;
}

/// Row-wise log-sum-exp.
inline Eigen::VectorXd row_log_sum_exp(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd rowmax = m.rowwise().maxCoeff();
  return rowmax.array() +
         (m.colwise() - rowmax).array().exp().rowwise().sum().log();
}

}  // namespace detail

/// Seeded k-means initialization: random distinct data points as starting
/// centers, Lloyd iterations to an assignment fixpoint (at most 100), then
/// per-cluster moments. Covariances get the diagonal ridge.
inline GmmParams kmeans_init(const Eigen::MatrixXd& data, int n_components,
                             std::uint64_t seed, double cov_reg) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (n_components < 1) throw std::invalid_argument("need >= 1 component");
  if (n < n_components) throw std::invalid_argument("fewer points than components");
  if (cov_reg < 0.0) throw std::invalid_argument("cov_reg must be >= 0");

  // pick initial centers: first n_components pairwise-distinct points in a
  // seeded random order; fails only if the data has too few distinct rows
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Eigen::MatrixXd centers(n_components, d);
  int picked = 0;
  for (int idx : order) {
    bool dup = false;
    for (int c = 0; c < picked && !dup; ++c)
      dup = (centers.row(c) - data.row(idx)).cwiseAbs().maxCoeff() == 0.0;
    if (dup) continue;
    centers.row(picked++) = data.row(idx);
    if (picked == n_components) break;
  }
  if (picked < n_components)
    throw std::invalid_argument("fewer distinct points than components");

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  std::vector<int> count(static_cast<std::size_t>(n_components), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    std::fill(count.begin(), count.end(), 0);
    for (int k = 0; k < n; ++k) {
      int best = 0;
      double best_d = (data.row(k) - centers.row(0)).squaredNorm();
      for (int c = 1; c < n_components; ++c) {
        const double dist = (data.row(k) - centers.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(k)] != best) changed = true;
      assign[static_cast<std::size_t>(k)] = best;
      ++count[static_cast<std::size_t>(best)];
    }
    // an empty cluster steals the point farthest from its current center
    for (int c = 0; c < n_components; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      int far_k = -1;
      double far_d = -1.0;
      for (int k = 0; k < n; ++k) {
        const int a = assign[static_cast<std::size_t>(k)];
        if (count[static_cast<std::size_t>(a)] <= 1) continue;
        const double dist = (data.row(k) - centers.row(a)).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far_k = k;
        }
      }
      if (far_k < 0) break;
      --count[static_cast<std::size_t>(assign[static_cast<std::size_t>(far_k)])];
      assign[static_cast<std::size_t>(far_k)] = c;
      count[static_cast<std::size_t>(c)] = 1;
      centers.row(c) = data.row(far_k);
      changed = true;
    }
    if (!changed) break;
    for (int c = 0; c < n_components; ++c) centers.row(c).setZero();
    for (int k = 0; k < n; ++k)
      centers.row(assign[static_cast<std::size_t>(k)]) += data.row(k);
    for (int c = 0; c < n_components; ++c)
      if (count[static_cast<std::size_t>(c)] > 0)
        centers.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
  }

  GmmParams p;
  p.n_components = n_components;
  p.weights.resize(n_components);
  p.means.resize(static_cast<std::size_t>(n_components));
  p.covariances.resize(static_cast<std::size_t>(n_components));
  for (int c = 0; c < n_components; ++c) {
    const double nc = static_cast<double>(count[static_cast<std::size_t>(c)]);
    p.weights(c) = nc / static_cast<double>(n);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (int k = 0; k < n; ++k)
      if (assign[static_cast<std::size_t>(k)] == c) mu += data.row(k).transpose();
    mu /= std::max(nc, 1.0);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < n; ++k) {
      if (assign[static_cast<std::size_t>(k)] != c) continue;
      const Eigen::VectorXd u = data.row(k).transpose() - mu;
      cov += u * u.transpose();
    }
    cov /= std::max(nc, 1.0);
    cov.diagonal().array() += cov_reg;
    p.means[static_cast<std::size_t>(c)] = mu;
    p.covariances[static_cast<std::size_t>(c)] = 0.5 * (cov + cov.transpose());
  }
  // normalize away the last-ulp drift so the simplex invariant is exact
  p.weights /= p.weights.sum();
  return p;
}

struct EmResult {
  GmmParams params;
  std::vector<double> loglik_trace;  // starts at the init, ends at the result
  int n_iter = 0;
  bool converged = false;
};

/// Standard EM for a Gaussian mixture. Responsibilities are computed in log
/// space; M-step covariances carry the diagonal ridge. Stops when the
/// relative log-likelihood improvement drops below rel_tol or at max_iter.
inline EmResult em_fit(const Eigen::MatrixXd& data, const GmmParams& init,
                       const EmConfig& cfg) {
  cfg.validate();
  init.validate();
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  const int nc = init.n_components;
  if (d != init.dim()) throw std::invalid_argument("data dimension mismatch");
  if (n <= nc) throw std::invalid_argument("need more samples than components");
  const double reg = effective_cov_reg(data, cfg);

  EmResult res;
  res.params = init;
  double ll_prev = -std::numeric_limits<double>::infinity();
  bool need_final_ll = false;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    Eigen::MatrixXd logp;
    try {
      logp = detail::weighted_log_densities(data, res.params);
    } catch (const FitError&) {
      throw FitError("EM covariance lost positive definiteness", res.params);
    }
    const Eigen::VectorXd lse = detail::row_log_sum_exp(logp);
    const double ll = lse.sum();
    if (!std::isfinite(ll))
      throw FitError("EM log-likelihood not finite", res.params);
    res.loglik_trace.push_back(ll);
    need_final_ll = false;
    if (iter > 0 &&
        std::abs(ll - ll_prev) <= cfg.rel_tol * std::max(std::abs(ll_prev), 1.0)) {
      res.converged = true;
      break;
    }
    ll_prev = ll;

    Eigen::MatrixXd resp = (logp.colwise() - lse).array().exp();
    const Eigen::VectorXd nk = resp.colwise().sum();
    GmmParams next = res.params;
    for (int i = 0; i < nc; ++i) {
      if (nk(i) < 1e-12) continue;  // collapsed component keeps its shape
      const Eigen::VectorXd mu = (resp.col(i).transpose() * data).transpose() / nk(i);
      const Eigen::MatrixXd centered = data.rowwise() - mu.transpose();
      Eigen::MatrixXd cov =
          centered.transpose() * (centered.array().colwise() * resp.col(i).array()).matrix() /
          nk(i);
      cov.diagonal().array() += reg;
      next.means[static_cast<std::size_t>(i)] = mu;
      next.covariances[static_cast<std::size_t>(i)] = 0.5 * (cov + cov.transpose());
    }
    next.weights = nk / static_cast<double>(n);
    next.weights /= next.weights.sum();
    res.params = std::move(next);
    res.n_iter = iter + 1;
    need_final_ll = true;
  }
  if (need_final_ll) {
    // the loop exhausted max_iter; score the returned parameters too
    const double ll =
        detail::row_log_sum_exp(detail::weighted_log_densities(data, res.params)).sum();
    if (!std::isfinite(ll)) throw FitError("EM log-likelihood not finite", res.params);
    res.loglik_trace.push_back(ll);
  }
  return res;
}

/// log sum_i pi_i N_i(x) via log-sum-exp.
inline double log_density(const Eigen::VectorXd& x, const GmmParams& p) {
  if (x.size() != p.dim()) throw std::invalid_argument("dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("input not finite");
  Eigen::VectorXd terms(p.n_components);
  for (int i = 0; i < p.n_components; ++i) {
    const MvnChol g = MvnChol::from(p.means[i], p.covariances[i]);
    terms(i) = std::log(std::max(p.weights(i), 1e-300)) + g.log_pdf(x);
  }
  return log_sum_exp(terms);
}

/// Bayesian information criterion, k ln(n) - 2 L; lower is better.
inline double bic(const Eigen::MatrixXd& data, const GmmParams& p) {
  const int n = static_cast<int>(data.rows());
  if (n == 0) throw std::invalid_argument("empty data");
  const int d = p.dim();
  const double L = detail::row_log_sum_exp(detail::weighted_log_densities(data, p)).sum();
  const double k = (p.n_components - 1) + p.n_components * d +
                   p.n_components * d * (d + 1) / 2.0;
  return k * std::log(static_cast<double>(n)) - 2.0 * L;
}

}  // namespace cfdm
