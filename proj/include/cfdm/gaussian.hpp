#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cfdm/types.hpp"

namespace cfdm {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a nan) propagates
  return m + std::log((v.array() - m).exp().sum());
}

/// Multivariate normal in Cholesky form. Construction fails on a
/// non-positive-definite covariance.
struct MvnChol {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_lower;  // L with L L^T = Sigma
  double log_norm = 0.0;       // -d/2 log(2 pi) - sum_i log L_ii

  static MvnChol from(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw FitError("covariance not positive definite");
    MvnChol g;
    g.mean = mean;
    g.chol_lower = llt.matrixL();
    g.log_norm = -0.5 * static_cast<double>(mean.size()) * kLog2Pi -
                 g.chol_lower.diagonal().array().log().sum();
    return g;
  }

  double log_pdf(const Eigen::VectorXd& x) const {
    Eigen::VectorXd u = x - mean;
    chol_lower.triangularView<Eigen::Lower>().solveInPlace(u);
    return log_norm - 0.5 * u.squaredNorm();
  }

  /// Log density of every row of X at once.
  Eigen::VectorXd log_pdf_rows(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd U = (X.rowwise() - mean.transpose()).transpose();
    chol_lower.triangularView<Eigen::Lower>().solveInPlace(U);
    return (-0.5 * U.colwise().squaredNorm().array() + log_norm).transpose();
  }
};

/// Per-component conditional decomposition of a joint [z, a] mixture:
/// marginal Gaussians over z plus the scalar conditional a | z. This is the
/// shared backbone of both regression methods.
class ConditionalGaussianMixture {
 public:
  explicit ConditionalGaussianMixture(const GmmParams& gmm) {
    gmm.validate();
    const int d = gmm.dim();
    if (d < 2) throw std::invalid_argument("joint dimension must be >= 2");
    n_ = gmm.n_components;
    input_dim_ = d - 1;
    log_weights_ = gmm.weights.array().max(1e-300).log();
    mu_a_.resize(n_);
    cond_var_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      const Eigen::VectorXd& mu = gmm.means[i];
      const Eigen::MatrixXd& cov = gmm.covariances[i];
      const Eigen::MatrixXd cov_zz = cov.topLeftCorner(input_dim_, input_dim_);
      const Eigen::RowVectorXd cov_az = cov.bottomLeftCorner(1, input_dim_);
      marginal_z_.push_back(MvnChol::from(mu.head(input_dim_), cov_zz));
      mu_a_(i) = mu(input_dim_);
      // gain = Sigma_az Sigma_zz^{-1}, via the Cholesky factor of Sigma_zz
      const Eigen::MatrixXd& L = marginal_z_.back().chol_lower;
      Eigen::VectorXd w = cov_az.transpose();
      L.triangularView<Eigen::Lower>().solveInPlace(w);
      Eigen::VectorXd g = w;
      L.transpose().triangularView<Eigen::Upper>().solveInPlace(g);
      gain_.push_back(g.transpose());
      // Schur complement; the fit-side ridge keeps it positive
      const double s2 = cov(input_dim_, input_dim_) - w.squaredNorm();
      cond_var_(i) = std::max(s2, 1e-300);
    }
  }

  int n_components() const { return n_; }
  int input_dim() const { return input_dim_; }
  const Eigen::VectorXd& log_weights() const { return log_weights_; }
  const Eigen::VectorXd& conditional_variances() const { return cond_var_; }
  double prior_mean_a(int i) const { return mu_a_(i); }
  const Eigen::VectorXd& mean_z(int i) const { return marginal_z_[i].mean; }

  /// log N(z; mu_i^z, Sigma_i^zz) for every component.
  Eigen::VectorXd log_marginals(const Eigen::VectorXd& z) const {
    check_input(z);
    Eigen::VectorXd out(n_);
    for (int i = 0; i < n_; ++i) out(i) = marginal_z_[i].log_pdf(z);
    return out;
  }

  /// Conditional mean of a given z under component i.
  double conditional_mean(int i, const Eigen::VectorXd& z) const {
    return mu_a_(i) + gain_[i].dot(z - marginal_z_[i].mean);
  }

  Eigen::VectorXd conditional_means(const Eigen::VectorXd& z) const {
    check_input(z);
    Eigen::VectorXd out(n_);
    for (int i = 0; i < n_; ++i) out(i) = conditional_mean(i, z);
    return out;
  }

  const Eigen::RowVectorXd& gain(int i) const { return gain_[i]; }

 private:
  void check_input(const Eigen::VectorXd& z) const {
    if (z.size() != input_dim_)
      throw std::invalid_argument("input dimension mismatch");
    if (!z.allFinite()) throw std::invalid_argument("input vector not finite");
  }

  int n_ = 0;
  int input_dim_ = 0;
  Eigen::VectorXd log_weights_;
  std::vector<MvnChol> marginal_z_;
  Eigen::VectorXd mu_a_;
  std::vector<Eigen::RowVectorXd> gain_;
  Eigen::VectorXd cond_var_;
};

}  // namespace cfdm
