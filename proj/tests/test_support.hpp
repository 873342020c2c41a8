#pragma once

// Shared fixtures and independent oracles. Everything here deliberately
// avoids the library's numeric paths (Cholesky / log-sum-exp): densities go
// through plain inverses and determinants so oracle comparisons are
// meaningful.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "cfdm/cfdm.hpp"

namespace testkit {

inline constexpr double kPi = 3.14159265358979323846;

/// Random SPD matrix A A^T + ridge I.
inline Eigen::MatrixXd random_spd(int d, cfdm::Rng& rng, double ridge = 0.2) {
  Eigen::MatrixXd a(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  Eigen::MatrixXd m = a * a.transpose() / static_cast<double>(d);
  m.diagonal().array() += ridge;
  return 0.5 * (m + m.transpose());
}

/// Direct Gaussian density via inverse and determinant.
inline double naive_mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& cov) {
  const int d = static_cast<int>(x.size());
  const double det = cov.determinant();
  const Eigen::VectorXd u = x - mu;
  const double quad = u.dot(cov.inverse() * u);
  return std::exp(-0.5 * quad) / (std::pow(2.0 * kPi, d / 2.0) * std::sqrt(det));
}

inline double naive_gmm_pdf(const Eigen::VectorXd& x, const cfdm::GmmParams& p) {
  double sum = 0.0;
  for (int i = 0; i < p.n_components; ++i)
    sum += p.weights(i) * naive_mvn_pdf(x, p.means[i], p.covariances[i]);
  return sum;
}

/// Forward recursion step exactly as printed, in linear probability space.
inline Eigen::VectorXd naive_forward_step(const Eigen::VectorXd& alpha_prev,
                                          const Eigen::VectorXd& z,
                                          const cfdm::HmmParams& hmm) {
  const int n = hmm.gmm.n_components;
  const int dz = hmm.gmm.dim() - 1;
  Eigen::VectorXd numer(n);
  for (int i = 0; i < n; ++i) {
    double mixed = 0.0;
    for (int j = 0; j < n; ++j) mixed += alpha_prev(j) * hmm.transitions(j, i);
    const Eigen::VectorXd mu_z = hmm.gmm.means[i].head(dz);
    const Eigen::MatrixXd cov_zz = hmm.gmm.covariances[i].topLeftCorner(dz, dz);
    numer(i) = mixed * naive_mvn_pdf(z, mu_z, cov_zz);
  }
  return numer / numer.sum();
}

/// Conditional-Gaussian regression for a single component, straight from the
/// block formulas with a plain inverse.
inline double naive_conditional_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& mu,
                                     const Eigen::MatrixXd& cov) {
  const int dz = static_cast<int>(z.size());
  const Eigen::VectorXd mu_z = mu.head(dz);
  const double mu_a = mu(dz);
  const Eigen::MatrixXd cov_zz = cov.topLeftCorner(dz, dz);
  const Eigen::RowVectorXd cov_az = cov.bottomLeftCorner(1, dz);
  return mu_a + (cov_az * cov_zz.inverse() * (z - mu_z))(0);
}

inline double naive_conditional_variance(int dz, const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd cov_zz = cov.topLeftCorner(dz, dz);
  const Eigen::RowVectorXd cov_az = cov.bottomLeftCorner(1, dz);
  const Eigen::VectorXd cov_za = cov.topRightCorner(dz, 1);
  return cov(dz, dz) - (cov_az * cov_zz.inverse() * cov_za)(0);
}

/// Samples from a mixture with the library Rng but library-independent math.
inline Eigen::MatrixXd sample_gmm(const cfdm::GmmParams& p, int n, cfdm::Rng& rng) {
  const int d = p.dim();
  std::vector<Eigen::MatrixXd> chol;
  for (const auto& cov : p.covariances)
    chol.push_back(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL());
  Eigen::MatrixXd out(n, d);
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    int comp = 0;
    double acc = 0.0;
    for (int i = 0; i < p.n_components; ++i) {
      acc += p.weights(i);
      if (u <= acc) {
        comp = i;
        break;
      }
      comp = i;
    }
    Eigen::VectorXd g(d);
    for (int j = 0; j < d; ++j) g(j) = rng.normal();
    out.row(k) = (p.means[comp] + chol[comp] * g).transpose();
  }
  return out;
}

inline cfdm::GmmParams make_gmm(const std::vector<double>& weights,
                                const std::vector<Eigen::VectorXd>& means,
                                const std::vector<Eigen::MatrixXd>& covs) {
  cfdm::GmmParams p;
  p.n_components = static_cast<int>(weights.size());
  p.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                static_cast<Eigen::Index>(weights.size()));
  p.means = means;
  p.covariances = covs;
  return p;
}

/// Constant-speed two-vehicle trajectory, gap fixed.
inline cfdm::Trajectory constant_trajectory(double v, double gap, int n_samples,
                                            const std::string& driver = "t0") {
  cfdm::Trajectory traj;
  traj.driver_id = driver;
  for (int k = 0; k < n_samples; ++k) {
    const double t = k * cfdm::kSampleDt;
    traj.samples.push_back({t, v * t, v, v * t + gap, v});
  }
  return traj;
}

/// Synthetic car-following event wrapper around raw sample arrays.
inline cfdm::CarFollowingEvent make_event(std::vector<cfdm::TrajectorySample> samples,
                                          const std::string& id = "ev0",
                                          const std::string& driver = "t0") {
  cfdm::CarFollowingEvent ev;
  ev.event_id = id;
  ev.driver_id = driver;
  ev.samples = std::move(samples);
  return ev;
}

/// Unique scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cfdm_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testkit
