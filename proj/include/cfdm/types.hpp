#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfdm {

inline constexpr double kSampleDt = 0.1;   // s, fixed data rate
inline constexpr double kDtTol = 1e-9;
inline constexpr double kSimplexTol = 1e-12;

// ---------------------------------------------------------------------------
// Feature sets
// ---------------------------------------------------------------------------

enum class Channel { Dx, Dv, Dvdot, Jerk, Vh };

enum class FeatureSetId { Z1, Z2, Z3, Z4 };

/// One of the four input-variable combinations. The input vector z is laid
/// out in the order returned by channels(); the host acceleration a is always
/// appended last, so the joint observation has total_dim = input_dim + 1.
struct FeatureSet {
  FeatureSetId id = FeatureSetId::Z1;
  int input_dim = 2;
  int total_dim = 3;

  static FeatureSet of(FeatureSetId id) {
    switch (id) {
      case FeatureSetId::Z1: return {id, 2, 3};
      case FeatureSetId::Z2: return {id, 3, 4};
      case FeatureSetId::Z3: return {id, 4, 5};
      case FeatureSetId::Z4: return {id, 5, 6};
    }
    throw std::invalid_argument("unknown feature set");
  }

  const std::vector<Channel>& channels() const {
    static const std::vector<Channel> z1{Channel::Dx, Channel::Dv, Channel::Vh};
    static const std::vector<Channel> z4{Channel::Dx, Channel::Dv, Channel::Dvdot,
                                         Channel::Jerk, Channel::Vh};
    static const std::vector<Channel> z3{Channel::Dx, Channel::Dv, Channel::Dvdot,
                                         Channel::Vh};
    static const std::vector<Channel> z12{Channel::Dx, Channel::Dv};
    switch (id) {
      case FeatureSetId::Z1: return z12;
      case FeatureSetId::Z2: return z1;
      case FeatureSetId::Z3: return z3;
      case FeatureSetId::Z4: return z4;
    }
    throw std::invalid_argument("unknown feature set");
  }

  bool uses(Channel c) const {
    for (Channel x : channels())
      if (x == c) return true;
    return false;
  }

  std::string name() const {
    switch (id) {
      case FeatureSetId::Z1: return "z1";
      case FeatureSetId::Z2: return "z2";
      case FeatureSetId::Z3: return "z3";
      case FeatureSetId::Z4: return "z4";
    }
    return "?";
  }

  static FeatureSet parse(std::string_view name) {
    if (name == "z1" || name == "Z1") return of(FeatureSetId::Z1);
    if (name == "z2" || name == "Z2") return of(FeatureSetId::Z2);
    if (name == "z3" || name == "Z3") return of(FeatureSetId::Z3);
    if (name == "z4" || name == "Z4") return of(FeatureSetId::Z4);
    throw std::invalid_argument("unknown feature set: " + std::string(name));
  }
};

enum class Method { GmmHmm, GmmPdf };

inline std::string method_name(Method m) {
  return m == Method::GmmHmm ? "hmm" : "pdf";
}

inline Method parse_method(std::string_view name) {
  if (name == "hmm" || name == "gmm+hmm") return Method::GmmHmm;
  if (name == "pdf" || name == "gmm+pdf") return Method::GmmPdf;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Kinematic records
// ---------------------------------------------------------------------------

struct TrajectorySample {
  double t;    // s
  double x_h;  // m, host position
  double v_h;  // m/s, host speed
  double x_l;  // m, lead position
  double v_l;  // m/s, lead speed
};

/// Time-indexed host/lead states at the fixed 10 Hz rate. Host acceleration
/// and jerk are always derived downstream, never stored.
struct Trajectory {
  std::string driver_id;
  double dt = kSampleDt;
  std::vector<TrajectorySample> samples;

  void validate() const {
    if (std::abs(dt - kSampleDt) > kDtTol)
      throw std::invalid_argument("trajectory dt must be 0.1 s");
    if (samples.empty()) throw std::invalid_argument("trajectory has no samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& s = samples[k];
      if (!(std::isfinite(s.t) && std::isfinite(s.x_h) && std::isfinite(s.v_h) &&
            std::isfinite(s.x_l) && std::isfinite(s.v_l)))
        throw std::invalid_argument("trajectory sample not finite");
      if (s.v_h < 0.0 || s.v_l < 0.0)
        throw std::invalid_argument("negative speed in trajectory");
      if (!(s.x_l > s.x_h))
        throw std::invalid_argument("lead vehicle not ahead of host");
      if (k > 0 && std::abs((s.t - samples[k - 1].t) - dt) > kDtTol)
        throw std::invalid_argument("trajectory timestamps not uniformly spaced");
    }
  }
};

/// One training sample: input vector z under a chosen feature set plus the
/// host acceleration target.
struct ObservationVector {
  Eigen::VectorXd z;
  double a = 0.0;  // m/s^2
  double t = 0.0;  // s
  std::string event_id;
};

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

struct GmmParams {
  int n_components = 0;
  Eigen::VectorXd weights;                    // pi, on the simplex
  std::vector<Eigen::VectorXd> means;         // mu_i
  std::vector<Eigen::MatrixXd> covariances;   // Sigma_i, SPD
  std::optional<FeatureSet> feature_set;      // set whenever fitted on features

  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }

  void validate() const {
    if (n_components < 1) throw std::invalid_argument("gmm needs >= 1 component");
    if (weights.size() != n_components ||
        static_cast<int>(means.size()) != n_components ||
        static_cast<int>(covariances.size()) != n_components)
      throw std::invalid_argument("gmm parameter sizes inconsistent");
    if (weights.minCoeff() < 0.0)
      throw std::invalid_argument("negative mixture weight");
    if (std::abs(weights.sum() - 1.0) > kSimplexTol)
      throw std::invalid_argument("mixture weights do not sum to 1");
    const int d = dim();
    if (feature_set && feature_set->total_dim != d)
      throw std::invalid_argument("gmm dimension does not match feature set");
    for (int i = 0; i < n_components; ++i) {
      if (means[i].size() != d || covariances[i].rows() != d || covariances[i].cols() != d)
        throw std::invalid_argument("gmm component dimension mismatch");
      const double scale = std::max(1.0, covariances[i].cwiseAbs().maxCoeff());
      if ((covariances[i] - covariances[i].transpose()).cwiseAbs().maxCoeff() >
          1e-12 * scale)
        throw std::invalid_argument("covariance not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariances[i]);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("covariance not positive definite");
    }
  }
};

/// Thrown when a fit degenerates numerically. Carries the last parameters
/// that were still valid, when any exist.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
  FitError(const std::string& what, GmmParams last)
      : std::runtime_error(what), last_params(std::move(last)) {}

  std::optional<GmmParams> last_params;
};

/// GMM components promoted to HMM states: adds initial state probabilities
/// and the row-stochastic transition matrix.
struct HmmParams {
  GmmParams gmm;
  Eigen::VectorXd initial;      // Pi
  Eigen::MatrixXd transitions;  // Phi, row-stochastic

  void validate() const {
    gmm.validate();
    const int n = gmm.n_components;
    if (initial.size() != n || transitions.rows() != n || transitions.cols() != n)
      throw std::invalid_argument("hmm parameter sizes inconsistent");
    if (initial.minCoeff() < 0.0 || std::abs(initial.sum() - 1.0) > kSimplexTol)
      throw std::invalid_argument("initial probabilities not on the simplex");
    for (int i = 0; i < n; ++i) {
      if (transitions.row(i).minCoeff() < 0.0)
        throw std::invalid_argument("negative transition probability");
      if (std::abs(transitions.row(i).sum() - 1.0) > kSimplexTol)
        throw std::invalid_argument("transition row does not sum to 1");
    }
  }
};

struct AccelBounds {
  double a_min = -8.0;  // m/s^2
  double a_max = 8.0;   // m/s^2

  void validate() const {
    if (!(a_min < a_max)) throw std::invalid_argument("a_min must be < a_max");
  }
  double clamp(double a) const { return std::min(a_max, std::max(a_min, a)); }
};

// ---------------------------------------------------------------------------
// Cross-validation reporting
// ---------------------------------------------------------------------------

struct CvFold {
  int fold_index = 0;    // held-out group
  int repeat_index = 0;
  std::uint64_t seed = 0;
  double train_mae = 0.0;  // m/s^2
  double test_mae = 0.0;   // m/s^2
};

/// Per-(driver, feature set, N, method) cross-validation outcome.
struct CvReport {
  std::string driver_id;
  FeatureSetId feature_set = FeatureSetId::Z1;
  int n_components = 0;
  Method method = Method::GmmHmm;
  std::vector<CvFold> per_fold;
  double mean_train_mae = 0.0;
  double mean_test_mae = 0.0;
  std::vector<std::string> diagnostics;  // skipped folds etc.

  void recompute_means() {
    double st = 0.0, se = 0.0;
    for (const auto& f : per_fold) {
      st += f.train_mae;
      se += f.test_mae;
    }
    const double n = per_fold.empty() ? 1.0 : static_cast<double>(per_fold.size());
    mean_train_mae = st / n;
    mean_test_mae = se / n;
  }

  void validate() const {
    double st = 0.0, se = 0.0;
    for (const auto& f : per_fold) {
      if (!(f.train_mae >= 0.0) || !(f.test_mae >= 0.0))
        throw std::invalid_argument("negative MAE in report");
      st += f.train_mae;
      se += f.test_mae;
    }
    const double n = per_fold.empty() ? 1.0 : static_cast<double>(per_fold.size());
    if (std::abs(mean_train_mae - st / n) > 1e-12 ||
        std::abs(mean_test_mae - se / n) > 1e-12)
      throw std::invalid_argument("report means inconsistent with folds");
  }
};

}  // namespace cfdm
