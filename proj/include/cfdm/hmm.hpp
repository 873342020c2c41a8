#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfdm/gaussian.hpp"
#include "cfdm/gmm.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

/// Forward-variable vector over the mixture states at one step.
struct ForwardState {
  Eigen::VectorXd alpha;  // on the probability simplex
  int t = 0;
};

/// Counters for numeric fallbacks during prediction.
struct PredictDiag {
  long underflow_fallbacks = 0;
};

inline constexpr double kTransitionSmoothing = 1e-6;

/// Transition matrix from soft counts: responsibilities of consecutive
/// frames within each sequence, accumulated and row-normalized with additive
/// smoothing. Initial probabilities are the mixture weights. Sequences with
/// fewer than two frames contribute nothing.
inline HmmParams estimate_transitions(
    const std::vector<std::vector<ObservationVector>>& sequences,
    const GmmParams& gmm) {
  gmm.validate();
  if (sequences.empty()) throw std::invalid_argument("no sequences");
  const int n = gmm.n_components;
  const int d = gmm.dim();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  bool any = false;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    any = true;
    Eigen::MatrixXd joint(static_cast<Eigen::Index>(seq.size()), d);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      if (seq[k].z.size() != d - 1)
        throw std::invalid_argument("observation dimension mismatch");
      joint.row(static_cast<Eigen::Index>(k)) << seq[k].z.transpose(), seq[k].a;
    }
    const Eigen::MatrixXd logp = detail::weighted_log_densities(joint, gmm);
    const Eigen::VectorXd lse = detail::row_log_sum_exp(logp);
    const Eigen::MatrixXd resp = (logp.colwise() - lse).array().exp();
    for (Eigen::Index k = 0; k + 1 < resp.rows(); ++k)
      counts.noalias() += resp.row(k).transpose() * resp.row(k + 1);
  }
  if (!any) throw std::invalid_argument("all sequences shorter than 2 frames");

  HmmParams hmm;
  hmm.gmm = gmm;
  hmm.initial = gmm.weights;
  counts.array() += kTransitionSmoothing;
  hmm.transitions = counts.array().colwise() / counts.rowwise().sum().array();
  return hmm;
}

/// Forward recursion plus mixture regression over one model. Cholesky
/// factors and conditional gains are precomputed once; the per-step work is
/// O(N^2 + N d^2).
class HmmPredictor {
 public:
  explicit HmmPredictor(HmmParams params)
      : params_(std::move(params)), cond_(params_.gmm) {
    params_.validate();
  }

  const HmmParams& params() const { return params_; }
  const ConditionalGaussianMixture& conditionals() const { return cond_; }

  /// alpha_i(z_1) = pi_i N(z_1; mu_i^z, Sigma_i^zz), normalized. If every
  /// density underflows, falls back to the initial distribution.
  ForwardState init(const Eigen::VectorXd& z, PredictDiag* diag = nullptr) const {
    const Eigen::VectorXd logs =
        params_.initial.array().max(1e-300).log() + cond_.log_marginals(z).array();
    return normalized(logs, 1, diag);
  }

  /// One step of the forward recursion.
  ForwardState step(const ForwardState& prev, const Eigen::VectorXd& z,
                    PredictDiag* diag = nullptr) const {
    if (prev.alpha.size() != params_.gmm.n_components)
      throw std::invalid_argument("forward state size mismatch");
    const Eigen::VectorXd mixed = params_.transitions.transpose() * prev.alpha;
    const Eigen::VectorXd logs =
        mixed.array().max(0.0).log() + cond_.log_marginals(z).array();
    return normalized(logs, prev.t + 1, diag);
  }

  /// Mixture of per-state conditional means, weighted by the forward state.
  double predict(const ForwardState& state, const Eigen::VectorXd& z) const {
    if (state.alpha.size() != params_.gmm.n_components)
      throw std::invalid_argument("forward state size mismatch");
    return state.alpha.dot(cond_.conditional_means(z));
  }

  /// Open-loop one-step prediction over a whole event: measured inputs drive
  /// the recursion, predictions never feed back.
  std::vector<double> predict_sequence(std::span<const ObservationVector> event,
                                       PredictDiag* diag = nullptr) const {
    if (event.empty()) throw std::invalid_argument("empty event");
    std::vector<double> out;
    out.reserve(event.size());
    ForwardState state = init(event[0].z, diag);
    out.push_back(predict(state, event[0].z));
    for (std::size_t k = 1; k < event.size(); ++k) {
      state = step(state, event[k].z, diag);
      out.push_back(predict(state, event[k].z));
    }
    return out;
  }

 private:
  ForwardState normalized(const Eigen::VectorXd& logs, int t, PredictDiag* diag) const {
    ForwardState s;
    s.t = t;
    const double lse = log_sum_exp(logs);
    if (!std::isfinite(lse)) {
      if (diag) ++diag->underflow_fallbacks;
      s.alpha = params_.initial;
      return s;
    }
    s.alpha = (logs.array() - lse).exp();
    s.alpha /= s.alpha.sum();
    return s;
  }

  HmmParams params_;
  ConditionalGaussianMixture cond_;
};

// Convenience forms over bare parameters; evaluation keeps a predictor.

inline ForwardState forward_init(const Eigen::VectorXd& z, const HmmParams& hmm,
                                 PredictDiag* diag = nullptr) {
  return HmmPredictor(hmm).init(z, diag);
}

inline ForwardState forward_step(const ForwardState& prev, const Eigen::VectorXd& z,
                                 const HmmParams& hmm, PredictDiag* diag = nullptr) {
  return HmmPredictor(hmm).step(prev, z, diag);
}

inline double predict_acceleration(const ForwardState& state, const Eigen::VectorXd& z,
                                   const HmmParams& hmm) {
  return HmmPredictor(hmm).predict(state, z);
}

inline std::vector<double> predict_sequence(std::span<const ObservationVector> event,
                                            const HmmParams& hmm,
                                            PredictDiag* diag = nullptr) {
  return HmmPredictor(hmm).predict_sequence(event, diag);
}

}  // namespace cfdm
