#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfdm/rng.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

/// Intelligent-driver-model parameters for one synthetic driver. Distinct
/// parameter sets are the personalization ground truth.
struct IdmParams {
  double v0 = 30.0;    // desired speed, m/s
  double T = 1.5;      // time headway, s
  double a_max = 1.5;  // max acceleration, m/s^2
  double b = 2.0;      // comfortable deceleration, m/s^2
  double s0 = 2.0;     // jam distance, m
  double delta = 4.0;  // free-flow exponent
  double accel_noise_std = 0.0;  // m/s^2

  void validate() const {
    if (!(v0 > 0 && T > 0 && a_max > 0 && b > 0 && s0 > 0 && delta > 0))
      throw std::invalid_argument("idm parameters must be positive");
    if (accel_noise_std < 0)
      throw std::invalid_argument("accel_noise_std must be >= 0");
  }
};

/// IDM acceleration. dv = v_l - v_h, so a positive closing speed (host
/// faster than lead) increases the desired gap. Clamped to +-8 m/s^2.
inline double idm_accel(double v_h, double dv, double gap, const IdmParams& p) {
  if (!(gap > 0.0)) throw std::invalid_argument("collision: gap <= 0");
  const double s_star =
      std::max(0.0, p.s0 + v_h * p.T - v_h * dv / (2.0 * std::sqrt(p.a_max * p.b)));
  const double a =
      p.a_max * (1.0 - std::pow(v_h / p.v0, p.delta) - (s_star / gap) * (s_star / gap));
  return std::clamp(a, -8.0, 8.0);
}

/// Steady-following gap at speed v (closed form from a = 0).
inline double idm_equilibrium_gap(double v, const IdmParams& p) {
  const double free_term = 1.0 - std::pow(v / p.v0, p.delta);
  if (!(free_term > 0.0))
    throw std::invalid_argument("no equilibrium at or above the desired speed");
  return (p.s0 + v * p.T) / std::sqrt(free_term);
}

/// Piecewise-linear lead speed schedule; constant after the last knot.
struct LeadProfile {
  std::vector<std::pair<double, double>> knots;  // (t, v), t increasing

  double duration() const { return knots.empty() ? 0.0 : knots.back().first; }

  double speed_at(double t) const {
    if (knots.empty()) throw std::invalid_argument("empty lead profile");
    if (t <= knots.front().first) return knots.front().second;
    for (std::size_t k = 1; k < knots.size(); ++k) {
      if (t <= knots[k].first) {
        const auto& [t0, v0] = knots[k - 1];
        const auto& [t1, v1] = knots[k];
        const double w = (t - t0) / (t1 - t0);
        return v0 + w * (v1 - v0);
      }
    }
    return knots.back().second;
  }
};

namespace detail {

inline Trajectory simulate_episode(const std::string& driver_id,
                                   const LeadProfile& lead, const IdmParams& p,
                                   double initial_gap, Rng& noise) {
  const double dt = kSampleDt;
  const int n = static_cast<int>(std::floor(lead.duration() / dt + 1e-9)) + 1;
  Trajectory traj;
  traj.driver_id = driver_id;
  traj.samples.reserve(static_cast<std::size_t>(n));

  double x_h = 0.0;
  double v_h = lead.speed_at(0.0);
  double x_l = initial_gap;
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const double v_l = lead.speed_at(t);
    const double gap = x_l - x_h;
    if (!(gap > 0.0)) throw std::invalid_argument("collision: gap <= 0");
    traj.samples.push_back({t, x_h, v_h, x_l, v_l});
    double a = idm_accel(v_h, v_l - v_h, gap, p);
    if (p.accel_noise_std > 0.0) a += noise.normal(0.0, p.accel_noise_std);
    a = std::clamp(a, -8.0, 8.0);
    x_h += v_h * dt;
    x_l += v_l * dt;
    v_h = std::max(0.0, v_h + a * dt);
  }
  return traj;
}

}  // namespace detail

/// Euler-integrated followers behind scripted leads, one trajectory per
/// (driver, episode). lead_profiles holds one profile per episode, laid out
/// driver-major (n_drivers * events_per_driver entries). A collision aborts
/// the episode and retries with a wider initial gap.
inline std::vector<Trajectory> generate_corpus(
    int n_drivers, int events_per_driver, const std::vector<LeadProfile>& lead_profiles,
    const std::vector<IdmParams>& params_per_driver, std::uint64_t seed) {
  if (n_drivers < 1 || events_per_driver < 1)
    throw std::invalid_argument("need at least one driver and one event");
  if (static_cast<int>(params_per_driver.size()) != n_drivers)
    throw std::invalid_argument("one IdmParams per driver required");
  if (static_cast<int>(lead_profiles.size()) !=
      n_drivers * events_per_driver)
    throw std::invalid_argument("one lead profile per (driver, event) required");

  std::vector<Trajectory> corpus;
  corpus.reserve(lead_profiles.size());
  for (int d = 0; d < n_drivers; ++d) {
    const IdmParams& p = params_per_driver[static_cast<std::size_t>(d)];
    p.validate();
    char name[32];
    std::snprintf(name, sizeof name, "driver%02d", d);
    for (int e = 0; e < events_per_driver; ++e) {
      const auto& lead = lead_profiles[static_cast<std::size_t>(d * events_per_driver + e)];
      const double v_start = lead.speed_at(0.0);
      double gap0 = idm_equilibrium_gap(v_start, p);
      const std::uint64_t ep_seed =
          derive_seed(seed, static_cast<std::uint64_t>(d) * 100003u +
                                static_cast<std::uint64_t>(e));
      bool done = false;
      for (int attempt = 0; attempt < 20 && !done; ++attempt) {
        Rng noise(derive_seed(ep_seed, static_cast<std::uint64_t>(attempt)));
        try {
          corpus.push_back(detail::simulate_episode(name, lead, p, gap0, noise));
          done = true;
        } catch (const std::invalid_argument&) {
          gap0 *= 1.5;  // collided; restart farther back
        }
      }
      if (!done)
        throw std::runtime_error("episode generation kept colliding; profile too aggressive");
    }
  }
  return corpus;
}

}  // namespace cfdm
