#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfdm/rng.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

inline constexpr double kMinEventDuration = 50.0;  // s
inline constexpr double kRangeMin = 0.1;           // m
inline constexpr double kRangeMax = 120.0;         // m
inline constexpr int kDefaultSmoothWindow = 10;

/// A contiguous in-range slice of one trajectory.
struct CarFollowingEvent {
  std::string event_id;
  std::string driver_id;
  double dt = kSampleDt;
  std::vector<TrajectorySample> samples;

  /// Time span covered by the slice.
  double duration() const {
    return samples.size() < 2 ? 0.0 : samples.back().t - samples.front().t;
  }

  void validate() const {
    if (!(duration() > kMinEventDuration))
      throw std::invalid_argument("event duration must exceed 50 s");
    for (const auto& s : samples) {
      const double dx = s.x_l - s.x_h;
      if (dx < kRangeMin || dx > kRangeMax)
        throw std::invalid_argument("event range outside [0.1, 120] m");
    }
  }
};

struct GroupPartition {
  int m_groups = 0;
  std::vector<std::vector<std::string>> groups;  // event ids
};

/// Centered moving average of nominal width W, truncated at the boundaries.
/// For even W the window extends one sample further forward than backward.
inline std::vector<double> smooth_moving_average(const std::vector<double>& series,
                                                 int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (series.empty()) throw std::invalid_argument("empty series");
  const int n = static_cast<int>(series.size());
  const int back = (window - 1) / 2;
  const int fwd = window / 2;
  std::vector<double> out(series.size());
  for (int k = 0; k < n; ++k) {
    const int lo = std::max(0, k - back);
    const int hi = std::min(n - 1, k + fwd);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += series[j];
    out[k] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Maximal contiguous runs with range inside [range_min, range_max], kept
/// only when strictly longer than min_duration.
inline std::vector<CarFollowingEvent> extract_events(
    const Trajectory& traj, double min_duration = kMinEventDuration,
    double range_min = kRangeMin, double range_max = kRangeMax,
    const std::string& id_prefix = "") {
  traj.validate();
  const std::string prefix = id_prefix.empty() ? traj.driver_id : id_prefix;
  std::vector<CarFollowingEvent> events;
  const auto in_range = [&](const TrajectorySample& s) {
    const double dx = s.x_l - s.x_h;
    return dx >= range_min && dx <= range_max;
  };
  std::size_t k = 0;
  while (k < traj.samples.size()) {
    if (!in_range(traj.samples[k])) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < traj.samples.size() && in_range(traj.samples[end + 1])) ++end;
    const double span = traj.samples[end].t - traj.samples[k].t;
    if (span > min_duration) {
      CarFollowingEvent ev;
      ev.event_id = prefix + ":e" + std::to_string(events.size());
      ev.driver_id = traj.driver_id;
      ev.dt = traj.dt;
      ev.samples.assign(traj.samples.begin() + static_cast<std::ptrdiff_t>(k),
                        traj.samples.begin() + static_cast<std::ptrdiff_t>(end) + 1);
      events.push_back(std::move(ev));
    }
    k = end + 1;
  }
  return events;
}

namespace detail {

/// First derivative on a uniform grid: central differences inside,
/// one-sided at the two ends.
inline std::vector<double> differentiate(const std::vector<double>& f, double dt) {
  const int n = static_cast<int>(f.size());
  if (n < 2) throw std::invalid_argument("need >= 2 samples to differentiate");
  std::vector<double> d(f.size());
  d[0] = (f[1] - f[0]) / dt;
  for (int k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
  d[n - 1] = (f[n - 1] - f[n - 2]) / dt;
  return d;
}

}  // namespace detail

/// Smoothed channels plus finite-difference derivatives for one event.
/// Samples whose derivative estimates use one-sided differences are dropped:
/// one per side for first derivatives (a, dv-dot), two per side when jerk is
/// needed (Z4).
inline std::vector<ObservationVector> build_features(const CarFollowingEvent& event,
                                                     const FeatureSet& fs,
                                                     int smooth_window) {
  if (smooth_window < 1) throw std::invalid_argument("window must be >= 1");
  const int n = static_cast<int>(event.samples.size());
  const int drop = fs.uses(Channel::Jerk) ? 2 : 1;
  if (n < 2 * drop + 1)
    throw std::invalid_argument("event too short for required derivatives");

  std::vector<double> dx(n), dv(n), vh(n);
  for (int k = 0; k < n; ++k) {
    const auto& s = event.samples[k];
    dx[k] = s.x_l - s.x_h;
    dv[k] = s.v_l - s.v_h;
    vh[k] = s.v_h;
  }
  const std::vector<double> sdx = smooth_moving_average(dx, smooth_window);
  const std::vector<double> sdv = smooth_moving_average(dv, smooth_window);
  const std::vector<double> svh = smooth_moving_average(vh, smooth_window);
  const std::vector<double> accel = detail::differentiate(svh, event.dt);
  const std::vector<double> dvdot = detail::differentiate(sdv, event.dt);
  std::vector<double> jerk;
  if (fs.uses(Channel::Jerk)) jerk = detail::differentiate(accel, event.dt);

  std::vector<ObservationVector> out;
  out.reserve(static_cast<std::size_t>(n - 2 * drop));
  for (int k = drop; k < n - drop; ++k) {
    ObservationVector ov;
    ov.z.resize(fs.input_dim);
    int c = 0;
    for (Channel ch : fs.channels()) {
      switch (ch) {
        case Channel::Dx: ov.z(c) = sdx[k]; break;
        case Channel::Dv: ov.z(c) = sdv[k]; break;
        case Channel::Dvdot: ov.z(c) = dvdot[k]; break;
        case Channel::Jerk: ov.z(c) = jerk[k]; break;
        case Channel::Vh: ov.z(c) = svh[k]; break;
      }
      ++c;
    }
    ov.a = accel[k];
    ov.t = event.samples[k].t;
    ov.event_id = event.event_id;
    if (!ov.z.allFinite() || !std::isfinite(ov.a))
      throw std::invalid_argument("non-finite feature value");
    out.push_back(std::move(ov));
  }
  return out;
}

/// Seeded shuffle followed by a round-robin deal into m groups. Events are
/// never split; the HMM forward pass needs whole sequences.
inline GroupPartition partition_events(const std::vector<std::string>& event_ids,
                                       int m_groups, std::uint64_t seed) {
  if (m_groups < 2) throw std::invalid_argument("need at least 2 groups");
  if (event_ids.size() < 2) throw std::invalid_argument("need at least 2 events");
  std::vector<std::string> order = event_ids;
  Rng rng(seed);
  rng.shuffle(order);
  GroupPartition part;
  part.m_groups = m_groups;
  part.groups.assign(static_cast<std::size_t>(m_groups), {});
  for (std::size_t k = 0; k < order.size(); ++k)
    part.groups[k % static_cast<std::size_t>(m_groups)].push_back(std::move(order[k]));
  return part;
}

inline GroupPartition partition_events(const std::vector<CarFollowingEvent>& events,
                                       int m_groups, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(events.size());
  for (const auto& e : events) ids.push_back(e.event_id);
  return partition_events(ids, m_groups, seed);
}

}  // namespace cfdm
