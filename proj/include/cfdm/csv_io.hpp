#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfdm/json_io.hpp"
#include "cfdm/preprocess.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

inline constexpr const char* kTrajectoryHeader = "t,x_h,v_h,x_l,v_l";
inline constexpr const char* kEventsHeader = "event_id,t,dx,dv,dvdot,jerk,v_h,a";
inline constexpr const char* kReportHeader =
    "driver,feature_set,n_components,method,fold,repeat,seed,train_mae,test_mae";
inline constexpr const char* kPredictionHeader = "event_id,t,a_actual,a_pred";

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument(std::string("bad numeric field for ") + what + ": " +
                                std::string(s));
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectories: header `t,x_h,v_h,x_l,v_l`, one row per 0.1 s
// ---------------------------------------------------------------------------

inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = kTrajectoryHeader;
  out += '\n';
  for (const auto& s : traj.samples) {
    out += format_double(s.t) + "," + format_double(s.x_h) + "," +
           format_double(s.v_h) + "," + format_double(s.x_l) + "," +
           format_double(s.v_l) + "\n";
  }
  return out;
}

inline Trajectory trajectory_from_csv(const std::string& text,
                                      const std::string& driver_id) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trajectory csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader)
    throw std::invalid_argument("unexpected trajectory header: " + line);
  Trajectory traj;
  traj.driver_id = driver_id;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 5) throw std::invalid_argument("trajectory row needs 5 fields");
    traj.samples.push_back({detail::parse_double(f[0], "t"),
                            detail::parse_double(f[1], "x_h"),
                            detail::parse_double(f[2], "v_h"),
                            detail::parse_double(f[3], "x_l"),
                            detail::parse_double(f[4], "v_l")});
  }
  traj.validate();
  return traj;
}

inline void save_trajectory(const std::string& path, const Trajectory& traj) {
  write_text_file(path, trajectory_to_csv(traj));
}

inline Trajectory load_trajectory(const std::string& path, const std::string& driver_id) {
  return trajectory_from_csv(read_text_file(path), driver_id);
}

// ---------------------------------------------------------------------------
// Event feature dumps: header `event_id,t,dx,dv,dvdot,jerk,v_h,a`; channels
// outside the active feature set stay empty
// ---------------------------------------------------------------------------

inline std::string events_to_csv(
    const std::vector<std::vector<ObservationVector>>& events, const FeatureSet& fs) {
  std::string out = kEventsHeader;
  out += '\n';
  const auto& channels = fs.channels();
  for (const auto& seq : events) {
    for (const auto& ov : seq) {
      std::string cols[5];  // dx, dv, dvdot, jerk, v_h
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const double v = ov.z(static_cast<Eigen::Index>(c));
        switch (channels[c]) {
          case Channel::Dx: cols[0] = format_double(v); break;
          case Channel::Dv: cols[1] = format_double(v); break;
          case Channel::Dvdot: cols[2] = format_double(v); break;
          case Channel::Jerk: cols[3] = format_double(v); break;
          case Channel::Vh: cols[4] = format_double(v); break;
        }
      }
      out += ov.event_id + "," + format_double(ov.t) + "," + cols[0] + "," + cols[1] +
             "," + cols[2] + "," + cols[3] + "," + cols[4] + "," + format_double(ov.a) +
             "\n";
    }
  }
  return out;
}

/// Reads a feature dump back into per-event sequences. Every channel the
/// feature set needs must be present in the file.
inline std::vector<std::vector<ObservationVector>> events_from_csv(
    const std::string& text, const FeatureSet& fs) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty events csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEventsHeader)
    throw std::invalid_argument("unexpected events header: " + line);

  std::vector<std::vector<ObservationVector>> events;
  std::vector<std::string> order;
  const auto& channels = fs.channels();
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw std::invalid_argument("events row needs 8 fields");
    ObservationVector ov;
    ov.event_id = std::string(f[0]);
    ov.t = detail::parse_double(f[1], "t");
    ov.a = detail::parse_double(f[7], "a");
    ov.z.resize(fs.input_dim);
    for (std::size_t c = 0; c < channels.size(); ++c) {
      std::string_view field;
      const char* name = "";
      switch (channels[c]) {
        case Channel::Dx: field = f[2]; name = "dx"; break;
        case Channel::Dv: field = f[3]; name = "dv"; break;
        case Channel::Dvdot: field = f[4]; name = "dvdot"; break;
        case Channel::Jerk: field = f[5]; name = "jerk"; break;
        case Channel::Vh: field = f[6]; name = "v_h"; break;
      }
      if (field.empty())
        throw std::invalid_argument(std::string("events csv lacks channel ") + name +
                                    " required by feature set " + fs.name());
      ov.z(static_cast<Eigen::Index>(c)) = detail::parse_double(field, name);
    }
    if (events.empty() || order.back() != ov.event_id) {
      order.push_back(ov.event_id);
      events.emplace_back();
    }
    events.back().push_back(std::move(ov));
  }
  return events;
}

// ---------------------------------------------------------------------------
// CV reports
// ---------------------------------------------------------------------------

inline std::string reports_to_csv(const std::vector<CvReport>& reports) {
  std::string out = kReportHeader;
  out += '\n';
  for (const auto& r : reports) {
    const std::string prefix = r.driver_id + "," + FeatureSet::of(r.feature_set).name() +
                               "," + std::to_string(r.n_components) + "," +
                               method_name(r.method) + ",";
    for (const auto& f : r.per_fold) {
      out += prefix + std::to_string(f.fold_index) + "," +
             std::to_string(f.repeat_index) + "," + std::to_string(f.seed) + "," +
             format_double(f.train_mae) + "," + format_double(f.test_mae) + "\n";
    }
  }
  return out;
}

inline std::vector<CvReport> reports_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty report csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader)
    throw std::invalid_argument("unexpected report header: " + line);
  std::vector<CvReport> reports;
  const auto cell_key = [](const CvReport& r) {
    return r.driver_id + "|" + FeatureSet::of(r.feature_set).name() + "|" +
           std::to_string(r.n_components) + "|" + method_name(r.method);
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw std::invalid_argument("report row needs 9 fields");
    CvReport row;
    row.driver_id = std::string(f[0]);
    row.feature_set = FeatureSet::parse(f[1]).id;
    row.n_components = static_cast<int>(detail::parse_double(f[2], "n_components"));
    row.method = parse_method(f[3]);
    CvFold fold;
    fold.fold_index = static_cast<int>(detail::parse_double(f[4], "fold"));
    fold.repeat_index = static_cast<int>(detail::parse_double(f[5], "repeat"));
    fold.seed = static_cast<std::uint64_t>(std::stoull(std::string(f[6])));
    fold.train_mae = detail::parse_double(f[7], "train_mae");
    fold.test_mae = detail::parse_double(f[8], "test_mae");
    if (!reports.empty() && cell_key(reports.back()) == cell_key(row)) {
      reports.back().per_fold.push_back(fold);
    } else {
      row.per_fold.push_back(fold);
      reports.push_back(std::move(row));
    }
  }
  for (auto& r : reports) r.recompute_means();
  return reports;
}

inline std::string predictions_to_csv(
    const std::vector<std::vector<ObservationVector>>& events,
    const std::vector<std::vector<double>>& predictions) {
  if (events.size() != predictions.size())
    throw std::invalid_argument("prediction/event count mismatch");
  std::string out = kPredictionHeader;
  out += '\n';
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (events[e].size() != predictions[e].size())
      throw std::invalid_argument("prediction/sample count mismatch");
    for (std::size_t k = 0; k < events[e].size(); ++k) {
      out += events[e][k].event_id + "," + format_double(events[e][k].t) + "," +
             format_double(events[e][k].a) + "," + format_double(predictions[e][k]) +
             "\n";
    }
  }
  return out;
}

}  // namespace cfdm
