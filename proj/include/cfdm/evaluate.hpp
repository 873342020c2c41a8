#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cfdm/gmm.hpp"
#include "cfdm/hmm.hpp"
#include "cfdm/pdf.hpp"
#include "cfdm/preprocess.hpp"
#include "cfdm/rng.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

/// Grid and protocol settings for the cross-validation experiments.
struct SweepConfig {
  std::vector<FeatureSetId> feature_sets{FeatureSetId::Z1, FeatureSetId::Z2,
                                         FeatureSetId::Z3, FeatureSetId::Z4};
  std::vector<int> component_counts{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 15, 20, 25};
  std::vector<Method> methods{Method::GmmHmm, Method::GmmPdf};
  int m_groups = 20;
  int repeats = 10;
  std::uint64_t base_seed = 0;
  EmConfig em;
  AccelBounds bounds;
  int smooth_window = kDefaultSmoothWindow;
  bool full_rotation = false;  // hold out every group instead of one per repeat
  int jobs = 1;

  void validate() const {
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (component_counts.empty())
      throw std::invalid_argument("component_counts must be non-empty");
    if (feature_sets.empty()) throw std::invalid_argument("feature_sets must be non-empty");
    if (methods.empty()) throw std::invalid_argument("methods must be non-empty");
    if (m_groups < 2) throw std::invalid_argument("m_groups must be >= 2");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    em.validate();
    bounds.validate();
  }
};

/// Discrete form of the time-averaged absolute error: with a uniform step
/// the dt cancels, leaving the arithmetic mean.
inline double mean_abs_error(std::span<const double> predicted,
                             std::span<const double> actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("series length mismatch");
  if (predicted.empty()) throw std::invalid_argument("empty series");
  double sum = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k)
    sum += std::abs(predicted[k] - actual[k]);
  return sum / static_cast<double>(predicted.size());
}

namespace detail {

inline std::uint64_t fold_seed(std::uint64_t base_seed, const std::string& driver,
                               FeatureSetId fs, int n, Method method, int repeat) {
  const std::string tag = driver + "|" + FeatureSet::of(fs).name() + "|" +
                          std::to_string(n) + "|" + method_name(method) + "|r" +
                          std::to_string(repeat);
  return derive_seed(base_seed, tag);
}

/// Pooled MAE of a model over a set of feature sequences.
template <typename PredictFn>
double pooled_mae(const std::vector<const std::vector<ObservationVector>*>& sequences,
                  PredictFn&& predict) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto* seq : sequences) {
    const std::vector<double> pred = predict(*seq);
    for (std::size_t k = 0; k < seq->size(); ++k) {
      sum += std::abs(pred[k] - (*seq)[k].a);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("no samples to score");
  return sum / static_cast<double>(count);
}

}  // namespace detail

/// Cross-validation core over pre-built per-event feature sequences.
/// Each repeat derives its own seed, repartitions the events, holds one group
/// out (or rotates through all of them), fits, and scores train/test MAE.
inline CvReport run_cv_features(
    const std::string& driver_id,
    const std::vector<std::vector<ObservationVector>>& event_features,
    const SweepConfig& cfg, FeatureSetId fs_id, int n_components, Method method) {
  cfg.validate();
  if (event_features.size() < 2) throw std::invalid_argument("need at least 2 events");
  const FeatureSet fs = FeatureSet::of(fs_id);

  CvReport report;
  report.driver_id = driver_id;
  report.feature_set = fs_id;
  report.n_components = n_components;
  report.method = method;

  std::vector<std::string> ids;
  std::map<std::string, const std::vector<ObservationVector>*> by_id;
  for (const auto& seq : event_features) {
    if (seq.empty()) throw std::invalid_argument("empty event feature sequence");
    ids.push_back(seq.front().event_id);
    by_id[seq.front().event_id] = &seq;
  }

  const int n_nonempty_groups =
      std::min<int>(cfg.m_groups, static_cast<int>(ids.size()));
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed =
        detail::fold_seed(cfg.base_seed, driver_id, fs_id, n_components, method, r);
    const GroupPartition part = partition_events(ids, cfg.m_groups, seed);
    std::vector<int> holdouts;
    if (cfg.full_rotation) {
      holdouts.resize(static_cast<std::size_t>(n_nonempty_groups));
      std::iota(holdouts.begin(), holdouts.end(), 0);
    } else {
      Rng pick(derive_seed(seed, 0x686f6c64u));  // "hold"
      holdouts.push_back(static_cast<int>(pick.below(
          static_cast<std::uint64_t>(n_nonempty_groups))));
    }

    for (int holdout : holdouts) {
      std::vector<const std::vector<ObservationVector>*> train, test;
      for (int g = 0; g < cfg.m_groups; ++g)
        for (const auto& id : part.groups[static_cast<std::size_t>(g)])
          (g == holdout ? test : train).push_back(by_id.at(id));

      std::size_t n_train = 0;
      for (const auto* seq : train) n_train += seq->size();
      if (n_train <= static_cast<std::size_t>(n_components) || test.empty()) {
        report.diagnostics.push_back("skipped repeat " + std::to_string(r) +
                                     " fold " + std::to_string(holdout) +
                                     ": training set too small");
        continue;
      }

      Eigen::MatrixXd joint(static_cast<Eigen::Index>(n_train), fs.total_dim);
      Eigen::Index row = 0;
      for (const auto* seq : train)
        for (const auto& ov : *seq)
          joint.row(row++) << ov.z.transpose(), ov.a;

      try {
        GmmParams init =
            kmeans_init(joint, n_components, derive_seed(seed, 0x6b6d6561u),
                        effective_cov_reg(joint, cfg.em));
        init.feature_set = fs;
        GmmParams gmm = em_fit(joint, init, cfg.em).params;

        CvFold fold;
        fold.fold_index = holdout;
        fold.repeat_index = r;
        fold.seed = seed;
        if (method == Method::GmmHmm) {
          std::vector<std::vector<ObservationVector>> train_seqs;
          train_seqs.reserve(train.size());
          for (const auto* seq : train) train_seqs.push_back(*seq);
          const HmmPredictor predictor(estimate_transitions(train_seqs, gmm));
          const auto score = [&](const std::vector<ObservationVector>& seq) {
            return predictor.predict_sequence(seq);
          };
          fold.train_mae = detail::pooled_mae(train, score);
          fold.test_mae = detail::pooled_mae(test, score);
        } else {
          const PdfPredictor predictor(gmm, cfg.bounds);
          const auto score = [&](const std::vector<ObservationVector>& seq) {
            return predictor.predict_sequence(seq);
          };
          fold.train_mae = detail::pooled_mae(train, score);
          fold.test_mae = detail::pooled_mae(test, score);
        }
        report.per_fold.push_back(fold);
      } catch (const std::exception& e) {
        report.diagnostics.push_back("skipped repeat " + std::to_string(r) +
                                     " fold " + std::to_string(holdout) + ": " +
                                     e.what());
      }
    }
  }
  if (report.per_fold.empty())
    throw std::invalid_argument("all folds skipped for driver " + driver_id);
  report.recompute_means();
  return report;
}

/// Feature building plus the CV core.
inline CvReport run_cv(const std::string& driver_id,
                       const std::vector<CarFollowingEvent>& events,
                       const SweepConfig& cfg, FeatureSetId fs_id, int n_components,
                       Method method) {
  if (events.size() < 2) throw std::invalid_argument("need at least 2 events");
  std::vector<std::vector<ObservationVector>> features;
  features.reserve(events.size());
  for (const auto& ev : events)
    features.push_back(build_features(ev, FeatureSet::of(fs_id), cfg.smooth_window));
  return run_cv_features(driver_id, features, cfg, fs_id, n_components, method);
}

struct DriverData {
  std::string driver_id;
  std::vector<CarFollowingEvent> events;
};

struct SweepResult {
  std::vector<CvReport> reports;           // one per completed cell, grid order
  std::vector<std::string> failed_cells;   // cell tag + reason
};

/// Cartesian product over drivers x feature sets x component counts x
/// methods. Cells are independently seeded, so the worker count cannot
/// change any result; output order is the grid order.
inline SweepResult sweep(const std::vector<DriverData>& drivers, const SweepConfig& cfg) {
  cfg.validate();
  struct Cell {
    const DriverData* driver;
    FeatureSetId fs;
    int n;
    Method method;
  };
  std::vector<Cell> cells;
  for (const auto& d : drivers)
    for (FeatureSetId fs : cfg.feature_sets)
      for (int n : cfg.component_counts)
        for (Method m : cfg.methods) cells.push_back({&d, fs, n, m});

  // features are shared read-only across cells; build them once per
  // (driver, feature set)
  std::map<std::pair<const DriverData*, FeatureSetId>,
           std::vector<std::vector<ObservationVector>>>
      feature_cache;
  for (const auto& d : drivers)
    for (FeatureSetId fs : cfg.feature_sets) {
      auto& slot = feature_cache[{&d, fs}];
      slot.reserve(d.events.size());
      for (const auto& ev : d.events)
        slot.push_back(build_features(ev, FeatureSet::of(fs), cfg.smooth_window));
    }

  std::vector<std::optional<CvReport>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      const Cell& c = cells[k];
      try {
        results[k] = run_cv_features(c.driver->driver_id,
                                     feature_cache.at({c.driver, c.fs}), cfg, c.fs,
                                     c.n, c.method);
      } catch (const std::exception& e) {
        failures[k] = c.driver->driver_id + "|" + FeatureSet::of(c.fs).name() + "|" +
                      std::to_string(c.n) + "|" + method_name(c.method) + ": " +
                      e.what();
      }
    }
  };
  if (cfg.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < cfg.jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepResult out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (results[k])
      out.reports.push_back(std::move(*results[k]));
    else
      out.failed_cells.push_back(failures[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

struct CellComparison {
  std::string driver_id;
  FeatureSetId feature_set;
  int n_components;
  double hmm_test_mae;
  double pdf_test_mae;
  double improvement;  // (pdf - hmm) / pdf
};

struct BestCell {
  FeatureSetId feature_set = FeatureSetId::Z1;
  int n_components = 0;
  double mean_test_mae = 0.0;
};

struct ComparisonSummary {
  std::vector<CellComparison> cells;
  double mean_improvement = 0.0;
  double median_improvement = 0.0;
  BestCell best_hmm;
  BestCell best_pdf;
};

/// Relative improvement of GMM+HMM over GMM+PDF per (driver, feature set, N)
/// cell, plus the best-performing cell per method aggregated over drivers.
inline ComparisonSummary compare_methods(const std::vector<CvReport>& reports) {
  std::map<std::tuple<std::string, FeatureSetId, int>, std::pair<const CvReport*, const CvReport*>>
      cells;
  for (const auto& r : reports) {
    auto& slot = cells[{r.driver_id, r.feature_set, r.n_components}];
    (r.method == Method::GmmHmm ? slot.first : slot.second) = &r;
  }
  ComparisonSummary summary;
  std::map<std::pair<FeatureSetId, int>, std::pair<double, int>> hmm_agg, pdf_agg;
  for (const auto& [key, pair] : cells) {
    if (!pair.first || !pair.second)
      throw std::invalid_argument("methods do not cover identical cells");
    CellComparison c;
    c.driver_id = std::get<0>(key);
    c.feature_set = std::get<1>(key);
    c.n_components = std::get<2>(key);
    c.hmm_test_mae = pair.first->mean_test_mae;
    c.pdf_test_mae = pair.second->mean_test_mae;
    c.improvement =
        c.pdf_test_mae == 0.0 ? 0.0 : (c.pdf_test_mae - c.hmm_test_mae) / c.pdf_test_mae;
    summary.cells.push_back(c);
    auto& h = hmm_agg[{c.feature_set, c.n_components}];
    h.first += c.hmm_test_mae;
    h.second += 1;
    auto& p = pdf_agg[{c.feature_set, c.n_components}];
    p.first += c.pdf_test_mae;
    p.second += 1;
  }
  if (summary.cells.empty()) throw std::invalid_argument("no comparable cells");

  std::vector<double> improvements;
  for (const auto& c : summary.cells) improvements.push_back(c.improvement);
  summary.mean_improvement =
      std::accumulate(improvements.begin(), improvements.end(), 0.0) /
      static_cast<double>(improvements.size());
  std::sort(improvements.begin(), improvements.end());
  const std::size_t mid = improvements.size() / 2;
  summary.median_improvement = improvements.size() % 2 == 1
                                   ? improvements[mid]
                                   : 0.5 * (improvements[mid - 1] + improvements[mid]);

  const auto pick_best = [](const auto& agg) {
    BestCell best;
    double best_mae = std::numeric_limits<double>::infinity();
    for (const auto& [key, acc] : agg) {
      const double mae = acc.first / acc.second;
      if (mae < best_mae) {
        best_mae = mae;
        best = {key.first, key.second, mae};
      }
    }
    return best;
  };
  summary.best_hmm = pick_best(hmm_agg);
  summary.best_pdf = pick_best(pdf_agg);
  return summary;
}

/// Spearman rank correlation; average ranks on ties.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("need two equal-length series");
  const auto ranks = [](std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    std::size_t k = 0;
    while (k < n) {
      std::size_t j = k;
      while (j + 1 < n && v[order[j + 1]] == v[order[k]]) ++j;
      const double mean_rank = 0.5 * static_cast<double>(k + j) + 1.0;
      for (std::size_t i = k; i <= j; ++i) rank[order[i]] = mean_rank;
      k = j + 1;
    }
    return rank;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cfdm
