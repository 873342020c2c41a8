#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfdm/evaluate.hpp"
#include "cfdm/synth.hpp"
#include "cfdm/types.hpp"

namespace cfdm {

/// Formats a double with 17 significant digits, enough to round-trip any
/// IEEE-754 double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal streaming JSON writer with deterministic key order and explicit
/// 17-digit floats. Reading goes through nlohmann::json; writing stays here
/// so that identical inputs always produce identical bytes.
class JsonWriter {
 public:
  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    comma();
    indent();
    out_ += '"';
    escape(k);
    out_ += "\": ";
    pending_value_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return raw(format_double(v)); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(std::uint64_t v) { return raw(std::to_string(v)); }
  JsonWriter& value(bool v) { return raw(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) {
    comma();
    indent();
    out_ += '"';
    escape(v);
    out_ += '"';
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }

  template <typename Range>
  JsonWriter& number_array(const Range& values) {
    begin_array();
    for (const auto& v : values) value(static_cast<double>(v));
    return end_array();
  }

  std::string str() const { return out_ + "\n"; }

 private:
  JsonWriter& open(char c) {
    comma();
    indent();
    out_ += c;
    depth_++;
    first_ = true;
    return *this;
  }
  JsonWriter& close(char c) {
    depth_--;
    if (!first_) {
      out_ += '\n';
      out_.append(static_cast<std::size_t>(2 * depth_), ' ');
    }
    out_ += c;
    first_ = false;
    return *this;
  }
  JsonWriter& raw(const std::string& s) {
    comma();
    indent();
    out_ += s;
    return *this;
  }
  void comma() {
    if (pending_value_) return;
    if (!first_) out_ += ',';
    first_ = false;
  }
  void indent() {
    if (pending_value_) {
      pending_value_ = false;
      first_ = false;
      return;
    }
    if (depth_ > 0) {
      out_ += '\n';
      out_.append(static_cast<std::size_t>(2 * depth_), ' ');
    }
  }
  void escape(const std::string& s) {
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        default: out_ += c;
      }
    }
  }

  std::string out_;
  int depth_ = 0;
  bool first_ = true;
  bool pending_value_ = false;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write " + path);
  f << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Model persistence: one JSON document per fitted model
// ---------------------------------------------------------------------------

struct StoredModel {
  Method method = Method::GmmHmm;
  GmmParams gmm;  // feature_set always present
  std::optional<Eigen::VectorXd> initial;      // GMM+HMM only
  std::optional<Eigen::MatrixXd> transitions;  // GMM+HMM only
  AccelBounds bounds;

  HmmParams hmm() const {
    if (!initial || !transitions)
      throw std::invalid_argument("model has no HMM parameters");
    return HmmParams{gmm, *initial, *transitions};
  }
};

inline std::string model_to_json(const StoredModel& model) {
  if (!model.gmm.feature_set)
    throw std::invalid_argument("model must carry its feature set");
  model.gmm.validate();
  JsonWriter w;
  w.begin_object();
  w.key("method").value(method_name(model.method));
  w.key("feature_set").value(model.gmm.feature_set->name());
  w.key("gmm").begin_object();
  w.key("n_components").value(model.gmm.n_components);
  w.key("dim").value(model.gmm.dim());
  w.key("weights").number_array(model.gmm.weights);
  w.key("means").begin_array();
  for (const auto& mu : model.gmm.means) w.number_array(mu);
  w.end_array();
  w.key("covariances").begin_array();
  for (const auto& cov : model.gmm.covariances) {
    // row-major flattening
    w.begin_array();
    for (Eigen::Index r = 0; r < cov.rows(); ++r)
      for (Eigen::Index c = 0; c < cov.cols(); ++c) w.value(cov(r, c));
    w.end_array();
  }
  w.end_array();
  w.end_object();
  if (model.method == Method::GmmHmm) {
    if (!model.initial || !model.transitions)
      throw std::invalid_argument("hmm model missing initial/transition parameters");
    w.key("initial").number_array(*model.initial);
    w.key("transitions").begin_array();
    for (Eigen::Index r = 0; r < model.transitions->rows(); ++r)
      w.number_array(model.transitions->row(r));
    w.end_array();
  }
  w.key("bounds").begin_object();
  w.key("a_min").value(model.bounds.a_min);
  w.key("a_max").value(model.bounds.a_max);
  w.end_object();
  w.end_object();
  return w.str();
}

inline StoredModel model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  StoredModel model;
  model.method = parse_method(j.at("method").get<std::string>());
  const FeatureSet fs = FeatureSet::parse(j.at("feature_set").get<std::string>());
  const auto& jg = j.at("gmm");
  model.gmm.n_components = jg.at("n_components").get<int>();
  const int d = jg.at("dim").get<int>();
  const auto weights = jg.at("weights").get<std::vector<double>>();
  model.gmm.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                        static_cast<Eigen::Index>(weights.size()));
  for (const auto& jm : jg.at("means")) {
    const auto v = jm.get<std::vector<double>>();
    model.gmm.means.emplace_back(
        Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  for (const auto& jc : jg.at("covariances")) {
    const auto v = jc.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != d * d)
      throw std::invalid_argument("covariance size mismatch in model file");
    Eigen::MatrixXd cov(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) cov(r, c) = v[static_cast<std::size_t>(r * d + c)];
    model.gmm.covariances.push_back(std::move(cov));
  }
  model.gmm.feature_set = fs;
  if (model.method == Method::GmmHmm) {
    const auto init = j.at("initial").get<std::vector<double>>();
    model.initial = Eigen::Map<const Eigen::VectorXd>(init.data(),
                                                      static_cast<Eigen::Index>(init.size()));
    const auto& jt = j.at("transitions");
    Eigen::MatrixXd phi(model.gmm.n_components, model.gmm.n_components);
    int r = 0;
    for (const auto& jrow : jt) {
      const auto row = jrow.get<std::vector<double>>();
      for (int c = 0; c < model.gmm.n_components; ++c)
        phi(r, c) = row[static_cast<std::size_t>(c)];
      ++r;
    }
    model.transitions = std::move(phi);
  }
  if (j.contains("bounds")) {
    model.bounds.a_min = j.at("bounds").at("a_min").get<double>();
    model.bounds.a_max = j.at("bounds").at("a_max").get<double>();
  }
  model.gmm.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

struct ManifestDriver {
  std::string id;
  IdmParams idm;
  std::vector<std::string> trajectory_files;  // relative to the corpus root
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  double noise_std = 0.0;
  std::vector<ManifestDriver> drivers;
};

inline std::string manifest_to_json(const CorpusManifest& m) {
  JsonWriter w;
  w.begin_object();
  w.key("seed").value(m.seed);
  w.key("dt").value(kSampleDt);
  w.key("noise_std").value(m.noise_std);
  w.key("drivers").begin_array();
  for (const auto& d : m.drivers) {
    w.begin_object();
    w.key("id").value(d.id);
    w.key("idm").begin_object();
    w.key("v0").value(d.idm.v0);
    w.key("T").value(d.idm.T);
    w.key("a_max").value(d.idm.a_max);
    w.key("b").value(d.idm.b);
    w.key("s0").value(d.idm.s0);
    w.key("delta").value(d.idm.delta);
    w.key("accel_noise_std").value(d.idm.accel_noise_std);
    w.end_object();
    w.key("trajectories").begin_array();
    for (const auto& f : d.trajectory_files) w.value(f);
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

inline CorpusManifest manifest_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  CorpusManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.noise_std = j.value("noise_std", 0.0);
  for (const auto& jd : j.at("drivers")) {
    ManifestDriver d;
    d.id = jd.at("id").get<std::string>();
    const auto& ji = jd.at("idm");
    d.idm.v0 = ji.at("v0").get<double>();
    d.idm.T = ji.at("T").get<double>();
    d.idm.a_max = ji.at("a_max").get<double>();
    d.idm.b = ji.at("b").get<double>();
    d.idm.s0 = ji.at("s0").get<double>();
    d.idm.delta = ji.at("delta").get<double>();
    d.idm.accel_noise_std = ji.at("accel_noise_std").get<double>();
    for (const auto& jf : jd.at("trajectories"))
      d.trajectory_files.push_back(jf.get<std::string>());
    m.drivers.push_back(std::move(d));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sweep summary and comparison documents
// ---------------------------------------------------------------------------

inline void write_config_json(JsonWriter& w, const SweepConfig& cfg) {
  w.begin_object();
  w.key("feature_sets").begin_array();
  for (FeatureSetId fs : cfg.feature_sets) w.value(FeatureSet::of(fs).name());
  w.end_array();
  w.key("component_counts").begin_array();
  for (int n : cfg.component_counts) w.value(n);
  w.end_array();
  w.key("methods").begin_array();
  for (Method m : cfg.methods) w.value(method_name(m));
  w.end_array();
  w.key("m_groups").value(cfg.m_groups);
  w.key("repeats").value(cfg.repeats);
  w.key("base_seed").value(cfg.base_seed);
  w.key("smooth_window").value(cfg.smooth_window);
  w.key("full_rotation").value(cfg.full_rotation);
  w.key("em").begin_object();
  w.key("max_iter").value(cfg.em.max_iter);
  w.key("rel_tol").value(cfg.em.rel_tol);
  if (cfg.em.cov_reg)
    w.key("cov_reg").value(*cfg.em.cov_reg);
  w.end_object();
  w.key("bounds").begin_object();
  w.key("a_min").value(cfg.bounds.a_min);
  w.key("a_max").value(cfg.bounds.a_max);
  w.end_object();
  w.end_object();
}

inline void write_comparison_json(JsonWriter& w, const ComparisonSummary& s) {
  w.begin_object();
  w.key("mean_improvement").value(s.mean_improvement);
  w.key("median_improvement").value(s.median_improvement);
  w.key("best").begin_object();
  w.key("hmm").begin_object();
  w.key("feature_set").value(FeatureSet::of(s.best_hmm.feature_set).name());
  w.key("n_components").value(s.best_hmm.n_components);
  w.key("mean_test_mae").value(s.best_hmm.mean_test_mae);
  w.end_object();
  w.key("pdf").begin_object();
  w.key("feature_set").value(FeatureSet::of(s.best_pdf.feature_set).name());
  w.key("n_components").value(s.best_pdf.n_components);
  w.key("mean_test_mae").value(s.best_pdf.mean_test_mae);
  w.end_object();
  w.end_object();
  w.key("cells").begin_array();
  for (const auto& c : s.cells) {
    w.begin_object();
    w.key("driver").value(c.driver_id);
    w.key("feature_set").value(FeatureSet::of(c.feature_set).name());
    w.key("n_components").value(c.n_components);
    w.key("hmm_test_mae").value(c.hmm_test_mae);
    w.key("pdf_test_mae").value(c.pdf_test_mae);
    w.key("improvement").value(c.improvement);
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

/// Per-cell means plus the optional method comparison, with the effective
/// configuration echoed for provenance.
inline std::string summary_to_json(const SweepResult& result, const SweepConfig& cfg) {
  JsonWriter w;
  w.begin_object();
  w.key("config");
  write_config_json(w, cfg);
  w.key("cells").begin_array();
  for (const auto& r : result.reports) {
    w.begin_object();
    w.key("driver").value(r.driver_id);
    w.key("feature_set").value(FeatureSet::of(r.feature_set).name());
    w.key("n_components").value(r.n_components);
    w.key("method").value(method_name(r.method));
    w.key("folds").value(static_cast<int>(r.per_fold.size()));
    w.key("mean_train_mae").value(r.mean_train_mae);
    w.key("mean_test_mae").value(r.mean_test_mae);
    if (!r.diagnostics.empty()) {
      w.key("diagnostics").begin_array();
      for (const auto& d : r.diagnostics) w.value(d);
      w.end_array();
    }
    w.end_object();
  }
  w.end_array();
  if (!result.failed_cells.empty()) {
    w.key("failed_cells").begin_array();
    for (const auto& f : result.failed_cells) w.value(f);
    w.end_array();
  }
  bool has_hmm = false, has_pdf = false;
  for (const auto& r : result.reports) {
    has_hmm |= r.method == Method::GmmHmm;
    has_pdf |= r.method == Method::GmmPdf;
  }
  if (has_hmm && has_pdf && result.failed_cells.empty()) {
    w.key("comparison");
    write_comparison_json(w, compare_methods(result.reports));
  }
  w.end_object();
  return w.str();
}

inline std::string comparison_to_json(const ComparisonSummary& s) {
  JsonWriter w;
  write_comparison_json(w, s);
  return w.str();
}

}  // namespace cfdm
