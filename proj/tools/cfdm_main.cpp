// Command-line front end: generate synthetic corpora, extract car-following
// events, fit and apply the two regression methods, and run the
// cross-validation sweep experiments.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfdm/cfdm.hpp"

namespace fs = std::filesystem;
using namespace cfdm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitFitFailure = 2;

struct CommonFlags {
  std::string input;
  std::string output;
  std::string feature_set = "z2";
  int components = 5;
  std::string method = "hmm";
  int m_groups = 20;
  int repeats = 10;
  std::uint64_t seed = 0;
  double a_min = -8.0;
  double a_max = 8.0;
  int window = kDefaultSmoothWindow;
  int jobs = 1;
};

LeadProfile random_lead_profile(Rng& rng, double duration) {
  LeadProfile lead;
  const int n_knots = 4 + static_cast<int>(rng.below(4));
  double v = rng.uniform(8.0, 16.0);
  lead.knots.emplace_back(0.0, v);
  for (int k = 1; k < n_knots; ++k) {
    const double t = duration * static_cast<double>(k) / (n_knots - 1);
    v = std::clamp(v + rng.uniform(-4.0, 4.0), 6.0, 19.0);
    lead.knots.emplace_back(t, v);
  }
  return lead;
}

IdmParams random_driver_params(Rng& rng, double noise_std) {
  IdmParams p;
  p.v0 = rng.uniform(24.0, 33.0);
  p.T = rng.uniform(1.0, 2.2);
  p.a_max = rng.uniform(0.9, 1.8);
  p.b = rng.uniform(1.2, 2.5);
  p.s0 = rng.uniform(1.5, 3.0);
  p.delta = 4.0;
  p.accel_noise_std = noise_std;
  return p;
}

int cmd_generate(const std::string& output, int n_drivers, int events_per_driver,
                 double event_duration, double noise_std, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "corpus"));
  std::vector<IdmParams> params;
  std::vector<LeadProfile> leads;
  for (int d = 0; d < n_drivers; ++d) {
    params.push_back(random_driver_params(rng, noise_std));
    for (int e = 0; e < events_per_driver; ++e)
      leads.push_back(random_lead_profile(rng, event_duration));
  }
  const std::vector<Trajectory> corpus =
      generate_corpus(n_drivers, events_per_driver, leads, params, seed);

  fs::create_directories(output);
  CorpusManifest manifest;
  manifest.seed = seed;
  manifest.noise_std = noise_std;
  for (int d = 0; d < n_drivers; ++d) {
    ManifestDriver md;
    md.id = corpus[static_cast<std::size_t>(d * events_per_driver)].driver_id;
    md.idm = params[static_cast<std::size_t>(d)];
    fs::create_directories(fs::path(output) / md.id);
    for (int e = 0; e < events_per_driver; ++e) {
      char name[32];
      std::snprintf(name, sizeof name, "ep%03d.csv", e);
      const std::string rel = md.id + "/" + name;
      save_trajectory((fs::path(output) / rel).string(),
                      corpus[static_cast<std::size_t>(d * events_per_driver + e)]);
      md.trajectory_files.push_back(rel);
    }
    manifest.drivers.push_back(std::move(md));
  }
  write_text_file((fs::path(output) / "manifest.json").string(),
                  manifest_to_json(manifest));
  std::cout << "wrote " << corpus.size() << " trajectories for " << n_drivers
            << " drivers under " << output << "\n";
  return kExitOk;
}

std::vector<CarFollowingEvent> events_from_trajectory_files(
    const std::vector<std::string>& files, const std::string& driver,
    double min_duration, double range_min, double range_max) {
  std::vector<CarFollowingEvent> events;
  for (const auto& file : files) {
    const std::string stem = fs::path(file).stem().string();
    const std::string driver_id = driver.empty() ? stem : driver;
    const Trajectory traj = load_trajectory(file, driver_id);
    auto evs = extract_events(traj, min_duration, range_min, range_max,
                              driver_id + "/" + stem);
    for (auto& e : evs) events.push_back(std::move(e));
  }
  return events;
}

int cmd_extract(const CommonFlags& flags, double min_duration, double range_min,
                double range_max, const std::string& driver) {
  const FeatureSet fset = FeatureSet::parse(flags.feature_set);
  std::vector<std::string> files;
  if (fs::is_directory(flags.input)) {
    for (const auto& entry : fs::recursive_directory_iterator(flags.input))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(flags.input);
  }
  const auto events =
      events_from_trajectory_files(files, driver, min_duration, range_min, range_max);
  std::vector<std::vector<ObservationVector>> features;
  for (const auto& ev : events)
    features.push_back(build_features(ev, fset, flags.window));
  write_text_file(flags.output, events_to_csv(features, fset));
  std::cout << "extracted " << events.size() << " events -> " << flags.output << "\n";
  return kExitOk;
}

int cmd_fit(const CommonFlags& flags) {
  const FeatureSet fset = FeatureSet::parse(flags.feature_set);
  const Method method = parse_method(flags.method);
  const auto events = events_from_csv(read_text_file(flags.input), fset);
  if (events.empty()) throw std::invalid_argument("no events in " + flags.input);

  std::size_t n_samples = 0;
  for (const auto& seq : events) n_samples += seq.size();
  Eigen::MatrixXd joint(static_cast<Eigen::Index>(n_samples), fset.total_dim);
  Eigen::Index row = 0;
  for (const auto& seq : events)
    for (const auto& ov : seq) joint.row(row++) << ov.z.transpose(), ov.a;

  EmConfig em;
  em.seed = flags.seed;
  GmmParams init = kmeans_init(joint, flags.components, derive_seed(flags.seed, "kmeans"),
                               effective_cov_reg(joint, em));
  init.feature_set = fset;
  const GmmParams gmm = em_fit(joint, init, em).params;

  StoredModel model;
  model.method = method;
  model.gmm = gmm;
  model.bounds = AccelBounds{flags.a_min, flags.a_max};
  if (method == Method::GmmHmm) {
    const HmmParams hmm = estimate_transitions(events, gmm);
    model.initial = hmm.initial;
    model.transitions = hmm.transitions;
  }
  write_text_file(flags.output, model_to_json(model));
  std::cout << "fit " << method_name(method) << " model (" << fset.name() << ", N="
            << flags.components << ", " << n_samples << " samples) -> " << flags.output
            << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                const std::string& output) {
  const StoredModel model = model_from_json(read_text_file(model_path));
  const auto events = events_from_csv(read_text_file(input), *model.gmm.feature_set);
  std::vector<std::vector<double>> predictions;
  PredictDiag diag;
  if (model.method == Method::GmmHmm) {
    const HmmPredictor predictor(model.hmm());
    for (const auto& seq : events)
      predictions.push_back(predictor.predict_sequence(seq, &diag));
  } else {
    const PdfPredictor predictor(model.gmm, model.bounds);
    for (const auto& seq : events) predictions.push_back(predictor.predict_sequence(seq));
  }
  write_text_file(output, predictions_to_csv(events, predictions));
  if (diag.underflow_fallbacks > 0)
    std::cerr << "warning: " << diag.underflow_fallbacks
              << " forward steps fell back to the prior (density underflow)\n";
  std::cout << "predicted " << events.size() << " events -> " << output << "\n";
  return kExitOk;
}

SweepConfig config_from_flags(const CommonFlags& flags) {
  SweepConfig cfg;
  cfg.m_groups = flags.m_groups;
  cfg.repeats = flags.repeats;
  cfg.base_seed = flags.seed;
  cfg.bounds = AccelBounds{flags.a_min, flags.a_max};
  cfg.smooth_window = flags.window;
  cfg.jobs = flags.jobs;
  return cfg;
}

/// Loads a sweep config JSON; every field is optional and defaults to the
/// values used throughout the experiments.
SweepConfig config_from_json(const std::string& text, SweepConfig cfg) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.contains("feature_sets")) {
    cfg.feature_sets.clear();
    for (const auto& f : j.at("feature_sets"))
      cfg.feature_sets.push_back(FeatureSet::parse(f.get<std::string>()).id);
  }
  if (j.contains("component_counts"))
    cfg.component_counts = j.at("component_counts").get<std::vector<int>>();
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j.at("methods"))
      cfg.methods.push_back(parse_method(m.get<std::string>()));
  }
  cfg.m_groups = j.value("m_groups", cfg.m_groups);
  cfg.repeats = j.value("repeats", cfg.repeats);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.smooth_window = j.value("smooth_window", cfg.smooth_window);
  cfg.full_rotation = j.value("full_rotation", cfg.full_rotation);
  if (j.contains("em")) {
    const auto& je = j.at("em");
    cfg.em.max_iter = je.value("max_iter", cfg.em.max_iter);
    cfg.em.rel_tol = je.value("rel_tol", cfg.em.rel_tol);
    if (je.contains("cov_reg")) cfg.em.cov_reg = je.at("cov_reg").get<double>();
  }
  if (j.contains("bounds")) {
    cfg.bounds.a_min = j.at("bounds").value("a_min", cfg.bounds.a_min);
    cfg.bounds.a_max = j.at("bounds").value("a_max", cfg.bounds.a_max);
  }
  return cfg;
}

std::vector<DriverData> load_corpus(const std::string& input, double min_duration,
                                    double range_min, double range_max) {
  std::vector<DriverData> drivers;
  const fs::path root(input);
  const fs::path manifest_path = root / "manifest.json";
  if (fs::is_regular_file(manifest_path)) {
    const CorpusManifest manifest = manifest_from_json(read_text_file(manifest_path.string()));
    for (const auto& d : manifest.drivers) {
      DriverData dd;
      dd.driver_id = d.id;
      for (const auto& rel : d.trajectory_files) {
        const Trajectory traj = load_trajectory((root / rel).string(), d.id);
        auto evs = extract_events(traj, min_duration, range_min, range_max,
                                  d.id + "/" + fs::path(rel).stem().string());
        for (auto& e : evs) dd.events.push_back(std::move(e));
      }
      drivers.push_back(std::move(dd));
    }
    return drivers;
  }
  if (!fs::is_directory(root))
    throw std::invalid_argument("input must be a corpus directory: " + input);
  // no manifest: each subdirectory is one driver
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& dir : subdirs) {
    DriverData dd;
    dd.driver_id = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const Trajectory traj = load_trajectory(file.string(), dd.driver_id);
      auto evs = extract_events(traj, min_duration, range_min, range_max,
                                dd.driver_id + "/" + file.stem().string());
      for (auto& e : evs) dd.events.push_back(std::move(e));
    }
    if (!dd.events.empty()) drivers.push_back(std::move(dd));
  }
  if (drivers.empty()) throw std::invalid_argument("no drivers found under " + input);
  return drivers;
}

void write_sweep_outputs(const std::string& output, const SweepResult& result,
                         const SweepConfig& cfg) {
  fs::create_directories(output);
  write_text_file((fs::path(output) / "report.csv").string(),
                  reports_to_csv(result.reports));
  write_text_file((fs::path(output) / "summary.json").string(),
                  summary_to_json(result, cfg));
}

int cmd_evaluate(const CommonFlags& flags, const std::string& driver,
                 bool full_rotation) {
  SweepConfig cfg = config_from_flags(flags);
  cfg.feature_sets = {FeatureSet::parse(flags.feature_set).id};
  cfg.component_counts = {flags.components};
  cfg.methods = {parse_method(flags.method)};
  cfg.full_rotation = full_rotation;

  SweepResult result;
  std::string line;
  {
    std::ifstream probe(flags.input, std::ios::binary);
    if (!probe) throw std::invalid_argument("cannot read " + flags.input);
    std::getline(probe, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  }
  if (line == kEventsHeader) {
    const FeatureSet fset = FeatureSet::parse(flags.feature_set);
    const auto features = events_from_csv(read_text_file(flags.input), fset);
    const std::string driver_id =
        driver.empty() ? fs::path(flags.input).stem().string() : driver;
    result.reports.push_back(run_cv_features(driver_id, features, cfg, fset.id,
                                             flags.components, cfg.methods[0]));
  } else {
    const auto drivers = load_corpus(flags.input, kMinEventDuration, kRangeMin, kRangeMax);
    result = sweep(drivers, cfg);
  }
  write_sweep_outputs(flags.output, result, cfg);
  std::cout << "evaluated " << result.reports.size() << " cell(s) -> " << flags.output
            << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::string& config_path) {
  SweepConfig cfg = config_from_flags(flags);
  if (!config_path.empty()) cfg = config_from_json(read_text_file(config_path), cfg);
  const auto drivers = load_corpus(flags.input, kMinEventDuration, kRangeMin, kRangeMax);
  const SweepResult result = sweep(drivers, cfg);
  write_sweep_outputs(flags.output, result, cfg);
  std::cout << "swept " << result.reports.size() << " cells ("
            << result.failed_cells.size() << " failed) -> " << flags.output << "\n";
  return kExitOk;
}

int cmd_compare(const std::string& input, const std::string& output) {
  const auto reports = reports_from_csv(read_text_file(input));
  const ComparisonSummary summary = compare_methods(reports);
  write_text_file(output, comparison_to_json(summary));
  std::printf("hmm best: %s N=%d mae=%.4f | pdf best: %s N=%d mae=%.4f | mean improvement %.4f\n",
              FeatureSet::of(summary.best_hmm.feature_set).name().c_str(),
              summary.best_hmm.n_components, summary.best_hmm.mean_test_mae,
              FeatureSet::of(summary.best_pdf.feature_set).name().c_str(),
              summary.best_pdf.n_components, summary.best_pdf.mean_test_mae,
              summary.mean_improvement);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalized car-following driver models (GMM+HMM / GMM+PDF)"};
  app.require_subcommand(1);

  CommonFlags flags;
  double min_duration = kMinEventDuration;
  double range_min = kRangeMin;
  double range_max = kRangeMax;
  std::string driver;
  std::string config_path;
  std::string model_path;
  bool full_rotation = false;
  int n_drivers = 3;
  int events_per_driver = 20;
  double event_duration = 60.0;
  double noise_std = 0.3;

  auto* gen = app.add_subcommand("generate", "synthesize a multi-driver corpus");
  gen->add_option("--output", flags.output, "corpus directory")->required();
  gen->add_option("--drivers", n_drivers, "number of drivers");
  gen->add_option("--events-per-driver", events_per_driver, "episodes per driver");
  gen->add_option("--event-duration", event_duration, "episode length, s");
  gen->add_option("--noise-std", noise_std, "acceleration noise std, m/s^2");
  gen->add_option("--seed", flags.seed, "master seed");

  auto* ext = app.add_subcommand("extract", "extract car-following events + features");
  ext->add_option("--input", flags.input, "trajectory csv or directory")->required();
  ext->add_option("--output", flags.output, "events csv")->required();
  ext->add_option("--feature-set", flags.feature_set, "z1|z2|z3|z4 (default z4)");
  ext->add_option("--window", flags.window, "smoothing window");
  ext->add_option("--min-duration", min_duration, "minimum event duration, s");
  ext->add_option("--range-min", range_min, "minimum range, m");
  ext->add_option("--range-max", range_max, "maximum range, m");
  ext->add_option("--driver", driver, "driver id override");

  auto* fit = app.add_subcommand("fit", "fit one model on an events csv");
  fit->add_option("--input", flags.input, "events csv")->required();
  fit->add_option("--output", flags.output, "model json")->required();
  fit->add_option("--feature-set", flags.feature_set, "z1|z2|z3|z4");
  fit->add_option("--components", flags.components, "number of GMM components");
  fit->add_option("--method", flags.method, "hmm|pdf");
  fit->add_option("--seed", flags.seed, "seed");
  fit->add_option("--a-min", flags.a_min, "lower acceleration bound");
  fit->add_option("--a-max", flags.a_max, "upper acceleration bound");

  auto* pred = app.add_subcommand("predict", "apply a fitted model to events");
  pred->add_option("--model", model_path, "model json")->required();
  pred->add_option("--input", flags.input, "events csv")->required();
  pred->add_option("--output", flags.output, "prediction csv")->required();

  auto* eval = app.add_subcommand("evaluate", "cross-validate one cell");
  eval->add_option("--input", flags.input, "events csv or corpus directory")->required();
  eval->add_option("--output", flags.output, "report directory")->required();
  eval->add_option("--feature-set", flags.feature_set, "z1|z2|z3|z4");
  eval->add_option("--components", flags.components, "number of GMM components");
  eval->add_option("--method", flags.method, "hmm|pdf");
  eval->add_option("--m-groups", flags.m_groups, "number of CV groups");
  eval->add_option("--repeats", flags.repeats, "repeated runs");
  eval->add_option("--seed", flags.seed, "base seed");
  eval->add_option("--a-min", flags.a_min, "lower acceleration bound");
  eval->add_option("--a-max", flags.a_max, "upper acceleration bound");
  eval->add_option("--window", flags.window, "smoothing window");
  eval->add_option("--driver", driver, "driver id for events csv input");
  eval->add_flag("--full-rotation", full_rotation, "rotate the holdout over all groups");
  eval->add_option("--jobs", flags.jobs, "parallel workers");

  auto* swp = app.add_subcommand("sweep", "full grid experiment over a corpus");
  swp->add_option("--input", flags.input, "corpus directory")->required();
  swp->add_option("--output", flags.output, "report directory")->required();
  swp->add_option("--config", config_path, "sweep config json");
  swp->add_option("--m-groups", flags.m_groups, "number of CV groups");
  swp->add_option("--repeats", flags.repeats, "repeated runs");
  swp->add_option("--seed", flags.seed, "base seed");
  swp->add_option("--a-min", flags.a_min, "lower acceleration bound");
  swp->add_option("--a-max", flags.a_max, "upper acceleration bound");
  swp->add_option("--window", flags.window, "smoothing window");
  swp->add_option("--jobs", flags.jobs, "parallel workers");

  auto* cmp = app.add_subcommand("compare", "method comparison from a report csv");
  cmp->add_option("--input", flags.input, "report csv")->required();
  cmp->add_option("--output", flags.output, "comparison json")->required();

  // default feature set for extract is the full channel dump
  if (argc > 1 && std::string(argv[1]) == "extract") flags.feature_set = "z4";

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kExitInvalid;
  }

  try {
    if (gen->parsed())
      return cmd_generate(flags.output, n_drivers, events_per_driver, event_duration,
                          noise_std, flags.seed);
    if (ext->parsed()) return cmd_extract(flags, min_duration, range_min, range_max, driver);
    if (fit->parsed()) return cmd_fit(flags);
    if (pred->parsed()) return cmd_predict(model_path, flags.input, flags.output);
    if (eval->parsed()) return cmd_evaluate(flags, driver, full_rotation);
    if (swp->parsed()) return cmd_sweep(flags, config_path);
    if (cmp->parsed()) return cmd_compare(flags.input, flags.output);
  } catch (const FitError& e) {
    std::cerr << "fit failure: " << e.what() << "\n";
    return kExitFitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
