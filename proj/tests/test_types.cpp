#include <catch2/catch_amalgamated.hpp>

#include "cfdm/cfdm.hpp"
#include "test_support.hpp"

using namespace cfdm;

TEST_CASE("trajectory validation enforces the kinematic invariants") {
  Trajectory traj = testkit::constant_trajectory(10.0, 30.0, 50);
  REQUIRE_NOTHROW(traj.validate());

  SECTION("non-uniform timestamps rejected") {
    traj.samples[20].t += 1e-6;
    REQUIRE_THROWS_AS(traj.validate(), std::invalid_argument);
  }
  SECTION("negative speed rejected") {
    traj.samples[3].v_h = -0.1;
    REQUIRE_THROWS_AS(traj.validate(), std::invalid_argument);
  }
  SECTION("lead behind host rejected") {
    traj.samples[7].x_l = traj.samples[7].x_h - 1.0;
    REQUIRE_THROWS_AS(traj.validate(), std::invalid_argument);
  }
  SECTION("wrong rate rejected") {
    traj.dt = 0.05;
    REQUIRE_THROWS_AS(traj.validate(), std::invalid_argument);
  }
}

TEST_CASE("feature sets expose the documented channel layouts") {
  const FeatureSet z1 = FeatureSet::of(FeatureSetId::Z1);
  const FeatureSet z4 = FeatureSet::of(FeatureSetId::Z4);
  REQUIRE(z1.input_dim == 2);
  REQUIRE(z1.total_dim == 3);
  REQUIRE(z4.input_dim == 5);
  REQUIRE(z4.total_dim == 6);
  REQUIRE(z4.uses(Channel::Jerk));
  REQUIRE_FALSE(z1.uses(Channel::Vh));
  REQUIRE(FeatureSet::parse("z3").id == FeatureSetId::Z3);
  REQUIRE_THROWS_AS(FeatureSet::parse("z9"), std::invalid_argument);
}

TEST_CASE("gmm validation rejects broken parameters") {
  Rng rng(7);
  GmmParams p = testkit::make_gmm(
      {0.4, 0.6}, {Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 3)},
      {testkit::random_spd(2, rng), testkit::random_spd(2, rng)});
  REQUIRE_NOTHROW(p.validate());

  SECTION("weights off the simplex") {
    p.weights(0) = 0.5;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("covariance with non-positive eigenvalue") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    p.covariances[1] = bad;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("asymmetric covariance") {
    p.covariances[0](0, 1) += 1e-6;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("hmm validation checks the stochastic matrices") {
  Rng rng(11);
  HmmParams hmm;
  hmm.gmm = testkit::make_gmm(
      {0.5, 0.5}, {Eigen::Vector2d(0, 0), Eigen::Vector2d(5, 5)},
      {testkit::random_spd(2, rng), testkit::random_spd(2, rng)});
  hmm.initial = Eigen::Vector2d(0.5, 0.5);
  hmm.transitions = Eigen::Matrix2d::Constant(0.5);
  REQUIRE_NOTHROW(hmm.validate());
  hmm.transitions(0, 0) = 0.6;
  REQUIRE_THROWS_AS(hmm.validate(), std::invalid_argument);
}

TEST_CASE("accel bounds") {
  AccelBounds b;
  REQUIRE_NOTHROW(b.validate());
  REQUIRE(b.clamp(12.0) == 8.0);
  REQUIRE(b.clamp(-9.5) == -8.0);
  REQUIRE(b.clamp(0.25) == 0.25);
  const AccelBounds bad{3.0, 3.0};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("cv report mean consistency") {
  CvReport r;
  r.per_fold = {{0, 0, 1, 0.2, 0.3}, {1, 1, 2, 0.4, 0.5}};
  r.recompute_means();
  REQUIRE(r.mean_train_mae == Catch::Approx(0.3).margin(1e-15));
  REQUIRE(r.mean_test_mae == Catch::Approx(0.4).margin(1e-15));
  REQUIRE_NOTHROW(r.validate());
  r.mean_test_mae += 1e-9;
  REQUIRE_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("model json round-trips bit-exactly") {
  Rng rng(23);
  StoredModel model;
  model.method = Method::GmmHmm;
  model.gmm = testkit::make_gmm(
      {0.3, 0.7},
      {Eigen::Vector4d(0.1, -0.2, 0.3, 1.0) * (1.0 / 3.0),
       Eigen::Vector4d(2, 3, -1, 0.5)},
      {testkit::random_spd(4, rng), testkit::random_spd(4, rng)});
  model.gmm.feature_set = FeatureSet::of(FeatureSetId::Z2);
  model.initial = Eigen::Vector2d(0.25, 0.75);
  Eigen::Matrix2d phi;
  phi << 0.9, 0.1, 1.0 / 3.0, 2.0 / 3.0;
  model.transitions = phi;
  model.bounds = AccelBounds{-8, 8};

  const std::string text = model_to_json(model);
  const StoredModel back = model_from_json(text);
  REQUIRE(back.method == Method::GmmHmm);
  REQUIRE(back.gmm.feature_set->id == FeatureSetId::Z2);
  REQUIRE(back.gmm.weights.cwiseEqual(model.gmm.weights).all());
  for (int i = 0; i < 2; ++i) {
    REQUIRE(back.gmm.means[i].cwiseEqual(model.gmm.means[i]).all());
    REQUIRE(back.gmm.covariances[i].cwiseEqual(model.gmm.covariances[i]).all());
  }
  REQUIRE(back.initial->cwiseEqual(*model.initial).all());
  REQUIRE(back.transitions->cwiseEqual(*model.transitions).all());
  REQUIRE(back.bounds.a_min == model.bounds.a_min);

  // serializing the parsed model again reproduces the exact bytes
  REQUIRE(model_to_json(back) == text);

  SECTION("pdf models omit the hmm blocks") {
    model.method = Method::GmmPdf;
    const StoredModel pdf_back = model_from_json(model_to_json(model));
    REQUIRE_FALSE(pdf_back.initial.has_value());
    REQUIRE(pdf_back.gmm.weights.cwiseEqual(model.gmm.weights).all());
  }
}

TEST_CASE("trajectory csv round-trips bit-exactly") {
  Rng rng(5);
  Trajectory traj;
  traj.driver_id = "d";
  double xh = 0.0, xl = 31.7;
  for (int k = 0; k < 120; ++k) {
    const double vh = 12.0 + std::sin(0.05 * k);
    const double vl = 12.0 + std::cos(0.07 * k);
    traj.samples.push_back({k * kSampleDt, xh, vh, xl, vl});
    xh += vh * kSampleDt;
    xl += vl * kSampleDt;
  }
  const std::string text = trajectory_to_csv(traj);
  const Trajectory back = trajectory_from_csv(text, "d");
  REQUIRE(back.samples.size() == traj.samples.size());
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    REQUIRE(back.samples[k].t == traj.samples[k].t);
    REQUIRE(back.samples[k].x_h == traj.samples[k].x_h);
    REQUIRE(back.samples[k].v_h == traj.samples[k].v_h);
    REQUIRE(back.samples[k].x_l == traj.samples[k].x_l);
    REQUIRE(back.samples[k].v_l == traj.samples[k].v_l);
  }
  REQUIRE(trajectory_to_csv(back) == text);
}

TEST_CASE("events csv round-trips features and enforces required channels") {
  const Trajectory traj = testkit::constant_trajectory(14.0, 25.0, 700);
  const auto events = extract_events(traj);
  REQUIRE(events.size() == 1);
  const FeatureSet z2 = FeatureSet::of(FeatureSetId::Z2);
  std::vector<std::vector<ObservationVector>> feats{
      build_features(events[0], z2, 10)};
  const std::string text = events_to_csv(feats, z2);
  const auto back = events_from_csv(text, z2);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].size() == feats[0].size());
  for (std::size_t k = 0; k < feats[0].size(); ++k) {
    REQUIRE(back[0][k].z.cwiseEqual(feats[0][k].z).all());
    REQUIRE(back[0][k].a == feats[0][k].a);
    REQUIRE(back[0][k].t == feats[0][k].t);
  }
  // a z2 dump cannot feed a z3 model: dvdot was never written
  REQUIRE_THROWS_AS(events_from_csv(text, FeatureSet::of(FeatureSetId::Z3)),
                    std::invalid_argument);
}

TEST_CASE("report csv round-trips cell structure") {
  CvReport a;
  a.driver_id = "driver00";
  a.feature_set = FeatureSetId::Z2;
  a.n_components = 5;
  a.method = Method::GmmHmm;
  a.per_fold = {{3, 0, 42, 0.125, 0.25}, {7, 1, 43, 1.0 / 3.0, 0.2}};
  a.recompute_means();
  CvReport b = a;
  b.method = Method::GmmPdf;
  b.per_fold[0].train_mae = 0.5;
  b.recompute_means();

  const std::string text = reports_to_csv({a, b});
  const auto back = reports_from_csv(text);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].per_fold.size() == 2);
  REQUIRE(back[0].per_fold[1].train_mae == a.per_fold[1].train_mae);
  REQUIRE(back[0].mean_train_mae == a.mean_train_mae);
  REQUIRE(back[1].method == Method::GmmPdf);
  REQUIRE(back[1].per_fold[0].train_mae == 0.5);
  REQUIRE(reports_to_csv(back) == text);
}
