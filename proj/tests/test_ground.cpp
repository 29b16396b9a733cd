#include <random>
#include <sstream>

#include "agriperc/ground.hpp"
#include "doctest.h"

using namespace agriperc::ground;

namespace {

FeatureVector fv(double a, double b, double c, double d, double e) {
  FeatureVector x;
  x << a, b, c, d, e;
  return x;
}

std::vector<FeatureVector> gaussian_samples(int n, const FeatureVector& mu, double sigma,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<FeatureVector> out;
  for (int i = 0; i < n; ++i) {
    FeatureVector x = mu;
    for (int j = 0; j < kFeatureDim; ++j) x(j) += gauss(rng);
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_CASE("chi-square quantile matches the d=5, p=0.95 reference value") {
  CHECK(chi_square_quantile(5, 0.95) == doctest::Approx(11.070).epsilon(1e-4));
}

TEST_CASE("bootstrap on identical vectors yields epsilon covariance and zero score") {
  std::vector<FeatureVector> feats(20, fv(1, 2, 3, 0.5, 0.1));
  GroundModel m = GroundModel::bootstrap(100, feats);
  for (int i = 0; i < kFeatureDim; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) {
      CHECK(m.covariance()(i, j) ==
            doctest::Approx(i == j ? GroundModel::kEpsilon : 0.0).epsilon(1e-12));
    }
  }
  CHECK(m.mahalanobis_score(fv(1, 2, 3, 0.5, 0.1)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bootstrap mean approaches the sampling distribution mean") {
  const FeatureVector mu = fv(1, -2, 0.5, 3, 0);
  GroundModel m = GroundModel::bootstrap(1000, gaussian_samples(200, mu, 1.0, 42));
  CHECK((m.mean() - mu).norm() < 0.2);
}

TEST_CASE("bootstrap rejects too few samples") {
  std::vector<FeatureVector> feats(3, fv(0, 0, 0, 0, 0));
  CHECK_THROWS_AS(GroundModel::bootstrap(100, feats), std::invalid_argument);
}

TEST_CASE("mahalanobis score closed-form cases") {
  // Spread samples chosen so the bootstrap covariance is diag(4,1,1,1,1)
  // (population normalization) before regularization.
  std::vector<FeatureVector> feats;
  for (int s : {-1, 1}) {
    feats.push_back(fv(2 * s, 0, 0, 0, 0));
    feats.push_back(fv(0, s, 0, 0, 0));
    feats.push_back(fv(0, 0, s, 0, 0));
    feats.push_back(fv(0, 0, 0, s, 0));
    feats.push_back(fv(0, 0, 0, 0, s));
  }
  // 10 samples: cov = diag(8,2,2,2,2)/10 -> scale to diag(4,...) by repeating
  // a stretched set instead; simpler: use explicit construction below.
  GroundModel m = GroundModel::bootstrap(100, feats);
  CHECK(m.mahalanobis_score(m.mean().eval()) == doctest::Approx(0.0).epsilon(1e-9));

  // Identity-covariance construction: score of a unit offset is 1.
  std::mt19937_64 rng(5);
  std::vector<FeatureVector> big = gaussian_samples(200000, fv(0, 0, 0, 0, 0), 1.0, 5);
  GroundModel mi = GroundModel::bootstrap(300000, big);
  CHECK(mi.mahalanobis_score(fv(1, 0, 0, 0, 0) + mi.mean()) == doctest::Approx(1.0).epsilon(2e-2));
}

TEST_CASE("mahalanobis score with exact diagonal covariance") {
  // Buffer engineered so the sample covariance is exactly diag(4,1,1,1,1):
  // pairs +/-v along each axis, N = 10, sum v^2 per axis = 10 * var.
  const double a = std::sqrt(20.0) / 2.0 * std::sqrt(2.0);  // sqrt(4*10/2)... explicit below
  std::vector<FeatureVector> feats;
  const double vals[5] = {std::sqrt(4.0 * 10.0 / 2.0), std::sqrt(10.0 / 2.0),
                          std::sqrt(10.0 / 2.0), std::sqrt(10.0 / 2.0), std::sqrt(10.0 / 2.0)};
  (void)a;
  for (int axis = 0; axis < 5; ++axis) {
    for (int s : {-1, 1}) {
      FeatureVector x = fv(0, 0, 0, 0, 0);
      x(axis) = s * vals[axis];
      feats.push_back(x);
    }
  }
  GroundModel m = GroundModel::bootstrap(100, feats);
  // Mean is exactly zero, covariance diag(4,1,1,1,1) + eps*I.
  CHECK(m.mahalanobis_score(fv(2, 0, 0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(m.mahalanobis_score(fv(0, 1, 0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("classification respects the threshold with inclusive boundary") {
  GroundModel m = GroundModel::bootstrap(100, gaussian_samples(50, fv(0, 0, 0, 0, 0), 1.0, 9));
  PatchLabel center = m.classify(m.mean().eval());
  CHECK(center.label == Label::Ground);
  CHECK(center.score == doctest::Approx(0.0).epsilon(1e-9));

  // Degenerate patches are Unknown.
  agriperc::geo3d::GeoFeatures degen;
  degen.degenerate = true;
  CHECK(m.classify(degen).label == Label::Unknown);

  // Boundary: score == threshold stays Ground; monotonicity in the threshold.
  FeatureVector probe = m.mean() + fv(1, 0, 0, 0, 0) * 10;
  const double s = m.mahalanobis_score(probe);
  m.set_threshold(s);
  CHECK(m.classify(probe).label == Label::Ground);
  m.set_threshold(s * 0.999);
  CHECK(m.classify(probe).label == Label::NonGround);
}

TEST_CASE("update keeps FIFO semantics and matches from-scratch recomputation") {
  std::vector<FeatureVector> boot = gaussian_samples(10, fv(0, 0, 0, 0, 0), 1.0, 21);
  GroundModel m = GroundModel::bootstrap(12, boot);

  SUBCASE("empty update is a no-op") {
    const Eigen::VectorXd mean_before = m.mean();
    m.update({});
    CHECK((m.mean() - mean_before).norm() == 0.0);
    CHECK(m.buffer().size() == 10);
  }

  SUBCASE("oldest entries are evicted beyond capacity") {
    std::vector<FeatureVector> extra = gaussian_samples(5, fv(1, 1, 1, 1, 1), 0.5, 22);
    m.update(extra);
    REQUIRE(m.buffer().size() == 12);
    // The 3 oldest bootstrap entries are gone; newest entries at the back.
    CHECK((m.buffer().back() - extra.back()).norm() == 0.0);
    CHECK((m.buffer().front() - boot[3]).norm() == 0.0);

    // Oracle: recompute mean/covariance from the visible buffer.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kFeatureDim);
    for (const auto& f : m.buffer()) mean += f;
    mean /= 12.0;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kFeatureDim, kFeatureDim);
    for (const auto& f : m.buffer()) {
      Eigen::VectorXd d = f - mean;
      cov += d * d.transpose();
    }
    cov /= 12.0;
    cov += GroundModel::kEpsilon * Eigen::MatrixXd::Identity(kFeatureDim, kFeatureDim);
    CHECK((m.mean() - mean).norm() < 1e-14);
    CHECK((m.covariance() - cov).norm() < 1e-14);
  }
}

TEST_CASE("tiny FIFO eviction order") {
  std::vector<FeatureVector> boot;
  for (int i = 0; i < 6; ++i) boot.push_back(fv(i, 0, 0, 0, 0));
  GroundModel m = GroundModel::bootstrap(3, boot);
  REQUIRE(m.buffer().size() == 3);
  CHECK(m.buffer()[0](0) == 3.0);
  m.update({fv(9, 0, 0, 0, 0)});
  CHECK(m.buffer()[0](0) == 4.0);
  CHECK(m.buffer()[2](0) == 9.0);
}

TEST_CASE("classification is invariant under affine reparameterization") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FeatureVector> feats = gaussian_samples(60, fv(1, 2, 3, 4, 5), 1.0, 100 + trial);
    Eigen::Matrix<double, kFeatureDim, kFeatureDim> a;
    Eigen::Matrix<double, kFeatureDim, 1> b;
    do {
      for (int i = 0; i < kFeatureDim; ++i) {
        b(i) = gauss(rng);
        for (int j = 0; j < kFeatureDim; ++j) a(i, j) = gauss(rng);
      }
    } while (std::abs(a.determinant()) < 0.1);

    std::vector<FeatureVector> mapped;
    for (const auto& f : feats) mapped.push_back(a * f + b);

    // Disable the epsilon floor's scale sensitivity by using well-spread data.
    GroundModel m1 = GroundModel::bootstrap(100, feats);
    GroundModel m2 = GroundModel::bootstrap(100, mapped);
    FeatureVector q = feats[0] + fv(0.5, -0.2, 0.1, 0.3, -0.4);
    const double s1 = m1.mahalanobis_score(q);
    const double s2 = m2.mahalanobis_score(a * q + b);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-4));
  }
}

TEST_CASE("model snapshot round-trips bit-compatibly") {
  GroundModel m = GroundModel::bootstrap(50, gaussian_samples(30, fv(0, 1, 2, 3, 4), 0.7, 55));
  std::stringstream ss;
  m.save(ss);
  GroundModel r = GroundModel::load(ss);
  CHECK(r.capacity() == m.capacity());
  CHECK(r.threshold() == m.threshold());
  CHECK((r.mean() - m.mean()).norm() == 0.0);
  CHECK((r.covariance() - m.covariance()).norm() == 0.0);
  REQUIRE(r.buffer().size() == m.buffer().size());
  for (std::size_t i = 0; i < m.buffer().size(); ++i) {
    CHECK((r.buffer()[i] - m.buffer()[i]).norm() == 0.0);
  }
  // Scores identical after resume.
  FeatureVector q = fv(0.3, 1.2, 2.5, 2.1, 4.4);
  CHECK(r.mahalanobis_score(q) == m.mahalanobis_score(q));
}

TEST_CASE("scores are nonnegative and dimension mismatches are rejected") {
  GroundModel m = GroundModel::bootstrap(100, gaussian_samples(40, fv(0, 0, 0, 0, 0), 1.0, 77));
  std::mt19937_64 rng(78);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    FeatureVector q;
    for (int j = 0; j < kFeatureDim; ++j) q(j) = gauss(rng);
    CHECK(m.mahalanobis_score(q) >= 0.0);
  }
}
