#include "agriperc/ground.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace agriperc::ground {

FeatureVector to_feature_vector(const geo3d::GeoFeatures& f) {
  FeatureVector x;
  x << f.mean_height, f.height_std, f.height_range, f.normal_z, f.fit_residual;
  return x;
}

double chi_square_quantile(int dim, double p) {
  if (dim < 1 || !(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("chi_square_quantile: dim >= 1 and 0 < p < 1 required");
  }
  boost::math::chi_squared dist(static_cast<double>(dim));
  return boost::math::quantile(dist, p);
}

GroundModel GroundModel::bootstrap(std::size_t capacity,
                                   const std::vector<FeatureVector>& features,
                                   double confidence) {
  if (features.size() < static_cast<std::size_t>(kFeatureDim) + 1) {
    throw std::invalid_argument("bootstrap: need at least dim+1 feature vectors");
  }
  GroundModel m;
  m.capacity_ = capacity;
  for (const auto& f : features) {
    m.buffer_.push_back(f);
    if (m.buffer_.size() > m.capacity_) m.buffer_.pop_front();
  }
  m.recompute();
  m.threshold_ = chi_square_quantile(kFeatureDim, confidence);
  return m;
}

void GroundModel::recompute() {
  const auto n = static_cast<double>(buffer_.size());
  mean_ = Eigen::VectorXd::Zero(kFeatureDim);
  for (const auto& f : buffer_) mean_ += f;
  mean_ /= n;
  cov_ = Eigen::MatrixXd::Zero(kFeatureDim, kFeatureDim);
  for (const auto& f : buffer_) {
    Eigen::VectorXd d = f - mean_;
    cov_ += d * d.transpose();
  }
  cov_ /= n;
  cov_ += kEpsilon * Eigen::MatrixXd::Identity(kFeatureDim, kFeatureDim);
  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("GroundModel: covariance not positive definite");
  }
}

double GroundModel::mahalanobis_score(const FeatureVector& x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("mahalanobis_score: dimension mismatch");
  }
  Eigen::VectorXd d = x - mean_;
  return d.dot(llt_.solve(d));
}

PatchLabel GroundModel::classify(const geo3d::GeoFeatures& features) const {
  if (features.degenerate) {
    return PatchLabel{Label::Unknown, 0.0};
  }
  return classify(to_feature_vector(features));
}

PatchLabel GroundModel::classify(const FeatureVector& x) const {
  const double s = mahalanobis_score(x);
  return PatchLabel{s <= threshold_ ? Label::Ground : Label::NonGround, s};
}

void GroundModel::update(const std::vector<FeatureVector>& new_ground_features) {
  if (new_ground_features.empty()) return;
  for (const auto& f : new_ground_features) {
    buffer_.push_back(f);
    if (buffer_.size() > capacity_) buffer_.pop_front();
  }
  recompute();
}

void GroundModel::save(std::ostream& out) const {
  char buf[64];
  out << kFeatureDim << " " << capacity_ << " ";
  std::snprintf(buf, sizeof(buf), "%.17g\n", threshold_);
  out << buf;
  for (int i = 0; i < mean_.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", mean_(i), i + 1 == mean_.size() ? '\n' : ' ');
    out << buf;
  }
  for (int r = 0; r < cov_.rows(); ++r) {
    for (int c = 0; c < cov_.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", cov_(r, c), c + 1 == cov_.cols() ? '\n' : ' ');
      out << buf;
    }
  }
  out << buffer_.size() << "\n";
  for (const auto& f : buffer_) {
    for (int i = 0; i < f.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", f(i), i + 1 == f.size() ? '\n' : ' ');
      out << buf;
    }
  }
}

void GroundModel::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  save(out);
}

GroundModel GroundModel::load(std::istream& in) {
  int dim = 0;
  GroundModel m;
  in >> dim >> m.capacity_ >> m.threshold_;
  if (!in || dim != kFeatureDim) {
    throw std::runtime_error("GroundModel::load: bad header");
  }
  m.mean_.resize(dim);
  for (int i = 0; i < dim; ++i) in >> m.mean_(i);
  m.cov_.resize(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) in >> m.cov_(r, c);
  std::size_t n = 0;
  in >> n;
  for (std::size_t k = 0; k < n; ++k) {
    FeatureVector f;
    for (int i = 0; i < dim; ++i) in >> f(i);
    m.buffer_.push_back(f);
  }
  if (!in) throw std::runtime_error("GroundModel::load: truncated file");
  m.llt_.compute(m.cov_);
  if (m.llt_.info() != Eigen::Success) {
    throw std::runtime_error("GroundModel::load: covariance not positive definite");
  }
  return m;
}

GroundModel GroundModel::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load(in);
}

}  // namespace agriperc::ground
