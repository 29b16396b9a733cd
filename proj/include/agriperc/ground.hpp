#pragma once

#include <Eigen/Dense>
#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "agriperc/geo3d.hpp"

namespace agriperc::ground {

// Feature vector over the 5 geometric statistics of a patch, fixed order:
// (mean_height, height_std, height_range, normal_z, fit_residual).
inline constexpr int kFeatureDim = 5;

using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

FeatureVector to_feature_vector(const geo3d::GeoFeatures& f);

enum class Label { Ground, NonGround, Unknown };

struct PatchLabel {
  Label label = Label::Unknown;
  double score = 0.0;  // squared Mahalanobis distance; meaningless for Unknown
};

// Chi-square quantile on `dim` degrees of freedom, used as the decision
// threshold on the squared Mahalanobis distance.
double chi_square_quantile(int dim, double p);

// Self-learning ground model: rolling FIFO of recent ground-labelled feature
// vectors with mean/covariance kept consistent with the buffer contents.
class GroundModel {
 public:
  static constexpr double kEpsilon = 1e-6;

  // Seeds the buffer from patches of an obstacle-free start region.
  // Throws std::invalid_argument when fewer than dim+1 samples are given.
  static GroundModel bootstrap(std::size_t capacity, const std::vector<FeatureVector>& features,
                               double confidence = 0.95);

  double mahalanobis_score(const FeatureVector& x) const;

  PatchLabel classify(const geo3d::GeoFeatures& features) const;
  PatchLabel classify(const FeatureVector& x) const;

  // Appends self-supervised ground features, evicting the oldest beyond
  // capacity, and recomputes mean/covariance from scratch.
  void update(const std::vector<FeatureVector>& new_ground_features);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t) { threshold_ = t; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<FeatureVector>& buffer() const { return buffer_; }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static GroundModel load(std::istream& in);
  static GroundModel load_file(const std::string& path);

 private:
  GroundModel() = default;
  void recompute();

  std::size_t capacity_ = 1000;
  double threshold_ = 0.0;
  std::deque<FeatureVector> buffer_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace agriperc::ground
