#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "agriperc/geo3d.hpp"

namespace agriperc::cells {

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;  // row-major, values in [0,1] for exposures

  Image() = default;
  Image(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

struct Exposure {
  Image image;
  double time = 0.0;  // seconds
};

struct ExposureStack {
  std::vector<Exposure> exposures;  // strictly increasing times
};

// Feature sample of one 3D point binned into a cell:
// (r', g', height above reference plane, temperature).
struct CellSample {
  double chroma_r = 1.0 / 3.0;
  double chroma_g = 1.0 / 3.0;
  double height = 0.0;
  double temperature = 288.0;

  Eigen::Vector4d vec() const { return {chroma_r, chroma_g, height, temperature}; }
};

inline constexpr int kCellFeatureDim = 4;

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GaussianMixture {
  std::vector<GaussianComponent> components;
};

enum class CellLabel : std::uint8_t {
  Unknown,
  Traversable,
  NotTraversable,
  OccludedNotTraversable,  // shadow of a NotTraversable cell
};

struct Cell {
  std::vector<CellSample> samples;
  CellLabel label = CellLabel::Unknown;
  double score = 0.0;
  GaussianMixture gmm;  // empty until fitted
};

struct CellGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 0.6;
  int n_rows = 0;
  int n_cols = 0;
  std::vector<Cell> cells;  // row-major

  CellGrid() = default;
  CellGrid(double ox, double oy, double size, int rows, int cols)
      : origin_x(ox), origin_y(oy), cell_size(size), n_rows(rows), n_cols(cols),
        cells(static_cast<std::size_t>(rows) * cols) {}

  int index(int row, int col) const { return row * n_cols + col; }
  Cell& at(int row, int col) { return cells[index(row, col)]; }
  const Cell& at(int row, int col) const { return cells[index(row, col)]; }
  double center_x(int col) const { return origin_x + (col + 0.5) * cell_size; }
  double center_y(int row) const { return origin_y + (row + 0.5) * cell_size; }
};

struct FeatureWeights {
  double w_chroma = 0.0;  // field operating point: chromaticity zeroed
  double w_height = 1.0;
  double w_temp = 1.0;
};

struct EmParams {
  int max_iter = 200;
  double tol = 1e-8;
  double epsilon = 1e-6;  // covariance regularization
  std::uint64_t seed = 0;
};

// Weighted average of unsaturated exposures scaled to a common radiance,
// with hat weight min(v, 1-v) and saturation cut at v >= 0.99. A pixel
// saturated everywhere falls back to the shortest exposure.
Image fuse_exposures(const ExposureStack& stack);

// Bins colored, temperature-annotated points into 0.6 m cells; height is the
// signed distance to the reference plane. Points higher than height_cutoff
// above the plane are ignored (vehicle clearance).
void accumulate_cell_samples(const std::vector<geo3d::Point3>& points, CellGrid& grid,
                             const geo3d::Plane& reference,
                             double height_cutoff = std::numeric_limits<double>::infinity());

// Standard EM with k-means++ seeding; falls back to k = 1 when fewer than
// k*(d+1) samples are available. Log-likelihood is non-decreasing.
GaussianMixture fit_gmm_em(const std::vector<CellSample>& samples, int k, const EmParams& params,
                           std::vector<double>* ll_history = nullptr);

// Selects k in {1..k_max} by minimum BIC.
GaussianMixture fit_gmm_bic(const std::vector<CellSample>& samples, int k_max,
                            const EmParams& params);

double gmm_log_likelihood(const GaussianMixture& gmm, const std::vector<CellSample>& samples);

// Closed-form Bhattacharyya distance between two Gaussians after axis
// scaling by the feature weights (zero-weight axes are dropped).
double bhattacharyya_gaussian(const GaussianComponent& a, const GaussianComponent& b,
                              const FeatureWeights& weights = {1.0, 1.0, 1.0});

// Nearest-component matching: sum over p's components of weight * min_j D_B.
double gmm_distance(const GaussianMixture& p, const GaussianMixture& q,
                    const FeatureWeights& weights);

struct ClassifyParams {
  double threshold = 0.25;
  std::size_t min_samples = 20;
  int k_max = 3;
  FeatureWeights weights;
  EmParams em;
};

// Fits per-cell GMMs and scores each cell against the nearest library entry.
void classify_cells(CellGrid& grid, const std::vector<GaussianMixture>& library,
                    const ClassifyParams& params);

// One GMM per trusted-traversable training cell, deduplicated by
// gmm_distance < merge_threshold against the entries collected so far.
std::vector<GaussianMixture> train_library(const std::vector<const CellGrid*>& grids,
                                           const ClassifyParams& params,
                                           double merge_threshold = 0.05);

// Marks every cell whose line of sight from the sensor passes through a
// NotTraversable cell as occluded (supercover traversal).
void mark_occlusion_shadows(CellGrid& grid, double sensor_x, double sensor_y);

void write_library(std::ostream& out, const std::vector<GaussianMixture>& library);
void write_library_file(const std::string& path, const std::vector<GaussianMixture>& library);
std::vector<GaussianMixture> read_library(std::istream& in);
std::vector<GaussianMixture> read_library_file(const std::string& path);

}  // namespace agriperc::cells
