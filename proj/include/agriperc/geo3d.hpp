#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace agriperc::geo3d {

struct Color {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// 3D point in the vehicle frame: x forward, y left, z up. Units are meters,
// color channels [0,1], temperature kelvin.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::optional<Color> color;
  std::optional<double> temperature;
};

struct PointCloud {
  std::vector<Point3> points;
  int frame_id = 0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct VoxelGridParams {
  double voxel_size = 0.1;
};

// 2D horizontal grid of terrain patches. Cell (row, col) covers
// [origin + col*patch_size, origin + (col+1)*patch_size) in x (col) and the
// same in y (row); a coordinate exactly on an edge belongs to the
// higher-index cell.
struct PatchGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double patch_size = 0.4;
  int n_rows = 0;
  int n_cols = 0;
  std::vector<std::vector<int>> patches;  // row-major, member point indices
  std::size_t dropped = 0;                // out-of-bounds points

  int index(int row, int col) const { return row * n_cols + col; }
  const std::vector<int>& at(int row, int col) const { return patches[index(row, col)]; }
  double cell_center_x(int col) const { return origin_x + (col + 0.5) * patch_size; }
  double cell_center_y(int row) const { return origin_y + (row + 0.5) * patch_size; }
};

// Plane n.p = offset with ||n|| = 1 and n_z >= 0.
struct Plane {
  std::array<double, 3> normal{0.0, 0.0, 1.0};
  double offset = 0.0;
};

struct GeoFeatures {
  std::size_t n_points = 0;
  double mean_height = 0.0;
  double height_std = 0.0;    // population (1/N)
  double height_range = 0.0;  // max z - min z
  double normal_z = 0.0;      // z-component of unit plane normal, in [0,1]
  double fit_residual = 0.0;  // RMS point-to-plane distance
  bool degenerate = false;    // < 3 non-collinear points: flat-fallback values
};

PointCloud voxel_downsample(const PointCloud& cloud, const VoxelGridParams& params);

PatchGrid build_patch_grid(const PointCloud& cloud, double origin_x, double origin_y,
                           double patch_size, int n_rows, int n_cols);

// Total-least-squares plane through >= 3 non-collinear points.
// Throws std::domain_error on degenerate geometry.
Plane fit_plane_lsq(const std::vector<Point3>& points);

GeoFeatures compute_patch_features(const std::vector<Point3>& points);

// Plain-text point format: one point per line `x y z [r g b] [t]`,
// `#` comments. A line with 4 values is read as x y z t.
PointCloud read_point_cloud(std::istream& in);
PointCloud read_point_cloud_file(const std::string& path);
void write_point_cloud(std::ostream& out, const PointCloud& cloud);
void write_point_cloud_file(const std::string& path, const PointCloud& cloud);

}  // namespace agriperc::geo3d
