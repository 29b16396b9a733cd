#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace agriperc::radar {

// Polar intensity grid of a fan-beam scan. Range bin r covers
// [min_range + r*range_resolution, ...); azimuth bin a covers
// [a*azimuth_resolution, ...) counter-clockwise from the +x axis, full circle.
struct RadarImage {
  int range_bins = 0;
  int azimuth_bins = 0;
  double range_resolution = 0.25;  // m/bin
  double min_range = 3.0;
  std::vector<double> intensities;  // range-major: [r * azimuth_bins + a]

  double max_range() const { return min_range + range_bins * range_resolution; }
  double& at(int r, int a) { return intensities[static_cast<std::size_t>(r) * azimuth_bins + a]; }
  double at(int r, int a) const {
    return intensities[static_cast<std::size_t>(r) * azimuth_bins + a];
  }
};

// Square x-y grid centred on the sensor; cells outside the annulus
// [min_range, max_range] are invalid.
struct CartesianRadarGrid {
  int n = 0;  // n x n cells
  double cell_size = 0.25;
  double extent = 0.0;  // half-width in meters; grid spans [-extent, extent)
  std::vector<double> intensities;  // row-major by y then x
  std::vector<std::uint8_t> valid;

  int index(int iy, int ix) const { return iy * n + ix; }
  double center_x(int ix) const { return -extent + (ix + 0.5) * cell_size; }
  double center_y(int iy) const { return -extent + (iy + 0.5) * cell_size; }
};

struct BinaryGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> v;  // row-major

  BinaryGrid() = default;
  BinaryGrid(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0) {}
  std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

struct CfarParams {
  int n_train = 8;   // training cells per side
  int n_guard = 2;   // guard cells per side
  double p_fa = 1e-2;
};

struct RadarObstacle {
  std::vector<std::pair<double, double>> hull;  // counter-clockwise, meters
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double area = 0.0;  // member count * cell_size^2
  std::size_t member_cells = 0;
};

// Nearest-neighbour polar-to-Cartesian resampling of the intensity image.
CartesianRadarGrid polar_to_cartesian(const RadarImage& img, double cell_size);

// Cell-averaging CFAR along the range axis, one column per azimuth. Detection
// iff intensity > alpha * Z with alpha = N * (p_fa^(-1/N) - 1) over the N
// in-window training cells; edges fall back to one-sided windows.
BinaryGrid cfar_threshold(const RadarImage& img, const CfarParams& params);

// Projects a polar detection mask onto the Cartesian grid geometry
// (nearest neighbour, invalid cells stay 0).
BinaryGrid project_mask(const BinaryGrid& polar_mask, const RadarImage& img,
                        const CartesianRadarGrid& grid);

// Opening (disk SE) -> removal of small 8-connected components -> closing,
// in that order.
BinaryGrid morph_filter(const BinaryGrid& in, int open_radius, int min_area, int close_radius);

BinaryGrid erode_disk(const BinaryGrid& in, int radius);
BinaryGrid dilate_disk(const BinaryGrid& in, int radius);
BinaryGrid remove_small_components(const BinaryGrid& in, int min_area);

// 8-connected components with convex hull over member cell centres and
// centroid, sorted by centroid range ascending.
std::vector<RadarObstacle> extract_obstacles(const BinaryGrid& mask,
                                             const CartesianRadarGrid& grid);

// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
std::vector<std::pair<double, double>> convex_hull(std::vector<std::pair<double, double>> pts);

// Text format: header `range_bins azimuth_bins range_resolution_m min_range_m`
// then row-major intensities.
RadarImage read_radar_image(std::istream& in);
RadarImage read_radar_image_file(const std::string& path);
void write_radar_image(std::ostream& out, const RadarImage& img);
void write_radar_image_file(const std::string& path, const RadarImage& img);

// 8-bit PGM (255 = detection).
void write_pgm(std::ostream& out, const BinaryGrid& mask);
void write_pgm_file(const std::string& path, const BinaryGrid& mask);

}  // namespace agriperc::radar
