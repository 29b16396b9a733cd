#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agriperc/fuse.hpp"
#include "agriperc/geo3d.hpp"
#include "agriperc/radar.hpp"

namespace agriperc::sim {

enum class GroundType { Flat, Sloped, Rutted };

struct GroundSpec {
  GroundType type = GroundType::Flat;
  double z_offset = 0.0;
  double slope_x = 0.0;  // dz/dx for Sloped and Rutted
  double slope_y = 0.0;
  double rut_amplitude = 0.0;   // Rutted: z += A * sin(2*pi*x/wavelength)
  double rut_wavelength = 3.0;
};

struct ObstacleSpec {
  enum class Type { Box, Cylinder, WarmCylinder, Overhang };
  Type type = Type::Box;
  double x = 5.0;
  double y = 0.0;
  double size_x = 1.0;  // box / overhang footprint
  double size_y = 1.0;
  double radius = 0.3;   // cylinders
  double height = 2.0;   // top, above local ground
  double z_bottom = 0.0; // bottom, above local ground (overhangs)
  double reflectivity = 1.0;
  std::optional<double> temperature;  // default: ambient, or 310 K for WarmCylinder
  geo3d::Color color{0.5, 0.5, 0.5};
};

struct CropRegion {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  double mean_height = 1.5;
  double height_std = 0.3;
  double density = 40.0;  // sample points per m^2
  geo3d::Color color{0.3, 0.6, 0.2};
};

struct SceneSpec {
  GroundSpec ground;
  std::vector<ObstacleSpec> obstacles;
  std::vector<CropRegion> crops;
  double ambient_temperature = 288.0;
  std::uint64_t seed = 0;
};

struct StereoParams {
  double baseline = 0.80;      // m; rig offers 0.12 / 0.24 / 0.40 / 0.80
  double focal_px = 300.0;
  int image_width = 160;
  int image_height = 120;
  double disparity_noise = 0.25;  // px
  double min_range = 2.0;
  double max_range = 30.0;
  double cam_height = 1.5;
  double pitch = 0.15;  // rad, downward
};

struct LidarParams {
  int ring_count = 16;
  double elevation_min = -0.5;  // rad
  double elevation_max = 0.15;
  double azimuth_resolution = 0.035;  // rad (~2 deg)
  double azimuth_fov = 2.0;           // rad, centred on +x
  double max_range = 17.0;
  double range_noise = 0.02;
  double sensor_height = 1.0;
};

struct RadarParams {
  int range_bins = 400;
  int azimuth_bins = 720;
  double range_resolution = 0.25;
  double min_range = 3.0;
  double clutter_mean = 1.0;
  double target_gain = 5.0;     // per meter of vertical extent in the fan
  double vertical_fov = 0.4363; // 25 deg
  double sensor_height = 2.0;
};

struct ThermalParams {
  double noise_sigma = 0.5;       // K
  double match_tolerance = 0.15;  // m, obstacle lookup slack for noisy points
};

struct SensorParams {
  StereoParams stereo;
  LidarParams lidar;
  RadarParams radar;
  ThermalParams thermal;
};

struct RayHit {
  double t = 0.0;
  double x = 0.0, y = 0.0, z = 0.0;
  geo3d::Color color;
  double temperature = 288.0;
};

struct TrueObstacle {
  double x = 0.0;
  double y = 0.0;
  double height = 0.0;  // above local ground
  std::vector<std::pair<double, double>> footprint;  // convex, counter-clockwise
};

struct GroundTruth {
  fuse::TraversabilityMap map;  // Ground / NonGround per cell
  std::vector<TrueObstacle> obstacles;
};

struct GroundTruthParams {
  double clearance = 2.5;    // overhangs above this are safe
  double slope_limit = 0.6;  // rad, on the local surface gradient
};

// Analytic scene: height field plus parametric obstacles.
class Scene {
 public:
  explicit Scene(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  double ground_height(double x, double y) const;
  bool occupancy(double x, double y, double z) const;
  double temperature(double x, double y, double z, double tolerance = 0.0) const;

  // Nearest solid intersection (ground or obstacle) along origin + t*dir.
  std::optional<RayHit> raycast(const double origin[3], const double dir[3], double t_min,
                                double t_max) const;

 private:
  SceneSpec spec_;
};

Scene generate_scene(const SceneSpec& spec);

geo3d::PointCloud render_stereo_cloud(const Scene& scene, const StereoParams& params,
                                      std::uint64_t seed_stream = 1);
geo3d::PointCloud render_lidar_scan(const Scene& scene, const LidarParams& params,
                                    std::uint64_t seed_stream = 2);
radar::RadarImage render_radar_image(const Scene& scene, const RadarParams& params,
                                     std::uint64_t seed_stream = 3);
geo3d::PointCloud render_thermal_points(const Scene& scene, const ThermalParams& params,
                                        const geo3d::PointCloud& cloud,
                                        std::uint64_t seed_stream = 4);

GroundTruth ground_truth(const Scene& scene, double origin_x, double origin_y, double cell_size,
                         int n_rows, int n_cols, const GroundTruthParams& params = {});

// Seed-derived independent RNG stream (splitmix64 mixing).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

SceneSpec read_scene_spec_file(const std::string& path);

}  // namespace agriperc::sim
