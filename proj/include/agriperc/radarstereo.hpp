#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "agriperc/fuse.hpp"
#include "agriperc/geo3d.hpp"
#include "agriperc/radar.hpp"

namespace agriperc::radarstereo {

// Stereo points falling inside a radar obstacle's dilated footprint.
struct SubCloud {
  std::vector<geo3d::Point3> points;
  const radar::RadarObstacle* source = nullptr;
};

struct GroundLevel {
  double z0 = 0.0;
  bool low_confidence = false;  // fallback: min z of the sub-cloud
};

struct ObstacleInfo {
  double centroid_x = 0.0;  // from radar
  double centroid_y = 0.0;
  double max_height = 0.0;  // above local ground, clamped at 0
  std::array<double, 3> bbox_min{};
  std::array<double, 3> bbox_max{};
  std::optional<geo3d::Color> mean_color;
  std::size_t point_count = 0;
};

// Euclidean distance from (x, y) to the hull: 0 inside, min edge distance
// outside. Degenerate hulls (point, segment) are handled.
double distance_to_hull(const std::vector<std::pair<double, double>>& hull, double x, double y);

SubCloud extract_subcloud(const geo3d::PointCloud& cloud, const radar::RadarObstacle& obstacle,
                          double margin = 0.5);

// Ground reference: median z of Ground-labelled points within a 2 m annulus
// around the dilated hull. Throws std::runtime_error when neither ground
// points nor a sub-cloud fallback exist.
GroundLevel estimate_ground_level(const fuse::TraversabilityMap& map,
                                  const geo3d::PointCloud& cloud,
                                  const radar::RadarObstacle& obstacle, double margin = 0.5,
                                  double annulus_width = 2.0);

ObstacleInfo characterize(const SubCloud& sub, double z0);

void write_obstacle_csv_header(std::ostream& out);
void write_obstacle_csv_row(std::ostream& out, int frame, int id, const ObstacleInfo& info);

}  // namespace agriperc::radarstereo
