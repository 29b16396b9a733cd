#include "agriperc/radarstereo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace agriperc::radarstereo {

namespace {

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double abx = bx - ax, aby = by - ay;
  const double len2 = abx * abx + aby * aby;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((px - ax) * abx + (py - ay) * aby) / len2, 0.0, 1.0);
  }
  const double cx = ax + t * abx, cy = ay + t * aby;
  return std::hypot(px - cx, py - cy);
}

bool inside_convex(const std::vector<std::pair<double, double>>& hull, double x, double y) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double cross = (b.first - a.first) * (y - a.second) -
                         (b.second - a.second) * (x - a.first);
    if (cross < 0.0) return false;  // hull is counter-clockwise
  }
  return true;
}

}  // namespace

double distance_to_hull(const std::vector<std::pair<double, double>>& hull, double x, double y) {
  if (hull.empty()) return std::numeric_limits<double>::infinity();
  if (hull.size() == 1) return std::hypot(x - hull[0].first, y - hull[0].second);
  if (inside_convex(hull, x, y)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    best = std::min(best, point_segment_distance(x, y, a.first, a.second, b.first, b.second));
  }
  return best;
}

SubCloud extract_subcloud(const geo3d::PointCloud& cloud, const radar::RadarObstacle& obstacle,
                          double margin) {
  if (margin < 0.0) throw std::invalid_argument("extract_subcloud: margin must be >= 0");
  SubCloud sub;
  sub.source = &obstacle;
  for (const auto& p : cloud.points) {
    if (distance_to_hull(obstacle.hull, p.x, p.y) <= margin) {
      sub.points.push_back(p);
    }
  }
  return sub;
}

GroundLevel estimate_ground_level(const fuse::TraversabilityMap& map,
                                  const geo3d::PointCloud& cloud,
                                  const radar::RadarObstacle& obstacle, double margin,
                                  double annulus_width) {
  std::vector<double> ground_z;
  std::vector<double> sub_z;
  for (const auto& p : cloud.points) {
    const double d = distance_to_hull(obstacle.hull, p.x, p.y);
    if (d <= margin) {
      sub_z.push_back(p.z);
      continue;
    }
    if (d > margin + annulus_width) continue;
    const auto col = static_cast<long>(std::floor((p.x - map.origin_x) / map.patch_size));
    const auto row = static_cast<long>(std::floor((p.y - map.origin_y) / map.patch_size));
    if (col < 0 || col >= map.n_cols || row < 0 || row >= map.n_rows) continue;
    if (map.at(static_cast<int>(row), static_cast<int>(col)).patch.label == fuse::Label::Ground) {
      ground_z.push_back(p.z);
    }
  }
  GroundLevel g;
  if (!ground_z.empty()) {
    const std::size_t mid = ground_z.size() / 2;
    std::nth_element(ground_z.begin(), ground_z.begin() + mid, ground_z.end());
    if (ground_z.size() % 2 == 1) {
      g.z0 = ground_z[mid];
    } else {
      const double hi = ground_z[mid];
      const double lo = *std::max_element(ground_z.begin(), ground_z.begin() + mid);
      g.z0 = 0.5 * (lo + hi);
    }
    return g;
  }
  if (!sub_z.empty()) {
    g.z0 = *std::min_element(sub_z.begin(), sub_z.end());
    g.low_confidence = true;
    return g;
  }
  throw std::runtime_error("estimate_ground_level: no ground reference available");
}

ObstacleInfo characterize(const SubCloud& sub, double z0) {
  if (sub.points.empty()) {
    throw std::invalid_argument("characterize: empty sub-cloud");
  }
  ObstacleInfo info;
  if (sub.source) {
    info.centroid_x = sub.source->centroid_x;
    info.centroid_y = sub.source->centroid_y;
  }
  info.point_count = sub.points.size();
  info.bbox_min = {sub.points[0].x, sub.points[0].y, sub.points[0].z};
  info.bbox_max = info.bbox_min;
  double zmax = sub.points[0].z;
  double cr = 0.0, cg = 0.0, cb = 0.0;
  std::size_t nc = 0;
  for (const auto& p : sub.points) {
    info.bbox_min[0] = std::min(info.bbox_min[0], p.x);
    info.bbox_min[1] = std::min(info.bbox_min[1], p.y);
    info.bbox_min[2] = std::min(info.bbox_min[2], p.z);
    info.bbox_max[0] = std::max(info.bbox_max[0], p.x);
    info.bbox_max[1] = std::max(info.bbox_max[1], p.y);
    info.bbox_max[2] = std::max(info.bbox_max[2], p.z);
    zmax = std::max(zmax, p.z);
    if (p.color) {
      cr += p.color->r;
      cg += p.color->g;
      cb += p.color->b;
      ++nc;
    }
  }
  info.max_height = std::max(0.0, zmax - z0);
  if (nc > 0) {
    info.mean_color = geo3d::Color{cr / nc, cg / nc, cb / nc};
  }
  return info;
}

void write_obstacle_csv_header(std::ostream& out) {
  out << "frame,id,cx,cy,max_height,bbox_min_x,bbox_min_y,bbox_min_z,"
         "bbox_max_x,bbox_max_y,bbox_max_z,r,g,b,n\n";
}

void write_obstacle_csv_row(std::ostream& out, int frame, int id, const ObstacleInfo& info) {
  char buf[512];
  const geo3d::Color c = info.mean_color.value_or(geo3d::Color{-1.0, -1.0, -1.0});
  std::snprintf(buf, sizeof(buf),
                "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                "%zu\n",
                frame, id, info.centroid_x, info.centroid_y, info.max_height, info.bbox_min[0],
                info.bbox_min[1], info.bbox_min[2], info.bbox_max[0], info.bbox_max[1],
                info.bbox_max[2], c.r, c.g, c.b, info.point_count);
  out << buf;
}

}  // namespace agriperc::radarstereo
