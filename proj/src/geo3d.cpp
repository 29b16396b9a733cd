#include "agriperc/geo3d.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace agriperc::geo3d {

namespace {

std::int64_t floor_div_index(double v, double size) {
  return static_cast<std::int64_t>(std::floor(v / size));
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, const VoxelGridParams& params) {
  if (!(params.voxel_size > 0.0)) {
    throw std::invalid_argument("voxel_downsample: voxel_size must be > 0");
  }
  struct Accum {
    double x = 0, y = 0, z = 0;
    double r = 0, g = 0, b = 0;
    double t = 0;
    std::size_t n = 0;
    std::size_t n_color = 0;
    std::size_t n_temp = 0;
  };
  // std::map keeps voxel ordering deterministic.
  std::map<std::array<std::int64_t, 3>, Accum> voxels;
  const double s = params.voxel_size;
  for (const Point3& p : cloud.points) {
    std::array<std::int64_t, 3> key{floor_div_index(p.x, s), floor_div_index(p.y, s),
                                    floor_div_index(p.z, s)};
    Accum& a = voxels[key];
    a.x += p.x;
    a.y += p.y;
    a.z += p.z;
    ++a.n;
    if (p.color) {
      a.r += p.color->r;
      a.g += p.color->g;
      a.b += p.color->b;
      ++a.n_color;
    }
    if (p.temperature) {
      a.t += *p.temperature;
      ++a.n_temp;
    }
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(voxels.size());
  for (const auto& [key, a] : voxels) {
    Point3 p;
    p.x = a.x / static_cast<double>(a.n);
    p.y = a.y / static_cast<double>(a.n);
    p.z = a.z / static_cast<double>(a.n);
    if (a.n_color == a.n && a.n > 0) {
      p.color = Color{a.r / a.n, a.g / a.n, a.b / a.n};
    }
    if (a.n_temp == a.n && a.n > 0) {
      p.temperature = a.t / a.n;
    }
    out.points.push_back(p);
  }
  return out;
}

PatchGrid build_patch_grid(const PointCloud& cloud, double origin_x, double origin_y,
                           double patch_size, int n_rows, int n_cols) {
  if (!(patch_size > 0.0)) {
    throw std::invalid_argument("build_patch_grid: patch_size must be > 0");
  }
  if (n_rows < 1 || n_cols < 1) {
    throw std::invalid_argument("build_patch_grid: grid must be at least 1x1");
  }
  PatchGrid grid;
  grid.origin_x = origin_x;
  grid.origin_y = origin_y;
  grid.patch_size = patch_size;
  grid.n_rows = n_rows;
  grid.n_cols = n_cols;
  grid.patches.assign(static_cast<std::size_t>(n_rows) * n_cols, {});
  for (int i = 0; i < static_cast<int>(cloud.points.size()); ++i) {
    const Point3& p = cloud.points[i];
    const double fx = (p.x - origin_x) / patch_size;
    const double fy = (p.y - origin_y) / patch_size;
    const auto col = static_cast<std::int64_t>(std::floor(fx));
    const auto row = static_cast<std::int64_t>(std::floor(fy));
    if (col < 0 || col >= n_cols || row < 0 || row >= n_rows) {
      ++grid.dropped;
      continue;
    }
    grid.patches[grid.index(static_cast<int>(row), static_cast<int>(col))].push_back(i);
  }
  return grid;
}

Plane fit_plane_lsq(const std::vector<Point3>& points) {
  if (points.size() < 3) {
    throw std::domain_error("fit_plane_lsq: need at least 3 points");
  }
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Point3& p : points) centroid += Eigen::Vector3d(p.x, p.y, p.z);
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : points) {
    Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d evals = es.eigenvalues();  // ascending
  // Collinear input: the two smallest eigenvalues both vanish.
  const double scale = std::max(evals(2), 1e-30);
  if (evals(1) <= 1e-12 * scale) {
    throw std::domain_error("fit_plane_lsq: points are collinear");
  }
  Eigen::Vector3d n = es.eigenvectors().col(0);
  if (n.z() < 0.0 || (n.z() == 0.0 && (n.x() < 0.0 || (n.x() == 0.0 && n.y() < 0.0)))) {
    n = -n;
  }
  n.normalize();
  Plane plane;
  plane.normal = {n.x(), n.y(), n.z()};
  plane.offset = n.dot(centroid);
  return plane;
}

GeoFeatures compute_patch_features(const std::vector<Point3>& points) {
  if (points.empty()) {
    throw std::invalid_argument("compute_patch_features: empty patch");
  }
  GeoFeatures f;
  f.n_points = points.size();
  double sum = 0.0, zmin = points[0].z, zmax = points[0].z;
  for (const Point3& p : points) {
    sum += p.z;
    zmin = std::min(zmin, p.z);
    zmax = std::max(zmax, p.z);
  }
  const double n = static_cast<double>(points.size());
  f.mean_height = sum / n;
  double ss = 0.0;
  for (const Point3& p : points) {
    const double d = p.z - f.mean_height;
    ss += d * d;
  }
  f.height_std = std::sqrt(ss / n);
  f.height_range = zmax - zmin;

  try {
    const Plane plane = fit_plane_lsq(points);
    f.normal_z = std::clamp(plane.normal[2], 0.0, 1.0);
    double rss = 0.0;
    for (const Point3& p : points) {
      const double d = plane.normal[0] * p.x + plane.normal[1] * p.y + plane.normal[2] * p.z -
                       plane.offset;
      rss += d * d;
    }
    f.fit_residual = std::sqrt(rss / n);
  } catch (const std::domain_error&) {
    // Flat fallback for degenerate patches; callers treat these as unclassifiable.
    f.normal_z = 0.0;
    f.fit_residual = f.height_std;
    f.degenerate = true;
  }
  return f;
}

PointCloud read_point_cloud(std::istream& in) {
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty()) continue;
    if (vals.size() != 3 && vals.size() != 4 && vals.size() != 6 && vals.size() != 7) {
      throw std::runtime_error("point cloud: malformed line: " + line);
    }
    Point3 p;
    p.x = vals[0];
    p.y = vals[1];
    p.z = vals[2];
    if (vals.size() == 4) {
      p.temperature = vals[3];
    } else if (vals.size() >= 6) {
      p.color = Color{vals[3], vals[4], vals[5]};
      if (vals.size() == 7) p.temperature = vals[6];
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_point_cloud_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open point cloud file: " + path);
  return read_point_cloud(in);
}

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  char buf[256];
  for (const Point3& p : cloud.points) {
    int len = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", p.x, p.y, p.z);
    out.write(buf, len);
    if (p.color) {
      len = std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", p.color->r, p.color->g,
                          p.color->b);
      out.write(buf, len);
    }
    if (p.temperature) {
      len = std::snprintf(buf, sizeof(buf), " %.17g", *p.temperature);
      out.write(buf, len);
    }
    out.put('\n');
  }
}

void write_point_cloud_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write point cloud file: " + path);
  write_point_cloud(out, cloud);
}

}  // namespace agriperc::geo3d
