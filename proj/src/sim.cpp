#include "agriperc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "agriperc/config.hpp"

namespace agriperc::sim {

namespace {

constexpr double kPi = std::numbers::pi;
const geo3d::Color kGroundColor{0.35, 0.30, 0.20};

double splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return static_cast<double>(z ^ (z >> 31));
}

double obstacle_temperature(const ObstacleSpec& o, double ambient) {
  if (o.temperature) return *o.temperature;
  return o.type == ObstacleSpec::Type::WarmCylinder ? 310.0 : ambient;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
  (void)splitmix64(state);
  return state;
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {}

Scene generate_scene(const SceneSpec& spec) { return Scene(spec); }

double Scene::ground_height(double x, double y) const {
  const GroundSpec& g = spec_.ground;
  double z = g.z_offset;
  switch (g.type) {
    case GroundType::Flat:
      break;
    case GroundType::Sloped:
      z += g.slope_x * x + g.slope_y * y;
      break;
    case GroundType::Rutted:
      z += g.slope_x * x + g.slope_y * y +
           g.rut_amplitude * std::sin(2.0 * kPi * x / g.rut_wavelength);
      break;
  }
  return z;
}

bool Scene::occupancy(double x, double y, double z) const {
  for (const ObstacleSpec& o : spec_.obstacles) {
    const double gz = ground_height(o.x, o.y);
    const double zb = gz + o.z_bottom;
    const double zt = gz + o.height;
    if (z < zb || z > zt) continue;
    switch (o.type) {
      case ObstacleSpec::Type::Box:
      case ObstacleSpec::Type::Overhang:
        if (std::abs(x - o.x) <= o.size_x / 2.0 && std::abs(y - o.y) <= o.size_y / 2.0) {
          return true;
        }
        break;
      case ObstacleSpec::Type::Cylinder:
      case ObstacleSpec::Type::WarmCylinder: {
        const double dx = x - o.x, dy = y - o.y;
        if (dx * dx + dy * dy <= o.radius * o.radius) return true;
        break;
      }
    }
  }
  return false;
}

double Scene::temperature(double x, double y, double z, double tolerance) const {
  for (const ObstacleSpec& o : spec_.obstacles) {
    const double gz = ground_height(o.x, o.y);
    const double zb = gz + o.z_bottom - tolerance;
    const double zt = gz + o.height + tolerance;
    if (z < zb || z > zt) continue;
    switch (o.type) {
      case ObstacleSpec::Type::Box:
      case ObstacleSpec::Type::Overhang:
        if (std::abs(x - o.x) <= o.size_x / 2.0 + tolerance &&
            std::abs(y - o.y) <= o.size_y / 2.0 + tolerance) {
          return obstacle_temperature(o, spec_.ambient_temperature);
        }
        break;
      case ObstacleSpec::Type::Cylinder:
      case ObstacleSpec::Type::WarmCylinder: {
        const double dx = x - o.x, dy = y - o.y;
        const double r = o.radius + tolerance;
        if (dx * dx + dy * dy <= r * r) {
          return obstacle_temperature(o, spec_.ambient_temperature);
        }
        break;
      }
    }
  }
  return spec_.ambient_temperature;
}

namespace {

struct Candidate {
  double t;
  geo3d::Color color;
  double temperature;
};

// f(t) = ray height above the ground surface.
double ground_clearance(const Scene& scene, const double o[3], const double d[3], double t) {
  const double x = o[0] + t * d[0];
  const double y = o[1] + t * d[1];
  const double z = o[2] + t * d[2];
  return z - scene.ground_height(x, y);
}

std::optional<double> intersect_ground(const Scene& scene, const SceneSpec& spec,
                                       const double o[3], const double d[3], double t_min,
                                       double t_max) {
  const GroundSpec& g = spec.ground;
  if (g.type != GroundType::Rutted) {
    // Planar ground: z - sx*x - sy*y = z_offset.
    const double sx = g.type == GroundType::Flat ? 0.0 : g.slope_x;
    const double sy = g.type == GroundType::Flat ? 0.0 : g.slope_y;
    const double denom = d[2] - sx * d[0] - sy * d[1];
    if (denom == 0.0) return std::nullopt;
    const double t = (g.z_offset - (o[2] - sx * o[0] - sy * o[1])) / denom;
    if (t < t_min || t > t_max) return std::nullopt;
    return t;
  }
  // Sinusoidal ruts: march, then bisect the first sign change.
  const double step = std::min(g.rut_wavelength / 20.0, 0.25);
  double t_prev = t_min;
  double f_prev = ground_clearance(scene, o, d, t_prev);
  if (f_prev <= 0.0) return t_min;
  for (double t = t_min + step; t <= t_max + step; t += step) {
    const double tc = std::min(t, t_max);
    const double f = ground_clearance(scene, o, d, tc);
    if (f <= 0.0) {
      double lo = t_prev, hi = tc;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ground_clearance(scene, o, d, mid) > 0.0) lo = mid;
        else hi = mid;
      }
      return 0.5 * (lo + hi);
    }
    t_prev = tc;
    f_prev = f;
    if (tc >= t_max) break;
  }
  return std::nullopt;
}

std::optional<double> intersect_aabb(double min_x, double max_x, double min_y, double max_y,
                                     double min_z, double max_z, const double o[3],
                                     const double d[3], double t_min, double t_max) {
  double lo = t_min, hi = t_max;
  const double mins[3] = {min_x, min_y, min_z};
  const double maxs[3] = {max_x, max_y, max_z};
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < mins[i] || o[i] > maxs[i]) return std::nullopt;
      continue;
    }
    double t0 = (mins[i] - o[i]) / d[i];
    double t1 = (maxs[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return std::nullopt;
  }
  return lo;
}

std::optional<double> intersect_cylinder(double cx, double cy, double radius, double z_lo,
                                         double z_hi, const double o[3], const double d[3],
                                         double t_min, double t_max) {
  const double ox = o[0] - cx, oy = o[1] - cy;
  const double a = d[0] * d[0] + d[1] * d[1];
  const double b = 2.0 * (ox * d[0] + oy * d[1]);
  const double c = ox * ox + oy * oy - radius * radius;
  double best = std::numeric_limits<double>::infinity();
  if (a > 0.0) {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t < t_min || t > t_max) continue;
        const double z = o[2] + t * d[2];
        if (z >= z_lo && z <= z_hi) best = std::min(best, t);
      }
    }
  }
  // Top cap.
  if (d[2] != 0.0) {
    const double t = (z_hi - o[2]) / d[2];
    if (t >= t_min && t <= t_max) {
      const double x = ox + t * d[0], y = oy + t * d[1];
      if (x * x + y * y <= radius * radius) best = std::min(best, t);
    }
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

}  // namespace

std::optional<RayHit> Scene::raycast(const double origin[3], const double dir[3], double t_min,
                                     double t_max) const {
  std::optional<Candidate> best;
  auto consider = [&](std::optional<double> t, const geo3d::Color& color, double temp) {
    if (!t) return;
    if (!best || *t < best->t) best = Candidate{*t, color, temp};
  };

  consider(intersect_ground(*this, spec_, origin, dir, t_min, t_max), kGroundColor,
           spec_.ambient_temperature);

  for (const ObstacleSpec& o : spec_.obstacles) {
    const double gz = ground_height(o.x, o.y);
    const double z_lo = gz + o.z_bottom;
    const double z_hi = gz + o.height;
    const double temp = obstacle_temperature(o, spec_.ambient_temperature);
    switch (o.type) {
      case ObstacleSpec::Type::Box:
      case ObstacleSpec::Type::Overhang:
        consider(intersect_aabb(o.x - o.size_x / 2.0, o.x + o.size_x / 2.0, o.y - o.size_y / 2.0,
                                o.y + o.size_y / 2.0, z_lo, z_hi, origin, dir, t_min, t_max),
                 o.color, temp);
        break;
      case ObstacleSpec::Type::Cylinder:
      case ObstacleSpec::Type::WarmCylinder:
        consider(intersect_cylinder(o.x, o.y, o.radius, z_lo, z_hi, origin, dir, t_min, t_max),
                 o.color, temp);
        break;
    }
  }
  if (!best) return std::nullopt;
  RayHit hit;
  hit.t = best->t;
  hit.x = origin[0] + best->t * dir[0];
  hit.y = origin[1] + best->t * dir[1];
  hit.z = origin[2] + best->t * dir[2];
  hit.color = best->color;
  hit.temperature = best->temperature;
  return hit;
}

geo3d::PointCloud render_stereo_cloud(const Scene& scene, const StereoParams& params,
                                      std::uint64_t seed_stream) {
  std::mt19937_64 rng(mix_seed(scene.spec().seed, seed_stream));
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double origin[3] = {0.0, 0.0, params.cam_height};
  const double cp = std::cos(params.pitch), sp = std::sin(params.pitch);
  const double fwd[3] = {cp, 0.0, -sp};
  const double right[3] = {0.0, -1.0, 0.0};
  const double down[3] = {-sp, 0.0, -cp};
  const double cx = params.image_width / 2.0;
  const double cy = params.image_height / 2.0;

  geo3d::PointCloud cloud;
  for (int py = 0; py < params.image_height; ++py) {
    for (int px = 0; px < params.image_width; ++px) {
      const double u = (px + 0.5 - cx) / params.focal_px;
      const double v = (py + 0.5 - cy) / params.focal_px;
      double dir[3];
      for (int i = 0; i < 3; ++i) dir[i] = fwd[i] + u * right[i] + v * down[i];
      const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      for (double& c : dir) c /= norm;
      const double cos_axis = dir[0] * fwd[0] + dir[1] * fwd[1] + dir[2] * fwd[2];
      const auto hit = scene.raycast(origin, dir, 0.1, params.max_range / cos_axis);
      if (!hit) continue;
      const double depth = hit->t * cos_axis;
      if (depth < params.min_range || depth > params.max_range) continue;
      // Triangulation error grows quadratically with depth.
      const double sigma_z =
          depth * depth / (params.focal_px * params.baseline) * params.disparity_noise;
      const double dn = sigma_z * gauss(rng);
      const double t2 = hit->t * (1.0 + dn / depth);
      geo3d::Point3 p;
      p.x = origin[0] + t2 * dir[0];
      p.y = origin[1] + t2 * dir[1];
      p.z = origin[2] + t2 * dir[2];
      p.color = hit->color;
      cloud.points.push_back(p);
    }
  }

  // Tall vegetation returns: sampled directly, not ray-cast.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const CropRegion& crop : scene.spec().crops) {
    const double area = std::max(0.0, (crop.x1 - crop.x0) * (crop.y1 - crop.y0));
    const auto n = static_cast<long>(std::llround(crop.density * area));
    for (long i = 0; i < n; ++i) {
      const double x = crop.x0 + uni(rng) * (crop.x1 - crop.x0);
      const double y = crop.y0 + uni(rng) * (crop.y1 - crop.y0);
      const double stalk = std::max(0.05, crop.mean_height + crop.height_std * gauss(rng));
      const double z = scene.ground_height(x, y) + uni(rng) * stalk;
      double dir[3] = {x - origin[0], y - origin[1], z - origin[2]};
      const double dist = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      for (double& c : dir) c /= dist;
      const double depth = dist * (dir[0] * fwd[0] + dir[1] * fwd[1] + dir[2] * fwd[2]);
      if (depth < params.min_range || depth > params.max_range) continue;
      const double u = (dir[0] * right[0] + dir[1] * right[1] + dir[2] * right[2]) / (depth / dist);
      const double v = (dir[0] * down[0] + dir[1] * down[1] + dir[2] * down[2]) / (depth / dist);
      if (std::abs(u) > cx / params.focal_px || std::abs(v) > cy / params.focal_px) continue;
      // Solid obstacles occlude vegetation.
      const auto block = scene.raycast(origin, dir, 0.1, dist - 1e-6);
      if (block) continue;
      const double sigma_z =
          depth * depth / (params.focal_px * params.baseline) * params.disparity_noise;
      const double dn = sigma_z * gauss(rng);
      const double t2 = dist * (1.0 + dn / depth);
      geo3d::Point3 p;
      p.x = origin[0] + t2 * dir[0];
      p.y = origin[1] + t2 * dir[1];
      p.z = origin[2] + t2 * dir[2];
      p.color = crop.color;
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

geo3d::PointCloud render_lidar_scan(const Scene& scene, const LidarParams& params,
                                    std::uint64_t seed_stream) {
  std::mt19937_64 rng(mix_seed(scene.spec().seed, seed_stream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double origin[3] = {0.0, 0.0, params.sensor_height};
  geo3d::PointCloud cloud;
  for (int ring = 0; ring < params.ring_count; ++ring) {
    const double elev = params.ring_count == 1
                            ? params.elevation_min
                            : params.elevation_min + (params.elevation_max - params.elevation_min) *
                                                         ring / (params.ring_count - 1);
    const double ce = std::cos(elev), se = std::sin(elev);
    for (double az = -params.azimuth_fov / 2.0; az <= params.azimuth_fov / 2.0;
         az += params.azimuth_resolution) {
      const double dir[3] = {ce * std::cos(az), ce * std::sin(az), se};
      const auto hit = scene.raycast(origin, dir, 0.5, params.max_range);
      if (!hit) continue;
      const double t2 = hit->t + params.range_noise * gauss(rng);
      geo3d::Point3 p;
      p.x = origin[0] + t2 * dir[0];
      p.y = origin[1] + t2 * dir[1];
      p.z = origin[2] + t2 * dir[2];
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

radar::RadarImage render_radar_image(const Scene& scene, const RadarParams& params,
                                     std::uint64_t seed_stream) {
  std::mt19937_64 rng(mix_seed(scene.spec().seed, seed_stream));
  std::exponential_distribution<double> clutter(1.0 / params.clutter_mean);

  radar::RadarImage img;
  img.range_bins = params.range_bins;
  img.azimuth_bins = params.azimuth_bins;
  img.range_resolution = params.range_resolution;
  img.min_range = params.min_range;
  img.intensities.resize(static_cast<std::size_t>(params.range_bins) * params.azimuth_bins);
  for (double& v : img.intensities) v = clutter(rng);

  const double az_res = 2.0 * kPi / params.azimuth_bins;
  const double tan_half_fov = std::tan(params.vertical_fov / 2.0);

  for (const ObstacleSpec& o : scene.spec().obstacles) {
    const double gz = scene.ground_height(o.x, o.y);
    const double z_lo = gz + o.z_bottom;
    const double z_hi = gz + o.height;
    const double rc = std::hypot(o.x, o.y);
    if (rc <= 0.0) continue;
    const double theta_c = std::atan2(o.y, o.x);

    double r0, r1, half_angle;
    if (o.type == ObstacleSpec::Type::Cylinder || o.type == ObstacleSpec::Type::WarmCylinder) {
      r0 = rc - o.radius;
      r1 = rc + o.radius;
      half_angle = std::asin(std::min(1.0, o.radius / rc));
    } else {
      r0 = std::numeric_limits<double>::infinity();
      r1 = 0.0;
      half_angle = 0.0;
      for (int sx : {-1, 1}) {
        for (int sy : {-1, 1}) {
          const double px = o.x + sx * o.size_x / 2.0;
          const double py = o.y + sy * o.size_y / 2.0;
          const double r = std::hypot(px, py);
          r0 = std::min(r0, r);
          r1 = std::max(r1, r);
          double da = std::atan2(py, px) - theta_c;
          while (da > kPi) da -= 2.0 * kPi;
          while (da < -kPi) da += 2.0 * kPi;
          half_angle = std::max(half_angle, std::abs(da));
        }
      }
    }

    const int rb0 = std::max(0, static_cast<int>(std::floor((r0 - params.min_range) /
                                                            params.range_resolution)));
    const int rb1 = std::min(params.range_bins - 1,
                             static_cast<int>(std::floor((r1 - params.min_range) /
                                                         params.range_resolution)));
    for (int rb = rb0; rb <= rb1; ++rb) {
      const double r = params.min_range + (rb + 0.5) * params.range_resolution;
      const double fan_lo = params.sensor_height - r * tan_half_fov;
      const double fan_hi = params.sensor_height + r * tan_half_fov;
      const double overlap = std::min(z_hi, fan_hi) - std::max(z_lo, fan_lo);
      if (overlap <= 0.0) continue;
      const double gain = params.target_gain * o.reflectivity * overlap;
      const int ab_span = static_cast<int>(std::ceil(half_angle / az_res));
      const int ab_c = static_cast<int>(std::floor((theta_c < 0 ? theta_c + 2.0 * kPi : theta_c) /
                                                   az_res));
      for (int da = -ab_span; da <= ab_span; ++da) {
        int ab = (ab_c + da) % params.azimuth_bins;
        if (ab < 0) ab += params.azimuth_bins;
        img.at(rb, ab) += gain;
      }
    }
  }
  return img;
}

geo3d::PointCloud render_thermal_points(const Scene& scene, const ThermalParams& params,
                                        const geo3d::PointCloud& cloud,
                                        std::uint64_t seed_stream) {
  std::mt19937_64 rng(mix_seed(scene.spec().seed, seed_stream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  geo3d::PointCloud out = cloud;
  for (auto& p : out.points) {
    const double t = scene.temperature(p.x, p.y, p.z, params.match_tolerance);
    p.temperature = t + params.noise_sigma * gauss(rng);
  }
  return out;
}

namespace {

bool footprint_intersects_cell(const ObstacleSpec& o, double x0, double y0, double x1, double y1) {
  switch (o.type) {
    case ObstacleSpec::Type::Box:
    case ObstacleSpec::Type::Overhang:
      return o.x + o.size_x / 2.0 > x0 && o.x - o.size_x / 2.0 < x1 &&
             o.y + o.size_y / 2.0 > y0 && o.y - o.size_y / 2.0 < y1;
    case ObstacleSpec::Type::Cylinder:
    case ObstacleSpec::Type::WarmCylinder: {
      const double nx = std::clamp(o.x, x0, x1);
      const double ny = std::clamp(o.y, y0, y1);
      const double dx = o.x - nx, dy = o.y - ny;
      return dx * dx + dy * dy < o.radius * o.radius;
    }
  }
  return false;
}

}  // namespace

GroundTruth ground_truth(const Scene& scene, double origin_x, double origin_y, double cell_size,
                         int n_rows, int n_cols, const GroundTruthParams& params) {
  GroundTruth gt;
  gt.map = fuse::TraversabilityMap(origin_x, origin_y, cell_size, n_rows, n_cols);
  const GroundSpec& g = scene.spec().ground;
  for (int row = 0; row < n_rows; ++row) {
    for (int col = 0; col < n_cols; ++col) {
      const double x0 = origin_x + col * cell_size;
      const double y0 = origin_y + row * cell_size;
      const double x1 = x0 + cell_size;
      const double y1 = y0 + cell_size;
      bool blocked = false;
      for (const ObstacleSpec& o : scene.spec().obstacles) {
        if (o.z_bottom >= params.clearance) continue;  // high overhang, safe
        if (footprint_intersects_cell(o, x0, y0, x1, y1)) {
          blocked = true;
          break;
        }
      }
      if (!blocked) {
        const double xc = (x0 + x1) / 2.0;
        double grad_x = g.type == GroundType::Flat ? 0.0 : g.slope_x;
        const double grad_y = g.type == GroundType::Flat ? 0.0 : g.slope_y;
        if (g.type == GroundType::Rutted) {
          grad_x += g.rut_amplitude * 2.0 * kPi / g.rut_wavelength *
                    std::cos(2.0 * kPi * xc / g.rut_wavelength);
        }
        if (std::atan(std::hypot(grad_x, grad_y)) > params.slope_limit) blocked = true;
      }
      gt.map.at(row, col).patch.label = blocked ? fuse::Label::NonGround : fuse::Label::Ground;
    }
  }
  for (const ObstacleSpec& o : scene.spec().obstacles) {
    TrueObstacle t;
    t.x = o.x;
    t.y = o.y;
    t.height = o.height;
    if (o.type == ObstacleSpec::Type::Cylinder || o.type == ObstacleSpec::Type::WarmCylinder) {
      for (int i = 0; i < 16; ++i) {
        const double a = 2.0 * kPi * i / 16;
        t.footprint.emplace_back(o.x + o.radius * std::cos(a), o.y + o.radius * std::sin(a));
      }
    } else {
      t.footprint = {{o.x - o.size_x / 2.0, o.y - o.size_y / 2.0},
                     {o.x + o.size_x / 2.0, o.y - o.size_y / 2.0},
                     {o.x + o.size_x / 2.0, o.y + o.size_y / 2.0},
                     {o.x - o.size_x / 2.0, o.y + o.size_y / 2.0}};
    }
    gt.obstacles.push_back(std::move(t));
  }
  return gt;
}

SceneSpec read_scene_spec_file(const std::string& path) {
  SceneSpec spec;
  for (const config::Section& s : config::parse_sections_file(path)) {
    if (s.name == "scene") {
      spec.ambient_temperature = s.get_double("ambient_temperature", spec.ambient_temperature);
      spec.seed = s.get_u64("seed", spec.seed);
    } else if (s.name == "ground") {
      const std::string type = s.get("type", "flat");
      if (type == "flat") spec.ground.type = GroundType::Flat;
      else if (type == "sloped") spec.ground.type = GroundType::Sloped;
      else if (type == "rutted") spec.ground.type = GroundType::Rutted;
      else throw std::runtime_error("scene spec: unknown ground type: " + type);
      spec.ground.z_offset = s.get_double("z_offset", spec.ground.z_offset);
      spec.ground.slope_x = s.get_double("slope_x", spec.ground.slope_x);
      spec.ground.slope_y = s.get_double("slope_y", spec.ground.slope_y);
      spec.ground.rut_amplitude = s.get_double("rut_amplitude", spec.ground.rut_amplitude);
      spec.ground.rut_wavelength = s.get_double("rut_wavelength", spec.ground.rut_wavelength);
    } else if (s.name == "obstacle") {
      ObstacleSpec o;
      const std::string type = s.get("type", "box");
      if (type == "box") o.type = ObstacleSpec::Type::Box;
      else if (type == "cylinder") o.type = ObstacleSpec::Type::Cylinder;
      else if (type == "warm_cylinder") o.type = ObstacleSpec::Type::WarmCylinder;
      else if (type == "overhang") o.type = ObstacleSpec::Type::Overhang;
      else throw std::runtime_error("scene spec: unknown obstacle type: " + type);
      o.x = s.get_double("x", o.x);
      o.y = s.get_double("y", o.y);
      o.size_x = s.get_double("size_x", o.size_x);
      o.size_y = s.get_double("size_y", o.size_y);
      o.radius = s.get_double("radius", o.radius);
      o.height = s.get_double("height", o.height);
      o.z_bottom = s.get_double("z_bottom", o.z_bottom);
      o.reflectivity = s.get_double("reflectivity", o.reflectivity);
      if (s.has("temperature")) o.temperature = s.get_double("temperature", 288.0);
      o.color.r = s.get_double("color_r", o.color.r);
      o.color.g = s.get_double("color_g", o.color.g);
      o.color.b = s.get_double("color_b", o.color.b);
      spec.obstacles.push_back(o);
    } else if (s.name == "crop") {
      CropRegion c;
      c.x0 = s.get_double("x0", c.x0);
      c.y0 = s.get_double("y0", c.y0);
      c.x1 = s.get_double("x1", c.x1);
      c.y1 = s.get_double("y1", c.y1);
      c.mean_height = s.get_double("mean_height", c.mean_height);
      c.height_std = s.get_double("height_std", c.height_std);
      c.density = s.get_double("density", c.density);
      c.color.r = s.get_double("color_r", c.color.r);
      c.color.g = s.get_double("color_g", c.color.g);
      c.color.b = s.get_double("color_b", c.color.b);
      spec.crops.push_back(c);
    } else {
      throw std::runtime_error("scene spec: unknown section: [" + s.name + "]");
    }
  }
  return spec;
}

}  // namespace agriperc::sim
