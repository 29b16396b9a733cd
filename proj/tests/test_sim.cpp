#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "agriperc/sim.hpp"
#include "doctest.h"

using namespace agriperc::sim;
namespace geo3d = agriperc::geo3d;
namespace radar = agriperc::radar;

namespace {

SceneSpec flat_empty(std::uint64_t seed = 1) {
  SceneSpec spec;
  spec.seed = seed;
  return spec;
}

ObstacleSpec box_at(double x, double y, double sx, double sy, double h) {
  ObstacleSpec o;
  o.type = ObstacleSpec::Type::Box;
  o.x = x;
  o.y = y;
  o.size_x = sx;
  o.size_y = sy;
  o.height = h;
  return o;
}

}  // namespace

TEST_CASE("scene geometry queries") {
  Scene flat = generate_scene(flat_empty());
  CHECK(flat.ground_height(0.0, 0.0) == 0.0);
  CHECK(flat.ground_height(12.3, -4.5) == 0.0);
  CHECK(!flat.occupancy(5.0, 0.0, 1.0));
  CHECK(flat.temperature(3.0, 3.0, 0.0) == 288.0);

  SceneSpec with_box = flat_empty();
  with_box.obstacles.push_back(box_at(5.0, 0.0, 1.0, 1.0, 2.0));
  Scene s = generate_scene(with_box);
  CHECK(s.occupancy(5.0, 0.0, 1.0));
  CHECK(!s.occupancy(5.0, 0.0, 2.5));
  CHECK(!s.occupancy(5.8, 0.0, 1.0));

  SceneSpec sloped = flat_empty();
  sloped.ground.type = GroundType::Sloped;
  sloped.ground.z_offset = 0.3;
  sloped.ground.slope_x = 0.1;
  sloped.ground.slope_y = -0.05;
  Scene sl = generate_scene(sloped);
  CHECK(sl.ground_height(2.0, 4.0) == doctest::Approx(0.3 + 0.2 - 0.2).epsilon(1e-12));

  SceneSpec rutted = flat_empty();
  rutted.ground.type = GroundType::Rutted;
  rutted.ground.rut_amplitude = 0.07;
  rutted.ground.rut_wavelength = 3.0;
  Scene ru = generate_scene(rutted);
  CHECK(ru.ground_height(0.75, 0.0) ==
        doctest::Approx(0.07 * std::sin(2.0 * std::numbers::pi * 0.25)).epsilon(1e-12));
}

TEST_CASE("warm cylinder defaults to 310 K with tolerance lookup") {
  SceneSpec spec = flat_empty();
  ObstacleSpec person;
  person.type = ObstacleSpec::Type::WarmCylinder;
  person.x = 8.0;
  person.y = 1.0;
  person.radius = 0.3;
  person.height = 1.8;
  spec.obstacles.push_back(person);
  Scene s = generate_scene(spec);
  CHECK(s.temperature(8.0, 1.0, 1.0) == 310.0);
  CHECK(s.temperature(8.0, 1.4, 1.0) == 288.0);          // just outside
  CHECK(s.temperature(8.0, 1.4, 1.0, 0.15) == 310.0);    // tolerance catches it
  CHECK(s.temperature(8.0, 1.0, 2.5, 0.15) == 288.0);    // above the body
}

TEST_CASE("raycast against closed-form intersections") {
  SceneSpec spec = flat_empty();
  spec.obstacles.push_back(box_at(5.0, 0.0, 1.0, 1.0, 2.0));
  ObstacleSpec cyl;
  cyl.type = ObstacleSpec::Type::Cylinder;
  cyl.x = 0.0;
  cyl.y = 8.0;
  cyl.radius = 0.5;
  cyl.height = 3.0;
  spec.obstacles.push_back(cyl);
  Scene s = generate_scene(spec);

  // Straight down: hits the ground plane.
  {
    const double o[3] = {1.0, 1.0, 5.0}, d[3] = {0.0, 0.0, -1.0};
    auto hit = s.raycast(o, d, 0.0, 100.0);
    REQUIRE(hit.has_value());
    CHECK(hit->t == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(hit->z == doctest::Approx(0.0).epsilon(1e-12));
  }
  // Horizontal +x at z = 1: front face of the box at x = 4.5.
  {
    const double o[3] = {0.0, 0.0, 1.0}, d[3] = {1.0, 0.0, 0.0};
    auto hit = s.raycast(o, d, 0.0, 100.0);
    REQUIRE(hit.has_value());
    CHECK(hit->t == doctest::Approx(4.5).epsilon(1e-12));
  }
  // Horizontal +y at z = 1: cylinder wall at y = 7.5.
  {
    const double o[3] = {0.0, 0.0, 1.0}, d[3] = {0.0, 1.0, 0.0};
    auto hit = s.raycast(o, d, 0.0, 100.0);
    REQUIRE(hit.has_value());
    CHECK(hit->t == doctest::Approx(7.5).epsilon(1e-12));
  }
  // Above the box: passes over and lands on the ground behind.
  {
    const double o[3] = {0.0, 0.0, 2.5}, d[3] = {1.0, 0.0, 0.0};
    auto hit = s.raycast(o, d, 0.0, 20.0);
    CHECK(!hit.has_value());
  }
}

TEST_CASE("raycast on rutted ground matches the surface equation") {
  SceneSpec spec = flat_empty();
  spec.ground.type = GroundType::Rutted;
  spec.ground.rut_amplitude = 0.08;
  spec.ground.rut_wavelength = 2.5;
  Scene s = generate_scene(spec);
  for (double x : {0.3, 1.1, 2.9, 4.7}) {
    const double o[3] = {x, 0.5, 4.0}, d[3] = {0.0, 0.0, -1.0};
    auto hit = s.raycast(o, d, 0.0, 100.0);
    REQUIRE(hit.has_value());
    CHECK(hit->z == doctest::Approx(s.ground_height(x, 0.5)).epsilon(1e-9));
  }
}

TEST_CASE("stereo render of a flat noiseless scene lies on z = 0") {
  SceneSpec spec = flat_empty(7);
  Scene s = generate_scene(spec);
  StereoParams params;
  params.disparity_noise = 0.0;
  geo3d::PointCloud cloud = render_stereo_cloud(s, params);
  REQUIRE(cloud.size() > 1000);
  for (const auto& p : cloud.points) {
    CHECK(std::abs(p.z) < 1e-9);
    CHECK(p.color.has_value());
  }
}

TEST_CASE("stereo depth noise halves when the baseline doubles") {
  SceneSpec spec = flat_empty(21);
  Scene s = generate_scene(spec);
  StereoParams narrow;
  narrow.baseline = 0.40;
  StereoParams wide;
  wide.baseline = 0.80;
  geo3d::PointCloud a = render_stereo_cloud(s, narrow, 11);
  geo3d::PointCloud b = render_stereo_cloud(s, wide, 12);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() > 10000);
  // On flat ground the z residual is pure projected depth noise.
  auto stddev = [](const geo3d::PointCloud& c) {
    double ss = 0.0;
    for (const auto& p : c.points) ss += p.z * p.z;
    return std::sqrt(ss / static_cast<double>(c.size()));
  };
  const double ratio = stddev(a) / stddev(b);
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.2);
}

TEST_CASE("stereo points never lie beyond the first surface along their ray") {
  SceneSpec spec = flat_empty(3);
  spec.obstacles.push_back(box_at(6.0, 0.0, 1.5, 1.5, 2.5));
  Scene s = generate_scene(spec);
  StereoParams params;
  params.disparity_noise = 0.0;
  geo3d::PointCloud cloud = render_stereo_cloud(s, params);
  const double origin[3] = {0.0, 0.0, params.cam_height};
  REQUIRE(!cloud.empty());
  for (const auto& p : cloud.points) {
    double dir[3] = {p.x - origin[0], p.y - origin[1], p.z - origin[2]};
    const double dist = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    for (double& c : dir) c /= dist;
    auto hit = s.raycast(origin, dir, 0.1, dist + 1.0);
    REQUIRE(hit.has_value());
    CHECK(hit->t >= dist - 1e-6);  // nothing in front of the observed point
  }
}

TEST_CASE("crop regions add vegetation returns with crop color") {
  SceneSpec spec = flat_empty(9);
  CropRegion crop;
  crop.x0 = 6.0;
  crop.y0 = -2.0;
  crop.x1 = 10.0;
  crop.y1 = 2.0;
  crop.mean_height = 1.5;
  crop.density = 30.0;
  spec.crops.push_back(crop);
  Scene s = generate_scene(spec);
  StereoParams params;
  params.disparity_noise = 0.0;
  geo3d::PointCloud cloud = render_stereo_cloud(s, params);
  int veg = 0;
  for (const auto& p : cloud.points) {
    if (p.z > 0.05) {
      ++veg;
      CHECK(p.x >= 5.9);
      CHECK(p.x <= 10.1);
      CHECK(std::abs(p.y) <= 2.1);
      CHECK(p.z <= 1.5 + 5 * 0.3 + 1e-9);
      REQUIRE(p.color.has_value());
      CHECK(p.color->g == doctest::Approx(crop.color.g).epsilon(1e-12));
    }
  }
  CHECK(veg > 100);
}

TEST_CASE("lidar: flat-ground rings at closed-form ranges, 17 m cutoff") {
  SceneSpec spec = flat_empty(5);
  Scene s = generate_scene(spec);
  LidarParams params;
  params.range_noise = 0.0;
  geo3d::PointCloud cloud = render_lidar_scan(s, params);
  REQUIRE(!cloud.empty());
  for (const auto& p : cloud.points) {
    CHECK(std::abs(p.z) < 1e-9);
    const double range = std::sqrt(p.x * p.x + p.y * p.y +
                                   (p.z - params.sensor_height) * (p.z - params.sensor_height));
    CHECK(range <= params.max_range + 1e-9);
    // Ray/plane closed form: range = h / sin(-elevation) for some ring.
    bool matches_ring = false;
    for (int ring = 0; ring < params.ring_count; ++ring) {
      const double elev = params.elevation_min +
                          (params.elevation_max - params.elevation_min) * ring /
                              (params.ring_count - 1);
      if (elev >= 0.0) continue;
      if (std::abs(range - params.sensor_height / -std::sin(elev)) < 1e-6) matches_ring = true;
    }
    CHECK(matches_ring);
  }
  // Stereo resolution dwarfs lidar's.
  StereoParams stereo;
  CHECK(render_stereo_cloud(s, stereo).size() > 5 * cloud.size());
}

TEST_CASE("lidar wall returns and the max-range cutoff") {
  LidarParams single;
  single.ring_count = 1;
  single.elevation_min = 0.0;
  single.elevation_max = 0.0;
  single.range_noise = 0.0;

  SceneSpec wall_spec = flat_empty();
  wall_spec.obstacles.push_back(box_at(10.5, 0.0, 1.0, 30.0, 2.0));
  Scene wall = generate_scene(wall_spec);
  geo3d::PointCloud hits = render_lidar_scan(wall, single);
  REQUIRE(!hits.empty());
  for (const auto& p : hits.points) {
    CHECK(p.x == doctest::Approx(10.0).epsilon(1e-9));  // front face
    CHECK(p.z == doctest::Approx(single.sensor_height).epsilon(1e-9));
  }

  SceneSpec far_spec = flat_empty();
  far_spec.obstacles.push_back(box_at(20.0, 0.0, 1.0, 30.0, 2.0));
  Scene far = generate_scene(far_spec);
  CHECK(render_lidar_scan(far, single).empty());  // beyond 17 m, no ground hit at 0 elevation
}

TEST_CASE("radar clutter statistics: mean and exponential KS fit") {
  SceneSpec spec = flat_empty(77);
  Scene s = generate_scene(spec);
  RadarParams params;  // 400 x 720 bins, mean 1.0
  radar::RadarImage img = render_radar_image(s, params);
  const std::size_t n = 100000;
  REQUIRE(img.intensities.size() >= n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += img.intensities[i];
  const double mean = sum / static_cast<double>(n);
  CHECK(mean > 0.95);
  CHECK(mean < 1.05);

  std::vector<double> v(img.intensities.begin(), img.intensities.begin() + n);
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = 1.0 - std::exp(-v[i] / params.clutter_mean);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max(ks, std::max(std::abs(f - lo), std::abs(f - hi)));
  }
  CHECK(ks < 1.36 / std::sqrt(static_cast<double>(n)));  // 5% critical value
}

TEST_CASE("radar pole at 20 m / 30 degrees produces the peak in its bin") {
  SceneSpec spec = flat_empty(13);
  ObstacleSpec pole;
  pole.type = ObstacleSpec::Type::Cylinder;
  const double theta = 30.0 * std::numbers::pi / 180.0;
  pole.x = 20.0 * std::cos(theta);
  pole.y = 20.0 * std::sin(theta);
  pole.radius = 0.1;
  pole.height = 2.0;
  // Keep the target safely above the exponential clutter's max over ~3e5
  // bins (about ln(3e5) ~ 12.6 times the unit mean).
  pole.reflectivity = 5.0;
  spec.obstacles.push_back(pole);
  Scene s = generate_scene(spec);
  RadarParams params;
  radar::RadarImage img = render_radar_image(s, params);
  std::size_t best = 0;
  for (std::size_t i = 1; i < img.intensities.size(); ++i) {
    if (img.intensities[i] > img.intensities[best]) best = i;
  }
  const int rb = static_cast<int>(best) / img.azimuth_bins;
  const int ab = static_cast<int>(best) % img.azimuth_bins;
  // Range 20 m -> bin ~ (20 - 3) / 0.25; azimuth 30 deg -> bin 30 / 0.5.
  CHECK(std::abs(rb - 68) <= 1);
  CHECK(ab == 60);
  CHECK(img.intensities[best] > 40.0);  // gain 5 * reflectivity 5 * overlap 2
}

TEST_CASE("equal reflectivity-extent products give comparable radar peaks") {
  SceneSpec spec = flat_empty(29);
  ObstacleSpec small;  // small but highly reflective
  small.type = ObstacleSpec::Type::Cylinder;
  small.x = 15.0;
  small.y = 0.0;
  small.radius = 0.2;
  small.height = 1.0;
  small.reflectivity = 2.0;
  ObstacleSpec large;  // twice the vertical extent, half the reflectivity
  large.type = ObstacleSpec::Type::Cylinder;
  large.x = 0.0;
  large.y = 15.0;
  large.radius = 0.2;
  large.height = 2.0;
  large.reflectivity = 1.0;
  spec.obstacles.push_back(small);
  spec.obstacles.push_back(large);
  Scene s = generate_scene(spec);
  radar::RadarImage img = render_radar_image(s, {});
  auto peak_at = [&](int ab) {
    double best = 0.0;
    for (int rb = 0; rb < img.range_bins; ++rb) best = std::max(best, img.at(rb, ab));
    return best;
  };
  const double p_small = peak_at(0);    // +x direction
  const double p_large = peak_at(180);  // +y direction (0.5 deg bins)
  CHECK(p_small > 5.0);
  CHECK(p_large > 5.0);
  CHECK(p_small / p_large > 0.7);
  CHECK(p_small / p_large < 1.4);
}

TEST_CASE("thermal annotation: ambient, warm target, zero-noise exactness") {
  SceneSpec spec = flat_empty(31);
  ObstacleSpec person;
  person.type = ObstacleSpec::Type::WarmCylinder;
  person.x = 8.0;
  person.y = 1.0;
  person.radius = 0.3;
  person.height = 1.8;
  spec.obstacles.push_back(person);
  Scene s = generate_scene(spec);

  geo3d::PointCloud cloud;
  cloud.points.push_back({8.0, 1.0, 1.0, std::nullopt, std::nullopt});  // on the person
  cloud.points.push_back({3.0, -2.0, 0.0, std::nullopt, std::nullopt});  // open ground

  ThermalParams noiseless;
  noiseless.noise_sigma = 0.0;
  geo3d::PointCloud exact = render_thermal_points(s, noiseless, cloud);
  REQUIRE(exact.points[0].temperature.has_value());
  CHECK(*exact.points[0].temperature == 310.0);
  CHECK(*exact.points[1].temperature == 288.0);

  ThermalParams noisy;  // sigma 0.5 K
  geo3d::PointCloud t = render_thermal_points(s, noisy, cloud);
  CHECK(std::abs(*t.points[0].temperature - 310.0) < 3.0);
  CHECK(std::abs(*t.points[1].temperature - 288.0) < 3.0);
}

TEST_CASE("renders are bit-identical for identical seeds") {
  SceneSpec spec = flat_empty(123);
  spec.obstacles.push_back(box_at(7.0, 1.0, 1.0, 1.0, 2.0));
  Scene a = generate_scene(spec);
  Scene b = generate_scene(spec);
  StereoParams sp;
  geo3d::PointCloud ca = render_stereo_cloud(a, sp), cb = render_stereo_cloud(b, sp);
  REQUIRE(ca.size() == cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    CHECK(ca.points[i].x == cb.points[i].x);
    CHECK(ca.points[i].y == cb.points[i].y);
    CHECK(ca.points[i].z == cb.points[i].z);
  }
  radar::RadarImage ra = render_radar_image(a, {}), rb = render_radar_image(b, {});
  CHECK(ra.intensities == rb.intensities);

  // Different seed streams decorrelate draws.
  geo3d::PointCloud cc = render_stereo_cloud(a, sp, 99);
  bool any_different = false;
  for (std::size_t i = 0; i < ca.size() && !any_different; ++i) {
    any_different = ca.points[i].z != cc.points[i].z;
  }
  CHECK(any_different);
  CHECK(mix_seed(1, 1) != mix_seed(1, 2));
  CHECK(mix_seed(1, 1) == mix_seed(1, 1));
}

TEST_CASE("ground truth labels: boxes, overhang clearance, slope limit") {
  // Flat empty scene: everything Ground.
  Scene flat = generate_scene(flat_empty());
  GroundTruth gt = ground_truth(flat, 0.0, -5.0, 0.5, 20, 20);
  for (const auto& c : gt.map.cells) CHECK(c.patch.label == agriperc::fuse::Label::Ground);

  // 2 m box: exactly the covered cells NonGround.
  SceneSpec spec = flat_empty();
  spec.obstacles.push_back(box_at(5.0, 0.0, 2.0, 2.0, 1.5));
  Scene s = generate_scene(spec);
  GroundTruth gb = ground_truth(s, 0.0, -5.0, 0.5, 20, 20);
  for (int row = 0; row < 20; ++row) {
    for (int col = 0; col < 20; ++col) {
      const double x0 = col * 0.5, x1 = x0 + 0.5;
      const double y0 = -5.0 + row * 0.5, y1 = y0 + 0.5;
      const bool covered = 6.0 > x0 && 4.0 < x1 && 1.0 > y0 && -1.0 < y1;
      CHECK(gb.map.at(row, col).patch.label ==
            (covered ? agriperc::fuse::Label::NonGround : agriperc::fuse::Label::Ground));
    }
  }
  REQUIRE(gb.obstacles.size() == 1);
  CHECK(gb.obstacles[0].x == 5.0);
  CHECK(gb.obstacles[0].footprint.size() == 4);

  // Overhang above clearance is safe; lowered below, it is not.
  SceneSpec high = flat_empty();
  ObstacleSpec slab = box_at(5.0, 0.0, 2.0, 2.0, 3.5);
  slab.type = ObstacleSpec::Type::Overhang;
  slab.z_bottom = 3.0;
  high.obstacles.push_back(slab);
  GroundTruth g_high = ground_truth(generate_scene(high), 0.0, -5.0, 0.5, 20, 20);
  for (const auto& c : g_high.map.cells) CHECK(c.patch.label == agriperc::fuse::Label::Ground);

  SceneSpec low = high;
  low.obstacles[0].z_bottom = 2.0;
  GroundTruth g_low = ground_truth(generate_scene(low), 0.0, -5.0, 0.5, 20, 20);
  CHECK(g_low.map.at(10, 10).patch.label == agriperc::fuse::Label::NonGround);

  // Slope beyond the limit flips everything NonGround.
  SceneSpec steep = flat_empty();
  steep.ground.type = GroundType::Sloped;
  steep.ground.slope_x = std::tan(0.7);
  GroundTruth g_steep = ground_truth(generate_scene(steep), 0.0, -5.0, 0.5, 20, 20);
  for (const auto& c : g_steep.map.cells) CHECK(c.patch.label == agriperc::fuse::Label::NonGround);

  // Ground truth is independent of the render seed.
  SceneSpec reseeded = spec;
  reseeded.seed = 999;
  GroundTruth gb2 = ground_truth(generate_scene(reseeded), 0.0, -5.0, 0.5, 20, 20);
  for (std::size_t i = 0; i < gb.map.cells.size(); ++i) {
    CHECK(gb.map.cells[i].patch.label == gb2.map.cells[i].patch.label);
  }
}

TEST_CASE("scene spec files parse into the expected structures") {
  const char* path = "test_scene_spec.tmp.cfg";
  {
    std::ofstream out(path);
    out << "# demo scene\n"
           "[scene]\n"
           "ambient_temperature = 290\n"
           "seed = 42\n"
           "[ground]\n"
           "type = rutted\n"
           "rut_amplitude = 0.05\n"
           "rut_wavelength = 2.0\n"
           "[obstacle]\n"
           "type = warm_cylinder\n"
           "x = 8\n"
           "y = 1\n"
           "radius = 0.3\n"
           "height = 1.8\n"
           "[obstacle]\n"
           "type = overhang\n"
           "x = 6\n"
           "z_bottom = 3\n"
           "height = 3.5\n"
           "[crop]\n"
           "x0 = 5\n"
           "x1 = 9\n"
           "density = 25\n";
  }
  SceneSpec spec = read_scene_spec_file(path);
  std::remove(path);
  CHECK(spec.ambient_temperature == 290.0);
  CHECK(spec.seed == 42);
  CHECK(spec.ground.type == GroundType::Rutted);
  CHECK(spec.ground.rut_amplitude == 0.05);
  REQUIRE(spec.obstacles.size() == 2);
  CHECK(spec.obstacles[0].type == ObstacleSpec::Type::WarmCylinder);
  CHECK(spec.obstacles[0].radius == 0.3);
  CHECK(spec.obstacles[1].type == ObstacleSpec::Type::Overhang);
  CHECK(spec.obstacles[1].z_bottom == 3.0);
  REQUIRE(spec.crops.size() == 1);
  CHECK(spec.crops[0].density == 25.0);

  {
    std::ofstream out(path);
    out << "[nonsense]\nkey = 1\n";
  }
  CHECK_THROWS_AS(read_scene_spec_file(path), std::runtime_error);
  std::remove(path);
}
