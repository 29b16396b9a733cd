// agriperc: multi-sensor traversability and obstacle-detection pipelines over
// a deterministic synthetic-sensor simulator.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agriperc/cells.hpp"
#include "agriperc/config.hpp"
#include "agriperc/fuse.hpp"
#include "agriperc/geo3d.hpp"
#include "agriperc/ground.hpp"
#include "agriperc/radar.hpp"
#include "agriperc/radarstereo.hpp"
#include "agriperc/sim.hpp"

namespace fs = std::filesystem;
using namespace agriperc;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string frame_name(const std::string& stem, int frame, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", stem.c_str(), frame, ext.c_str());
  return buf;
}

// ---------------------------------------------------------------------------
// Pipeline configuration

struct PipelineConfig {
  std::string scene_path;  // empty: built-in demo scene
  std::string out_dir = "out";
  int frames = 3;
  std::optional<std::uint64_t> seed_override;

  // Patch grid shared by the geometric classifiers.
  double patch_size = 0.4;
  double origin_x = 0.0;
  double origin_y = -8.0;
  int n_rows = 40;
  int n_cols = 35;
  double voxel_size = 0.1;

  // Self-learning ground model.
  std::size_t capacity = 1000;
  double confidence = 0.95;
  // Trusted obstacle-free start region; must lie inside the stereo ground
  // footprint (nearest ground return is ~4.2 m with the default camera).
  double boot_x0 = 4.5, boot_x1 = 7.0, boot_y0 = -2.0, boot_y1 = 2.0;

  // Radar detection chain.
  radar::CfarParams cfar;
  double cart_cell_size = 0.25;
  int open_radius = 1;
  int min_area = 3;
  int close_radius = 1;

  // HDR/thermal cell classifier.
  cells::ClassifyParams cell;
  double cell_size = 0.6;
  double cell_origin_x = 0.0, cell_origin_y = -6.0;
  int cell_rows = 20, cell_cols = 20;
  double clearance = 2.5;

  sim::SensorParams sensors;

  PipelineConfig() {
    // A static scan at the library default (~2 deg) leaves most terrain
    // patches with too few returns to fit a plane; run denser by default.
    sensors.lidar.azimuth_resolution = 0.01;
  }
};

void apply_section(PipelineConfig& cfg, const config::Section& s) {
  if (s.name == "pipeline") {
    cfg.scene_path = s.get("scene", cfg.scene_path);
    cfg.out_dir = s.get("out", cfg.out_dir);
    cfg.frames = s.get_int("frames", cfg.frames);
    if (s.has("seed")) cfg.seed_override = s.get_u64("seed", 0);
  } else if (s.name == "patch") {
    cfg.patch_size = s.get_double("size", cfg.patch_size);
    cfg.origin_x = s.get_double("origin_x", cfg.origin_x);
    cfg.origin_y = s.get_double("origin_y", cfg.origin_y);
    cfg.n_rows = s.get_int("rows", cfg.n_rows);
    cfg.n_cols = s.get_int("cols", cfg.n_cols);
    cfg.voxel_size = s.get_double("voxel_size", cfg.voxel_size);
  } else if (s.name == "ground") {
    cfg.capacity = static_cast<std::size_t>(s.get_int("capacity", static_cast<int>(cfg.capacity)));
    cfg.confidence = s.get_double("confidence", cfg.confidence);
    cfg.boot_x0 = s.get_double("bootstrap_x0", cfg.boot_x0);
    cfg.boot_x1 = s.get_double("bootstrap_x1", cfg.boot_x1);
    cfg.boot_y0 = s.get_double("bootstrap_y0", cfg.boot_y0);
    cfg.boot_y1 = s.get_double("bootstrap_y1", cfg.boot_y1);
  } else if (s.name == "cfar") {
    cfg.cfar.n_train = s.get_int("n_train", cfg.cfar.n_train);
    cfg.cfar.n_guard = s.get_int("n_guard", cfg.cfar.n_guard);
    cfg.cfar.p_fa = s.get_double("p_fa", cfg.cfar.p_fa);
    cfg.cart_cell_size = s.get_double("cell_size", cfg.cart_cell_size);
    cfg.open_radius = s.get_int("open_radius", cfg.open_radius);
    cfg.min_area = s.get_int("min_area", cfg.min_area);
    cfg.close_radius = s.get_int("close_radius", cfg.close_radius);
  } else if (s.name == "cells") {
    cfg.cell.threshold = s.get_double("threshold", cfg.cell.threshold);
    cfg.cell.k_max = s.get_int("k_max", cfg.cell.k_max);
    cfg.cell.min_samples =
        static_cast<std::size_t>(s.get_int("min_samples", static_cast<int>(cfg.cell.min_samples)));
    cfg.cell.weights.w_chroma = s.get_double("w_chroma", cfg.cell.weights.w_chroma);
    cfg.cell.weights.w_height = s.get_double("w_height", cfg.cell.weights.w_height);
    cfg.cell.weights.w_temp = s.get_double("w_temp", cfg.cell.weights.w_temp);
    cfg.cell_size = s.get_double("size", cfg.cell_size);
    cfg.cell_origin_x = s.get_double("origin_x", cfg.cell_origin_x);
    cfg.cell_origin_y = s.get_double("origin_y", cfg.cell_origin_y);
    cfg.cell_rows = s.get_int("rows", cfg.cell_rows);
    cfg.cell_cols = s.get_int("cols", cfg.cell_cols);
    cfg.clearance = s.get_double("clearance", cfg.clearance);
  } else if (s.name == "stereo") {
    auto& p = cfg.sensors.stereo;
    p.baseline = s.get_double("baseline", p.baseline);
    p.focal_px = s.get_double("focal_px", p.focal_px);
    p.image_width = s.get_int("image_width", p.image_width);
    p.image_height = s.get_int("image_height", p.image_height);
    p.disparity_noise = s.get_double("disparity_noise", p.disparity_noise);
    p.min_range = s.get_double("min_range", p.min_range);
    p.max_range = s.get_double("max_range", p.max_range);
    p.cam_height = s.get_double("cam_height", p.cam_height);
    p.pitch = s.get_double("pitch", p.pitch);
  } else if (s.name == "lidar") {
    auto& p = cfg.sensors.lidar;
    p.ring_count = s.get_int("ring_count", p.ring_count);
    p.azimuth_resolution = s.get_double("azimuth_resolution", p.azimuth_resolution);
    p.azimuth_fov = s.get_double("azimuth_fov", p.azimuth_fov);
    p.max_range = s.get_double("max_range", p.max_range);
    p.range_noise = s.get_double("range_noise", p.range_noise);
    p.sensor_height = s.get_double("sensor_height", p.sensor_height);
  } else if (s.name == "radar") {
    auto& p = cfg.sensors.radar;
    p.range_bins = s.get_int("range_bins", p.range_bins);
    p.azimuth_bins = s.get_int("azimuth_bins", p.azimuth_bins);
    p.range_resolution = s.get_double("range_resolution", p.range_resolution);
    p.min_range = s.get_double("min_range", p.min_range);
    p.clutter_mean = s.get_double("clutter_mean", p.clutter_mean);
    p.target_gain = s.get_double("target_gain", p.target_gain);
    p.sensor_height = s.get_double("sensor_height", p.sensor_height);
  } else if (s.name == "thermal") {
    cfg.sensors.thermal.noise_sigma =
        s.get_double("noise_sigma", cfg.sensors.thermal.noise_sigma);
  } else {
    throw std::runtime_error("config: unknown section: [" + s.name + "]");
  }
}

// Checks every module precondition before any processing begins.
void validate(const PipelineConfig& cfg) {
  if (!cfg.scene_path.empty() && !fs::exists(cfg.scene_path)) {
    throw std::runtime_error("config: scene file does not exist: " + cfg.scene_path);
  }
  if (cfg.frames < 1) throw std::runtime_error("config: frames must be >= 1");
  if (!(cfg.patch_size > 0.0)) throw std::runtime_error("config: patch size must be > 0");
  if (cfg.n_rows < 1 || cfg.n_cols < 1) throw std::runtime_error("config: empty patch grid");
  if (!(cfg.voxel_size > 0.0)) throw std::runtime_error("config: voxel size must be > 0");
  if (cfg.capacity < ground::kFeatureDim + 1) {
    throw std::runtime_error("config: ground model capacity too small");
  }
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) {
    throw std::runtime_error("config: confidence must be in (0,1)");
  }
  if (cfg.cfar.n_train < 1 || cfg.cfar.n_guard < 0 ||
      !(cfg.cfar.p_fa > 0.0 && cfg.cfar.p_fa < 1.0)) {
    throw std::runtime_error("config: bad CFAR parameters");
  }
  if (cfg.sensors.radar.range_bins <= 2 * (cfg.cfar.n_train + cfg.cfar.n_guard) + 1) {
    throw std::runtime_error("config: CFAR window larger than the radar image");
  }
  if (!(cfg.cart_cell_size > 0.0)) throw std::runtime_error("config: radar cell size must be > 0");
  if (cfg.open_radius < 0 || cfg.close_radius < 0 || cfg.min_area < 0) {
    throw std::runtime_error("config: morphology parameters must be >= 0");
  }
  if (!(cfg.cell_size > 0.0)) throw std::runtime_error("config: cell size must be > 0");
  if (cfg.cell.k_max < 1) throw std::runtime_error("config: k_max must be >= 1");
  if (cfg.cell.weights.w_chroma < 0.0 || cfg.cell.weights.w_height < 0.0 ||
      cfg.cell.weights.w_temp < 0.0 ||
      (cfg.cell.weights.w_chroma == 0.0 && cfg.cell.weights.w_height == 0.0 &&
       cfg.cell.weights.w_temp == 0.0)) {
    throw std::runtime_error("config: cell feature weights must be nonnegative, not all zero");
  }
}

PipelineConfig load_config(const std::string& config_path) {
  PipelineConfig cfg;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) {
      throw std::runtime_error("config file does not exist: " + config_path);
    }
    for (const auto& s : config::parse_sections_file(config_path)) apply_section(cfg, s);
  }
  return cfg;
}

// Built-in demo scene: flat field, two boxes, a person in a crop strip, and a
// safe high overhang.
const char* kDemoScene =
    "[scene]\n"
    "seed = 42\n"
    "ambient_temperature = 288\n"
    "[ground]\n"
    "type = flat\n"
    "[obstacle]\n"
    "type = box\n"
    "x = 12\n"
    "y = 1\n"
    "size_x = 1\n"
    "size_y = 1\n"
    "height = 2\n"
    "reflectivity = 2\n"
    "[obstacle]\n"
    "type = warm_cylinder\n"
    "x = 8\n"
    "y = -2\n"
    "radius = 0.35\n"
    "height = 1.7\n"
    "reflectivity = 1.5\n"
    "[obstacle]\n"
    "type = overhang\n"
    "x = 10\n"
    "y = 2.5\n"
    "size_x = 2\n"
    "size_y = 2\n"
    "z_bottom = 3\n"
    "height = 3.4\n"
    "[crop]\n"
    "x0 = 7\n"
    "y0 = -3.5\n"
    "x1 = 10\n"
    "y1 = -0.5\n"
    "mean_height = 1.2\n"
    "height_std = 0.2\n"
    "density = 30\n";

sim::SceneSpec load_scene(const PipelineConfig& cfg) {
  sim::SceneSpec spec;
  if (cfg.scene_path.empty()) {
    const std::string tmp = cfg.out_dir + "/demo_scene.cfg";
    fs::create_directories(cfg.out_dir);
    std::ofstream out(tmp);
    out << kDemoScene;
    out.close();
    spec = sim::read_scene_spec_file(tmp);
  } else {
    spec = sim::read_scene_spec_file(cfg.scene_path);
  }
  if (cfg.seed_override) spec.seed = *cfg.seed_override;
  return spec;
}

// Per-frame independent RNG streams.
std::uint64_t stream_of(int frame, int sensor) { return 16ULL * (frame + 1) + sensor; }

// ---------------------------------------------------------------------------
// Map export / import

const char* label_string(const fuse::TravCell& cell) {
  if (cell.occluded) return "occluded";
  switch (cell.patch.label) {
    case fuse::Label::Ground: return "ground";
    case fuse::Label::NonGround: return "nonground";
    default: return "unknown";
  }
}

void write_map_csv(const std::string& path, const fuse::TraversabilityMap& map) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map CSV: " + path);
  out << map.n_rows << "," << map.n_cols << "," << fmt(map.origin_x) << ","
      << fmt(map.origin_y) << "," << fmt(map.patch_size) << "\n";
  out << "row,col,label,score\n";
  for (int r = 0; r < map.n_rows; ++r) {
    for (int c = 0; c < map.n_cols; ++c) {
      const fuse::TravCell& cell = map.at(r, c);
      out << r << "," << c << "," << label_string(cell) << "," << fmt(cell.patch.score) << "\n";
    }
  }
}

fuse::TraversabilityMap read_map_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("map CSV: missing header: " + path);
  fuse::TraversabilityMap map;
  {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream hs(line);
    if (!(hs >> map.n_rows >> map.n_cols >> map.origin_x >> map.origin_y >> map.patch_size)) {
      throw std::runtime_error("map CSV: bad header: " + path);
    }
  }
  map.cells.assign(static_cast<std::size_t>(map.n_rows) * map.n_cols, {});
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int r = 0, c = 0;
    std::string label;
    double score = 0.0;
    if (!(ls >> r >> c >> label >> score)) {
      throw std::runtime_error("map CSV: bad row: " + path);
    }
    fuse::TravCell& cell = map.at(r, c);
    cell.patch.score = score;
    if (label == "ground") {
      cell.patch.label = fuse::Label::Ground;
    } else if (label == "nonground") {
      cell.patch.label = fuse::Label::NonGround;
    } else if (label == "occluded") {
      cell.patch.label = fuse::Label::NonGround;
      cell.occluded = true;
    } else {
      cell.patch.label = fuse::Label::Unknown;
    }
  }
  return map;
}

// Green = traversable ground, red = obstacle, gray = unknown, purple =
// occlusion shadow. Row 0 is written at the top of the image.
void write_map_ppm(const std::string& path, const fuse::TraversabilityMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map PPM: " + path);
  out << "P6\n" << map.n_cols << " " << map.n_rows << "\n255\n";
  for (int r = map.n_rows - 1; r >= 0; --r) {
    for (int c = 0; c < map.n_cols; ++c) {
      const fuse::TravCell& cell = map.at(r, c);
      unsigned char rgb[3] = {128, 128, 128};
      if (cell.occluded) {
        rgb[0] = 150, rgb[1] = 0, rgb[2] = 150;
      } else if (cell.patch.label == fuse::Label::Ground) {
        rgb[0] = 0, rgb[1] = 170, rgb[2] = 0;
      } else if (cell.patch.label == fuse::Label::NonGround) {
        rgb[0] = 200, rgb[1] = 0, rgb[2] = 0;
      }
      out.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
}

fuse::TraversabilityMap cellgrid_to_map(const cells::CellGrid& grid) {
  fuse::TraversabilityMap map(grid.origin_x, grid.origin_y, grid.cell_size, grid.n_rows,
                              grid.n_cols);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    fuse::TravCell& cell = map.cells[i];
    cell.patch.score = grid.cells[i].score;
    switch (grid.cells[i].label) {
      case cells::CellLabel::Traversable:
        cell.patch.label = fuse::Label::Ground;
        break;
      case cells::CellLabel::NotTraversable:
        cell.patch.label = fuse::Label::NonGround;
        break;
      case cells::CellLabel::OccludedNotTraversable:
        cell.patch.label = fuse::Label::NonGround;
        cell.occluded = true;
        break;
      default:
        break;
    }
  }
  return map;
}

void export_map(const std::string& out_dir, const std::string& stem, int frame,
                const fuse::TraversabilityMap& map) {
  write_map_csv(out_dir + "/" + frame_name(stem, frame, "csv"), map);
  write_map_ppm(out_dir + "/" + frame_name(stem, frame, "ppm"), map);
}

// ---------------------------------------------------------------------------
// Geometric ground-classification pipeline

struct PatchFeatures {
  geo3d::PatchGrid grid;
  std::vector<std::optional<geo3d::GeoFeatures>> features;  // per patch
};

PatchFeatures compute_features(const geo3d::PointCloud& cloud, const PipelineConfig& cfg) {
  PatchFeatures pf;
  geo3d::PointCloud down = geo3d::voxel_downsample(cloud, {cfg.voxel_size});
  pf.grid = geo3d::build_patch_grid(down, cfg.origin_x, cfg.origin_y, cfg.patch_size, cfg.n_rows,
                                    cfg.n_cols);
  pf.features.resize(pf.grid.patches.size());
  for (std::size_t i = 0; i < pf.grid.patches.size(); ++i) {
    if (pf.grid.patches[i].empty()) continue;
    std::vector<geo3d::Point3> pts;
    pts.reserve(pf.grid.patches[i].size());
    for (int idx : pf.grid.patches[i]) pts.push_back(down.points[idx]);
    pf.features[i] = geo3d::compute_patch_features(pts);
  }
  return pf;
}

bool patch_in_region(const geo3d::PatchGrid& grid, int row, int col, double x0, double x1,
                     double y0, double y1) {
  const double px0 = grid.origin_x + col * grid.patch_size;
  const double py0 = grid.origin_y + row * grid.patch_size;
  return px0 >= x0 && px0 + grid.patch_size <= x1 && py0 >= y0 && py0 + grid.patch_size <= y1;
}

std::vector<ground::FeatureVector> bootstrap_features(const PatchFeatures& pf,
                                                      const PipelineConfig& cfg) {
  std::vector<ground::FeatureVector> feats;
  for (int r = 0; r < pf.grid.n_rows; ++r) {
    for (int c = 0; c < pf.grid.n_cols; ++c) {
      if (!patch_in_region(pf.grid, r, c, cfg.boot_x0, cfg.boot_x1, cfg.boot_y0, cfg.boot_y1)) {
        continue;
      }
      const auto& f = pf.features[pf.grid.index(r, c)];
      if (f && !f->degenerate) feats.push_back(ground::to_feature_vector(*f));
    }
  }
  return feats;
}

// Classifies one frame; appends Ground-labelled features to the rolling model
// when `learn` is set.
fuse::TraversabilityMap classify_frame(const PatchFeatures& pf, ground::GroundModel& model,
                                       bool learn) {
  fuse::TraversabilityMap map(pf.grid.origin_x, pf.grid.origin_y, pf.grid.patch_size,
                              pf.grid.n_rows, pf.grid.n_cols);
  std::vector<ground::FeatureVector> new_ground;
  for (std::size_t i = 0; i < pf.features.size(); ++i) {
    if (!pf.features[i]) continue;
    const ground::PatchLabel pl = model.classify(*pf.features[i]);
    map.cells[i].patch = pl;
    map.cells[i].observed_a = true;
    if (learn && pl.label == fuse::Label::Ground && !pf.features[i]->degenerate) {
      new_ground.push_back(ground::to_feature_vector(*pf.features[i]));
    }
  }
  if (learn) model.update(new_ground);
  return map;
}

std::vector<fuse::Label> map_labels(const fuse::TraversabilityMap& map) {
  std::vector<fuse::Label> labels;
  labels.reserve(map.cells.size());
  for (const auto& c : map.cells) labels.push_back(c.patch.label);
  return labels;
}

void print_metrics(const std::string& title, const fuse::MetricReport& m) {
  auto row = [](const char* name, const std::optional<double>& v) {
    std::printf("  %-20s %s\n", name, v ? fmt(*v).c_str() : "undefined");
  };
  std::printf("%s\n", title.c_str());
  row("precision", m.precision);
  row("rejection_precision", m.rejection_precision);
  row("recall", m.recall);
  row("specificity", m.specificity);
  row("accuracy", m.accuracy);
  row("f1", m.f1);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  for (int f = 0; f < cfg.frames; ++f) {
    geo3d::PointCloud stereo = sim::render_stereo_cloud(scene, cfg.sensors.stereo,
                                                        stream_of(f, 1));
    geo3d::PointCloud lidar = sim::render_lidar_scan(scene, cfg.sensors.lidar, stream_of(f, 2));
    radar::RadarImage image = sim::render_radar_image(scene, cfg.sensors.radar, stream_of(f, 3));
    geo3d::PointCloud thermal =
        sim::render_thermal_points(scene, cfg.sensors.thermal, stereo, stream_of(f, 4));
    geo3d::write_point_cloud_file(cfg.out_dir + "/" + frame_name("stereo", f, "txt"), stereo);
    geo3d::write_point_cloud_file(cfg.out_dir + "/" + frame_name("lidar", f, "txt"), lidar);
    radar::write_radar_image_file(cfg.out_dir + "/" + frame_name("radar", f, "txt"), image);
    geo3d::write_point_cloud_file(cfg.out_dir + "/" + frame_name("thermal", f, "txt"), thermal);
  }
  const sim::GroundTruth gt = sim::ground_truth(scene, cfg.origin_x, cfg.origin_y, cfg.patch_size,
                                                cfg.n_rows, cfg.n_cols);
  write_map_csv(cfg.out_dir + "/truth.csv", gt.map);
  write_map_ppm(cfg.out_dir + "/truth.ppm", gt.map);
  std::printf("simulate: wrote %d frame(s) to %s\n", cfg.frames, cfg.out_dir.c_str());
  return 0;
}

int cmd_ground(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  const sim::GroundTruth gt = sim::ground_truth(scene, cfg.origin_x, cfg.origin_y, cfg.patch_size,
                                                cfg.n_rows, cfg.n_cols);
  const std::vector<fuse::Label> truth = map_labels(gt.map);

  std::optional<ground::GroundModel> model;
  std::vector<fuse::MetricReport> per_frame;
  fuse::ConfusionMatrix total;
  for (int f = 0; f < cfg.frames; ++f) {
    geo3d::PointCloud cloud = sim::render_stereo_cloud(scene, cfg.sensors.stereo,
                                                       stream_of(f, 1));
    PatchFeatures pf = compute_features(cloud, cfg);
    if (!model) {
      model = ground::GroundModel::bootstrap(cfg.capacity, bootstrap_features(pf, cfg),
                                             cfg.confidence);
    }
    fuse::TraversabilityMap map = classify_frame(pf, *model, true);
    export_map(cfg.out_dir, "map_ground", f, map);
    const fuse::ConfusionResult cr = fuse::confusion(map_labels(map), truth);
    per_frame.push_back(fuse::metrics(cr.cm));
    total.tp += cr.cm.tp;
    total.fp += cr.cm.fp;
    total.tn += cr.cm.tn;
    total.fn += cr.cm.fn;
  }
  model->save_file(cfg.out_dir + "/ground_model.txt");
  const fuse::MetricReport agg = fuse::metrics(total);
  std::ofstream mout(cfg.out_dir + "/ground_metrics.csv");
  fuse::write_metrics_csv(mout, per_frame, agg);
  print_metrics("ground: aggregate metrics over " + std::to_string(cfg.frames) + " frame(s)",
                agg);
  return 0;
}

int cmd_fuse(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  const sim::GroundTruth gt = sim::ground_truth(scene, cfg.origin_x, cfg.origin_y, cfg.patch_size,
                                                cfg.n_rows, cfg.n_cols);
  const std::vector<fuse::Label> truth = map_labels(gt.map);

  std::optional<ground::GroundModel> model_s, model_l;
  fuse::ClassifierWeights w_s, w_l;
  std::vector<fuse::MetricReport> rows_s, rows_l, rows_f;
  fuse::ConfusionMatrix tot_s, tot_l, tot_f;
  for (int f = 0; f < cfg.frames; ++f) {
    geo3d::PointCloud stereo = sim::render_stereo_cloud(scene, cfg.sensors.stereo,
                                                        stream_of(f, 1));
    geo3d::PointCloud lidar = sim::render_lidar_scan(scene, cfg.sensors.lidar, stream_of(f, 2));
    PatchFeatures pf_s = compute_features(stereo, cfg);
    PatchFeatures pf_l = compute_features(lidar, cfg);
    if (!model_s) {
      model_s = ground::GroundModel::bootstrap(cfg.capacity, bootstrap_features(pf_s, cfg),
                                               cfg.confidence);
      model_l = ground::GroundModel::bootstrap(cfg.capacity, bootstrap_features(pf_l, cfg),
                                               cfg.confidence);
    }
    fuse::TraversabilityMap map_s = classify_frame(pf_s, *model_s, true);
    fuse::TraversabilityMap map_l = classify_frame(pf_l, *model_l, true);
    if (f == 0) {
      // Calibrate the fusion weights on the first frame against truth.
      w_s = fuse::weights_from_groundtruth(fuse::confusion(map_labels(map_s), truth).cm);
      w_l = fuse::weights_from_groundtruth(fuse::confusion(map_labels(map_l), truth).cm);
    }
    const double fused_threshold = 0.5 * (model_s->threshold() + model_l->threshold());
    fuse::TraversabilityMap fused = fuse::fuse_maps(map_s, map_l, w_s, w_l, fused_threshold);
    export_map(cfg.out_dir, "map_stereo", f, map_s);
    export_map(cfg.out_dir, "map_lidar", f, map_l);
    export_map(cfg.out_dir, "map_fused", f, fused);
    for (auto [rows, tot, map] : {std::tuple{&rows_s, &tot_s, &map_s},
                                  std::tuple{&rows_l, &tot_l, &map_l},
                                  std::tuple{&rows_f, &tot_f, &fused}}) {
      const fuse::ConfusionResult cr = fuse::confusion(map_labels(*map), truth);
      rows->push_back(fuse::metrics(cr.cm));
      tot->tp += cr.cm.tp;
      tot->fp += cr.cm.fp;
      tot->tn += cr.cm.tn;
      tot->fn += cr.cm.fn;
    }
  }
  for (auto [name, rows, tot] : {std::tuple{"stereo", &rows_s, &tot_s},
                                 std::tuple{"lidar", &rows_l, &tot_l},
                                 std::tuple{"fused", &rows_f, &tot_f}}) {
    std::ofstream out(cfg.out_dir + "/fuse_metrics_" + name + ".csv");
    fuse::write_metrics_csv(out, *rows, fuse::metrics(*tot));
    print_metrics(std::string("fuse: ") + name + " aggregate", fuse::metrics(*tot));
  }
  return 0;
}

std::vector<radar::RadarObstacle> radar_chain(const radar::RadarImage& image,
                                              const PipelineConfig& cfg,
                                              radar::BinaryGrid* mask_out,
                                              radar::CartesianRadarGrid* grid_out) {
  radar::BinaryGrid polar = radar::cfar_threshold(image, cfg.cfar);
  radar::CartesianRadarGrid grid = radar::polar_to_cartesian(image, cfg.cart_cell_size);
  radar::BinaryGrid cart = radar::project_mask(polar, image, grid);
  radar::BinaryGrid clean = radar::morph_filter(cart, cfg.open_radius, cfg.min_area,
                                                cfg.close_radius);
  std::vector<radar::RadarObstacle> obstacles = radar::extract_obstacles(clean, grid);
  if (mask_out) *mask_out = std::move(clean);
  if (grid_out) *grid_out = std::move(grid);
  return obstacles;
}

int cmd_radar(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir + "/radar_obstacles.csv");
  csv << "frame,id,centroid_x,centroid_y,area,member_cells\n";
  for (int f = 0; f < cfg.frames; ++f) {
    radar::RadarImage image = sim::render_radar_image(scene, cfg.sensors.radar, stream_of(f, 3));
    radar::BinaryGrid mask;
    radar::CartesianRadarGrid grid;
    std::vector<radar::RadarObstacle> obstacles = radar_chain(image, cfg, &mask, &grid);
    radar::write_pgm_file(cfg.out_dir + "/" + frame_name("radar_mask", f, "pgm"), mask);
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const auto& o = obstacles[i];
      csv << f << "," << i << "," << fmt(o.centroid_x) << "," << fmt(o.centroid_y) << ","
          << fmt(o.area) << "," << o.member_cells << "\n";
    }
    std::printf("radar: frame %d: %zu obstacle(s)\n", f, obstacles.size());
  }
  return 0;
}

int cmd_radarstereo(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir + "/obstacles3d.csv");
  radarstereo::write_obstacle_csv_header(csv);
  std::optional<ground::GroundModel> model;
  for (int f = 0; f < cfg.frames; ++f) {
    radar::RadarImage image = sim::render_radar_image(scene, cfg.sensors.radar, stream_of(f, 3));
    std::vector<radar::RadarObstacle> obstacles = radar_chain(image, cfg, nullptr, nullptr);
    geo3d::PointCloud cloud = sim::render_stereo_cloud(scene, cfg.sensors.stereo,
                                                       stream_of(f, 1));
    PatchFeatures pf = compute_features(cloud, cfg);
    if (!model) {
      model = ground::GroundModel::bootstrap(cfg.capacity, bootstrap_features(pf, cfg),
                                             cfg.confidence);
    }
    fuse::TraversabilityMap map = classify_frame(pf, *model, true);
    int id = 0;
    for (const auto& o : obstacles) {
      radarstereo::SubCloud sub = radarstereo::extract_subcloud(cloud, o);
      if (sub.points.empty()) continue;
      radarstereo::GroundLevel z0;
      try {
        z0 = radarstereo::estimate_ground_level(map, cloud, o);
      } catch (const std::runtime_error&) {
        continue;  // nothing near this obstacle to reference against
      }
      radarstereo::ObstacleInfo info = radarstereo::characterize(sub, z0.z0);
      radarstereo::write_obstacle_csv_row(csv, f, id++, info);
    }
    std::printf("radarstereo: frame %d: %d characterized obstacle(s)\n", f, id);
  }
  return 0;
}

int cmd_cells(const PipelineConfig& cfg) {
  const sim::SceneSpec spec = load_scene(cfg);
  const sim::Scene scene = sim::generate_scene(spec);
  fs::create_directories(cfg.out_dir);
  for (int f = 0; f < cfg.frames; ++f) {
    geo3d::PointCloud stereo = sim::render_stereo_cloud(scene, cfg.sensors.stereo,
                                                        stream_of(f, 1));
    geo3d::PointCloud thermal =
        sim::render_thermal_points(scene, cfg.sensors.thermal, stereo, stream_of(f, 4));

    // Reference plane fitted to the trusted start region.
    std::vector<geo3d::Point3> region;
    for (const auto& p : thermal.points) {
      if (p.x >= cfg.boot_x0 && p.x <= cfg.boot_x1 && p.y >= cfg.boot_y0 && p.y <= cfg.boot_y1) {
        region.push_back(p);
      }
    }
    geo3d::Plane reference;  // fallback: z = 0
    if (region.size() >= 3) {
      try {
        reference = geo3d::fit_plane_lsq(region);
      } catch (const std::domain_error&) {
      }
    }

    cells::CellGrid grid(cfg.cell_origin_x, cfg.cell_origin_y, cfg.cell_size, cfg.cell_rows,
                         cfg.cell_cols);
    cells::accumulate_cell_samples(thermal.points, grid, reference, cfg.clearance);

    cells::ClassifyParams params = cfg.cell;
    params.em.seed = sim::mix_seed(spec.seed, 7000 + f);

    // Training cells: the driven-over start region is trusted traversable.
    cells::CellGrid training = grid;
    for (int r = 0; r < training.n_rows; ++r) {
      for (int c = 0; c < training.n_cols; ++c) {
        const double x0 = training.origin_x + c * training.cell_size;
        const double y0 = training.origin_y + r * training.cell_size;
        if (x0 >= cfg.boot_x0 && x0 + training.cell_size <= cfg.boot_x1 && y0 >= cfg.boot_y0 &&
            y0 + training.cell_size <= cfg.boot_y1) {
          training.at(r, c).label = cells::CellLabel::Traversable;
        }
      }
    }
    std::vector<cells::GaussianMixture> library = cells::train_library({&training}, params);
    cells::classify_cells(grid, library, params);
    cells::mark_occlusion_shadows(grid, 0.0, 0.0);

    cells::write_library_file(cfg.out_dir + "/" + frame_name("cell_library", f, "txt"), library);
    export_map(cfg.out_dir, "map_cells", f, cellgrid_to_map(grid));
    int not_trav = 0;
    for (const auto& c : grid.cells) {
      not_trav += c.label == cells::CellLabel::NotTraversable ||
                  c.label == cells::CellLabel::OccludedNotTraversable;
    }
    std::printf("cells: frame %d: library size %zu, %d not-traversable cell(s)\n", f,
                library.size(), not_trav);
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& out_dir) {
  const fuse::TraversabilityMap pred = read_map_csv(pred_path);
  const fuse::TraversabilityMap truth = read_map_csv(truth_path);
  if (!pred.same_geometry(truth)) {
    throw std::runtime_error("eval: map geometries do not match");
  }
  const fuse::ConfusionResult cr = fuse::confusion(map_labels(pred), map_labels(truth));
  const fuse::MetricReport m = fuse::metrics(cr.cm);
  std::printf("eval: %lld cell(s) counted, %lld excluded as unknown\n",
              static_cast<long long>(cr.cm.total()), static_cast<long long>(cr.excluded));
  print_metrics("eval: metrics", m);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/eval_metrics.csv");
    fuse::write_metrics_csv(out, {}, m);
  }
  return 0;
}

int cmd_demo(PipelineConfig cfg, const std::string& method) {
  fs::create_directories(cfg.out_dir);
  int rc = 0;
  auto want = [&](const char* name) { return method.empty() || method == name; };
  if (want("simulate")) rc |= cmd_simulate(cfg);
  if (want("ground")) rc |= cmd_ground(cfg);
  if (want("fuse")) rc |= cmd_fuse(cfg);
  if (want("radar")) rc |= cmd_radar(cfg);
  if (want("radarstereo")) rc |= cmd_radarstereo(cfg);
  if (want("cells")) rc |= cmd_cells(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agriperc: multi-sensor traversability and obstacle detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_override, method, pred_path, truth_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> frames_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline configuration file");
    cmd->add_option("--seed", seed_flag, "override the scene seed");
    cmd->add_option("--out", out_override, "output directory");
    cmd->add_option("--frames", frames_flag, "number of frames to process");
  };

  CLI::App* c_sim = app.add_subcommand("simulate", "render synthetic sensor frames");
  CLI::App* c_ground = app.add_subcommand("ground", "self-learning geometric ground classifier");
  CLI::App* c_fuse = app.add_subcommand("fuse", "LIDAR-stereo statistical fusion");
  CLI::App* c_radar = app.add_subcommand("radar", "CFAR radar obstacle localization");
  CLI::App* c_rs = app.add_subcommand("radarstereo", "radar-guided stereo 3D characterization");
  CLI::App* c_cells = app.add_subcommand("cells", "HDR/thermal GMM cell classifier");
  CLI::App* c_demo = app.add_subcommand("demo", "run every pipeline on the bundled demo scene");
  for (CLI::App* c : {c_sim, c_ground, c_fuse, c_radar, c_rs, c_cells, c_demo}) add_common(c);
  c_demo->add_option("--method", method, "restrict the demo to one pipeline");

  CLI::App* c_eval = app.add_subcommand("eval", "score a predicted map against a truth map");
  c_eval->add_option("--pred", pred_path, "predicted map CSV")->required();
  c_eval->add_option("--truth", truth_path, "ground-truth map CSV")->required();
  c_eval->add_option("--out", out_override, "output directory for the metrics CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_eval->parsed()) {
      return cmd_eval(pred_path, truth_path, out_override);
    }
    PipelineConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed_override = *seed_flag;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (frames_flag) cfg.frames = *frames_flag;
    validate(cfg);
    if (c_sim->parsed()) return cmd_simulate(cfg);
    if (c_ground->parsed()) return cmd_ground(cfg);
    if (c_fuse->parsed()) return cmd_fuse(cfg);
    if (c_radar->parsed()) return cmd_radar(cfg);
    if (c_rs->parsed()) return cmd_radarstereo(cfg);
    if (c_cells->parsed()) return cmd_cells(cfg);
    if (c_demo->parsed()) return cmd_demo(cfg, method);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "agriperc: %s\n", e.what());
    return 1;
  }
  return 0;
}
