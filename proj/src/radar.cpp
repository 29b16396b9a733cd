#include "agriperc/radar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace agriperc::radar {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Maps a Cartesian cell centre to its polar bin; returns false outside the
// annulus.
bool polar_bin(const RadarImage& img, double x, double y, int* r_bin, int* a_bin) {
  const double r = std::hypot(x, y);
  if (r < img.min_range || r >= img.max_range()) return false;
  double theta = std::atan2(y, x);
  if (theta < 0.0) theta += kTwoPi;
  const double az_res = kTwoPi / img.azimuth_bins;
  int a = static_cast<int>(std::floor(theta / az_res));
  if (a >= img.azimuth_bins) a = 0;  // theta == 2*pi wrap
  const int rb = static_cast<int>(std::floor((r - img.min_range) / img.range_resolution));
  if (rb < 0 || rb >= img.range_bins) return false;
  *r_bin = rb;
  *a_bin = a;
  return true;
}

}  // namespace

CartesianRadarGrid polar_to_cartesian(const RadarImage& img, double cell_size) {
  if (!(cell_size > 0.0)) {
    throw std::invalid_argument("polar_to_cartesian: cell_size must be > 0");
  }
  CartesianRadarGrid grid;
  grid.cell_size = cell_size;
  grid.n = static_cast<int>(std::ceil(2.0 * img.max_range() / cell_size));
  grid.extent = grid.n * cell_size / 2.0;
  grid.intensities.assign(static_cast<std::size_t>(grid.n) * grid.n, 0.0);
  grid.valid.assign(static_cast<std::size_t>(grid.n) * grid.n, 0);
  for (int iy = 0; iy < grid.n; ++iy) {
    for (int ix = 0; ix < grid.n; ++ix) {
      int rb, ab;
      if (polar_bin(img, grid.center_x(ix), grid.center_y(iy), &rb, &ab)) {
        grid.valid[grid.index(iy, ix)] = 1;
        grid.intensities[grid.index(iy, ix)] = img.at(rb, ab);
      }
    }
  }
  return grid;
}

BinaryGrid cfar_threshold(const RadarImage& img, const CfarParams& params) {
  if (params.n_train < 1 || params.n_guard < 0 || !(params.p_fa > 0.0 && params.p_fa < 1.0)) {
    throw std::invalid_argument("cfar_threshold: bad parameters");
  }
  const int t = params.n_train;
  const int g = params.n_guard;
  if (img.range_bins <= 2 * (t + g) + 1) {
    throw std::invalid_argument("cfar_threshold: window larger than image");
  }
  BinaryGrid out(img.range_bins, img.azimuth_bins);
  for (int a = 0; a < img.azimuth_bins; ++a) {
    for (int r = 0; r < img.range_bins; ++r) {
      double z = 0.0;
      int n = 0;
      const int lo_hi = r - g - 1;
      const int lo_lo = std::max(0, r - g - t);
      for (int k = lo_lo; k <= lo_hi; ++k) {
        z += img.at(k, a);
        ++n;
      }
      const int hi_lo = r + g + 1;
      const int hi_hi = std::min(img.range_bins - 1, r + g + t);
      for (int k = hi_lo; k <= hi_hi; ++k) {
        z += img.at(k, a);
        ++n;
      }
      // One-sided windows at the edges keep N and alpha consistent.
      const double nn = static_cast<double>(n);
      const double alpha = nn * (std::pow(params.p_fa, -1.0 / nn) - 1.0);
      const double threshold = alpha * (z / nn);
      out.at(r, a) = img.at(r, a) > threshold ? 1 : 0;
    }
  }
  return out;
}

BinaryGrid project_mask(const BinaryGrid& polar_mask, const RadarImage& img,
                        const CartesianRadarGrid& grid) {
  if (polar_mask.rows != img.range_bins || polar_mask.cols != img.azimuth_bins) {
    throw std::invalid_argument("project_mask: mask does not match image");
  }
  BinaryGrid out(grid.n, grid.n);
  for (int iy = 0; iy < grid.n; ++iy) {
    for (int ix = 0; ix < grid.n; ++ix) {
      if (!grid.valid[grid.index(iy, ix)]) continue;
      int rb, ab;
      if (polar_bin(img, grid.center_x(ix), grid.center_y(iy), &rb, &ab)) {
        out.at(iy, ix) = polar_mask.at(rb, ab);
      }
    }
  }
  return out;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dy, dx);
    }
  }
  return offs;
}

}  // namespace

BinaryGrid erode_disk(const BinaryGrid& in, int radius) {
  if (radius <= 0) return in;
  const auto offs = disk_offsets(radius);
  BinaryGrid out(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      bool all = true;
      for (const auto& [dy, dx] : offs) {
        const int rr = r + dy, cc = c + dx;
        if (rr < 0 || rr >= in.rows || cc < 0 || cc >= in.cols || !in.at(rr, cc)) {
          all = false;
          break;
        }
      }
      out.at(r, c) = all ? 1 : 0;
    }
  }
  return out;
}

BinaryGrid dilate_disk(const BinaryGrid& in, int radius) {
  if (radius <= 0) return in;
  const auto offs = disk_offsets(radius);
  BinaryGrid out(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      if (!in.at(r, c)) continue;
      for (const auto& [dy, dx] : offs) {
        const int rr = r + dy, cc = c + dx;
        if (rr >= 0 && rr < in.rows && cc >= 0 && cc < in.cols) out.at(rr, cc) = 1;
      }
    }
  }
  return out;
}

namespace {

// Labels 8-connected components; returns component id per cell (-1 = empty)
// and per-component sizes.
std::vector<int> label_components(const BinaryGrid& in, std::vector<int>* sizes) {
  std::vector<int> label(in.v.size(), -1);
  sizes->clear();
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * in.cols + c;
      if (!in.v[idx] || label[idx] >= 0) continue;
      const int id = static_cast<int>(sizes->size());
      int count = 0;
      std::queue<std::pair<int, int>> q;
      q.emplace(r, c);
      label[idx] = id;
      while (!q.empty()) {
        auto [cr, cc] = q.front();
        q.pop();
        ++count;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int nr = cr + dy, nc = cc + dx;
            if (nr < 0 || nr >= in.rows || nc < 0 || nc >= in.cols) continue;
            const std::size_t nidx = static_cast<std::size_t>(nr) * in.cols + nc;
            if (in.v[nidx] && label[nidx] < 0) {
              label[nidx] = id;
              q.emplace(nr, nc);
            }
          }
        }
      }
      sizes->push_back(count);
    }
  }
  return label;
}

}  // namespace

BinaryGrid remove_small_components(const BinaryGrid& in, int min_area) {
  if (min_area <= 1) return in;
  std::vector<int> sizes;
  const std::vector<int> label = label_components(in, &sizes);
  BinaryGrid out(in.rows, in.cols);
  for (std::size_t i = 0; i < in.v.size(); ++i) {
    out.v[i] = (label[i] >= 0 && sizes[label[i]] >= min_area) ? 1 : 0;
  }
  return out;
}

BinaryGrid morph_filter(const BinaryGrid& in, int open_radius, int min_area, int close_radius) {
  if (open_radius < 0 || close_radius < 0) {
    throw std::invalid_argument("morph_filter: radii must be >= 0");
  }
  BinaryGrid g = dilate_disk(erode_disk(in, open_radius), open_radius);
  g = remove_small_components(g, min_area);
  g = erode_disk(dilate_disk(g, close_radius), close_radius);
  return g;
}

std::vector<std::pair<double, double>> convex_hull(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                  const std::pair<double, double>& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<RadarObstacle> extract_obstacles(const BinaryGrid& mask,
                                             const CartesianRadarGrid& grid) {
  if (mask.rows != grid.n || mask.cols != grid.n) {
    throw std::invalid_argument("extract_obstacles: mask does not match grid");
  }
  std::vector<int> sizes;
  const std::vector<int> label = label_components(mask, &sizes);
  std::vector<std::vector<std::pair<double, double>>> members(sizes.size());
  for (int iy = 0; iy < grid.n; ++iy) {
    for (int ix = 0; ix < grid.n; ++ix) {
      const int id = label[static_cast<std::size_t>(iy) * grid.n + ix];
      if (id >= 0) members[id].emplace_back(grid.center_x(ix), grid.center_y(iy));
    }
  }
  std::vector<RadarObstacle> out;
  out.reserve(sizes.size());
  for (auto& pts : members) {
    RadarObstacle o;
    o.member_cells = pts.size();
    o.area = static_cast<double>(pts.size()) * grid.cell_size * grid.cell_size;
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
    }
    o.centroid_x = sx / static_cast<double>(pts.size());
    o.centroid_y = sy / static_cast<double>(pts.size());
    o.hull = convex_hull(std::move(pts));
    out.push_back(std::move(o));
  }
  std::sort(out.begin(), out.end(), [](const RadarObstacle& a, const RadarObstacle& b) {
    return std::hypot(a.centroid_x, a.centroid_y) < std::hypot(b.centroid_x, b.centroid_y);
  });
  return out;
}

RadarImage read_radar_image(std::istream& in) {
  RadarImage img;
  in >> img.range_bins >> img.azimuth_bins >> img.range_resolution >> img.min_range;
  if (!in || img.range_bins <= 0 || img.azimuth_bins <= 0) {
    throw std::runtime_error("radar image: bad header");
  }
  img.intensities.resize(static_cast<std::size_t>(img.range_bins) * img.azimuth_bins);
  for (double& v : img.intensities) in >> v;
  if (!in) throw std::runtime_error("radar image: truncated intensities");
  return img;
}

RadarImage read_radar_image_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open radar image file: " + path);
  return read_radar_image(in);
}

void write_radar_image(std::ostream& out, const RadarImage& img) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g\n", img.range_bins, img.azimuth_bins,
                img.range_resolution, img.min_range);
  out << buf;
  for (int r = 0; r < img.range_bins; ++r) {
    for (int a = 0; a < img.azimuth_bins; ++a) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", img.at(r, a),
                    a + 1 == img.azimuth_bins ? '\n' : ' ');
      out << buf;
    }
  }
}

void write_radar_image_file(const std::string& path, const RadarImage& img) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write radar image file: " + path);
  write_radar_image(out, img);
}

void write_pgm(std::ostream& out, const BinaryGrid& mask) {
  out << "P5\n" << mask.cols << " " << mask.rows << "\n255\n";
  for (std::uint8_t v : mask.v) out.put(v ? static_cast<char>(255) : 0);
}

void write_pgm_file(const std::string& path, const BinaryGrid& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PGM file: " + path);
  write_pgm(out, mask);
}

}  // namespace agriperc::radar
