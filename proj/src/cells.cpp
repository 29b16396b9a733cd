#include "agriperc/cells.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace agriperc::cells {

Image fuse_exposures(const ExposureStack& stack) {
  if (stack.exposures.size() < 2) {
    throw std::invalid_argument("fuse_exposures: need at least 2 exposures");
  }
  const Image& first = stack.exposures.front().image;
  double prev_time = 0.0;
  for (const Exposure& e : stack.exposures) {
    if (e.image.rows != first.rows || e.image.cols != first.cols) {
      throw std::invalid_argument("fuse_exposures: mismatched image dimensions");
    }
    if (!(e.time > prev_time)) {
      throw std::invalid_argument("fuse_exposures: exposure times must be strictly increasing");
    }
    prev_time = e.time;
  }
  constexpr double kSaturation = 0.99;
  Image out(first.rows, first.cols);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    double num = 0.0, den = 0.0;
    double plain_num = 0.0;
    int n_unsat = 0;
    for (const Exposure& e : stack.exposures) {
      const double v = e.image.v[i];
      if (v >= kSaturation) continue;
      const double w = std::min(v, 1.0 - v);
      num += w * (v / e.time);
      den += w;
      plain_num += v / e.time;
      ++n_unsat;
    }
    if (n_unsat == 0) {
      const Exposure& shortest = stack.exposures.front();
      out.v[i] = shortest.image.v[i] / shortest.time;
    } else if (den > 0.0) {
      out.v[i] = num / den;
    } else {
      // All unsaturated values sit at the zero-weight extremes.
      out.v[i] = plain_num / n_unsat;
    }
  }
  return out;
}

void accumulate_cell_samples(const std::vector<geo3d::Point3>& points, CellGrid& grid,
                             const geo3d::Plane& reference, double height_cutoff) {
  for (const auto& p : points) {
    if (!p.temperature) continue;
    const double h = reference.normal[0] * p.x + reference.normal[1] * p.y +
                     reference.normal[2] * p.z - reference.offset;
    if (h > height_cutoff) continue;  // above vehicle clearance, not an obstruction
    const auto col = static_cast<long>(std::floor((p.x - grid.origin_x) / grid.cell_size));
    const auto row = static_cast<long>(std::floor((p.y - grid.origin_y) / grid.cell_size));
    if (col < 0 || col >= grid.n_cols || row < 0 || row >= grid.n_rows) continue;
    CellSample s;
    if (p.color) {
      const double sum = p.color->r + p.color->g + p.color->b;
      if (sum > 0.0) {
        s.chroma_r = p.color->r / sum;
        s.chroma_g = p.color->g / sum;
      }
    }
    s.height = h;
    s.temperature = *p.temperature;
    grid.at(static_cast<int>(row), static_cast<int>(col)).samples.push_back(s);
  }
}

namespace {

double log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det) {
  const Eigen::VectorXd d = x - mean;
  const double maha = d.dot(llt.solve(d));
  const double dim = static_cast<double>(x.size());
  return -0.5 * (dim * std::log(2.0 * M_PI) + log_det + maha);
}

struct PreparedMixture {
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
  std::vector<double> log_dets;
  std::vector<double> log_weights;
};

PreparedMixture prepare(const GaussianMixture& gmm) {
  PreparedMixture pm;
  for (const auto& c : gmm.components) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("gmm: component covariance not positive definite");
    }
    double log_det = 0.0;
    for (int i = 0; i < c.covariance.rows(); ++i) {
      log_det += 2.0 * std::log(llt.matrixL()(i, i));
    }
    pm.llts.push_back(std::move(llt));
    pm.log_dets.push_back(log_det);
    pm.log_weights.push_back(std::log(c.weight));
  }
  return pm;
}

double mixture_log_pdf(const GaussianMixture& gmm, const PreparedMixture& pm,
                       const Eigen::VectorXd& x) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(gmm.components.size());
  for (std::size_t j = 0; j < gmm.components.size(); ++j) {
    terms[j] = pm.log_weights[j] +
               log_gaussian(x, gmm.components[j].mean, pm.llts[j], pm.log_dets[j]);
    best = std::max(best, terms[j]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - best);
  return best + std::log(sum);
}

}  // namespace

double gmm_log_likelihood(const GaussianMixture& gmm, const std::vector<CellSample>& samples) {
  const PreparedMixture pm = prepare(gmm);
  double ll = 0.0;
  for (const auto& s : samples) ll += mixture_log_pdf(gmm, pm, s.vec());
  return ll;
}

GaussianMixture fit_gmm_em(const std::vector<CellSample>& samples, int k, const EmParams& params,
                           std::vector<double>* ll_history) {
  if (samples.empty()) {
    throw std::invalid_argument("fit_gmm_em: empty sample set");
  }
  const int d = kCellFeatureDim;
  const auto n = static_cast<int>(samples.size());
  if (n < k * (d + 1)) k = 1;
  if (k < 1) throw std::invalid_argument("fit_gmm_em: k must be >= 1");

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) x.row(i) = samples[i].vec().transpose();

  const Eigen::VectorXd global_mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - global_mean.transpose();
  Eigen::MatrixXd global_cov = centered.transpose() * centered / static_cast<double>(n) +
                               params.epsilon * Eigen::MatrixXd::Identity(d, d);

  // k-means++ style mean seeding.
  std::mt19937_64 rng(params.seed);
  std::vector<Eigen::VectorXd> means;
  {
    std::uniform_int_distribution<int> pick(0, n - 1);
    means.push_back(x.row(pick(rng)).transpose());
    std::vector<double> d2(n);
    while (static_cast<int>(means.size()) < k) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& m : means) {
          best = std::min(best, (x.row(i).transpose() - m).squaredNorm());
        }
        d2[i] = best;
        total += best;
      }
      int chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng), acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc >= target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = pick(rng);
      }
      means.push_back(x.row(chosen).transpose());
    }
  }

  // A few Lloyd refinement steps separate the seeds before EM; without them a
  // same-cluster seeding can collapse every mean onto the global mean.
  if (k > 1) {
    std::vector<int> assign(n, 0);
    for (int pass = 0; pass < 10; ++pass) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int best_j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
          const double dist = (x.row(i).transpose() - means[j]).squaredNorm();
          if (dist < best) {
            best = dist;
            best_j = j;
          }
        }
        changed |= assign[i] != best_j;
        assign[i] = best_j;
      }
      if (pass > 0 && !changed) break;
      for (int j = 0; j < k; ++j) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (assign[i] != j) continue;
          sum += x.row(i).transpose();
          ++count;
        }
        if (count > 0) means[j] = sum / count;  // empty clusters keep their seed
      }
    }
  }

  GaussianMixture gmm;
  for (int j = 0; j < k; ++j) {
    GaussianComponent c;
    c.weight = 1.0 / k;
    c.mean = means[j];
    c.covariance = global_cov;
    gmm.components.push_back(std::move(c));
  }

  Eigen::MatrixXd resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  GaussianMixture snapshot;
  for (int iter = 0; iter < params.max_iter; ++iter) {
    // E-step
    const PreparedMixture pm = prepare(gmm);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logs(k);
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        logs(j) = pm.log_weights[j] +
                  log_gaussian(x.row(i).transpose(), gmm.components[j].mean, pm.llts[j],
                               pm.log_dets[j]);
        best = std::max(best, logs(j));
      }
      double sum = 0.0;
      for (int j = 0; j < k; ++j) sum += std::exp(logs(j) - best);
      const double log_norm = best + std::log(sum);
      ll += log_norm;
      for (int j = 0; j < k; ++j) resp(i, j) = std::exp(logs(j) - log_norm);
    }
    // The covariance regularization can nudge the likelihood down; reject
    // such a step so the reported sequence is genuinely non-decreasing.
    if (iter > 0 && ll < prev_ll) {
      gmm = std::move(snapshot);
      break;
    }
    if (ll_history) ll_history->push_back(ll);
    if (iter > 0 && ll - prev_ll < params.tol) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
    snapshot = gmm;

    // M-step
    for (int j = 0; j < k; ++j) {
      const double nj = std::max(resp.col(j).sum(), 1e-12);
      Eigen::VectorXd mu = (resp.col(j).transpose() * x).transpose() / nj;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd dv = x.row(i).transpose() - mu;
        cov += resp(i, j) * dv * dv.transpose();
      }
      cov /= nj;
      cov += params.epsilon * Eigen::MatrixXd::Identity(d, d);
      gmm.components[j].weight = nj / static_cast<double>(n);
      gmm.components[j].mean = std::move(mu);
      gmm.components[j].covariance = std::move(cov);
    }
    // Keep weights summing to exactly 1.
    double wsum = 0.0;
    for (const auto& c : gmm.components) wsum += c.weight;
    for (auto& c : gmm.components) c.weight /= wsum;
  }
  return gmm;
}

GaussianMixture fit_gmm_bic(const std::vector<CellSample>& samples, int k_max,
                            const EmParams& params) {
  const int d = kCellFeatureDim;
  GaussianMixture best;
  double best_bic = std::numeric_limits<double>::infinity();
  const double log_n = std::log(static_cast<double>(samples.size()));
  for (int k = 1; k <= k_max; ++k) {
    GaussianMixture gmm = fit_gmm_em(samples, k, params);
    const auto kk = static_cast<double>(gmm.components.size());
    const double n_params = (kk - 1.0) + kk * (d + d * (d + 1) / 2.0);
    const double bic = -2.0 * gmm_log_likelihood(gmm, samples) + n_params * log_n;
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(gmm);
    }
  }
  return best;
}

namespace {

// Active axes under the feature weights: (chroma_r, chroma_g, height, temp).
std::vector<std::pair<int, double>> active_axes(const FeatureWeights& w) {
  if (w.w_chroma < 0.0 || w.w_height < 0.0 || w.w_temp < 0.0) {
    throw std::invalid_argument("feature weights must be nonnegative");
  }
  std::vector<std::pair<int, double>> axes;
  if (w.w_chroma > 0.0) {
    axes.emplace_back(0, w.w_chroma);
    axes.emplace_back(1, w.w_chroma);
  }
  if (w.w_height > 0.0) axes.emplace_back(2, w.w_height);
  if (w.w_temp > 0.0) axes.emplace_back(3, w.w_temp);
  if (axes.empty()) {
    throw std::invalid_argument("feature weights must not all be zero");
  }
  return axes;
}

}  // namespace

double bhattacharyya_gaussian(const GaussianComponent& a, const GaussianComponent& b,
                              const FeatureWeights& weights) {
  if (a.mean.size() != b.mean.size()) {
    throw std::invalid_argument("bhattacharyya_gaussian: dimension mismatch");
  }
  std::vector<std::pair<int, double>> axes;
  if (a.mean.size() == kCellFeatureDim) {
    axes = active_axes(weights);
  } else {
    for (int i = 0; i < a.mean.size(); ++i) axes.emplace_back(i, 1.0);
  }
  const auto m = static_cast<int>(axes.size());
  Eigen::VectorXd dmu(m);
  Eigen::MatrixXd ca(m, m), cb(m, m);
  for (int i = 0; i < m; ++i) {
    const auto [ai, wi] = axes[i];
    dmu(i) = wi * (a.mean(ai) - b.mean(ai));
    for (int j = 0; j < m; ++j) {
      const auto [aj, wj] = axes[j];
      ca(i, j) = wi * wj * a.covariance(ai, aj);
      cb(i, j) = wi * wj * b.covariance(ai, aj);
    }
  }
  const Eigen::MatrixXd cm = 0.5 * (ca + cb);
  Eigen::LLT<Eigen::MatrixXd> llt(cm);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("bhattacharyya_gaussian: singular averaged covariance");
  }
  double log_det_m = 0.0;
  for (int i = 0; i < m; ++i) log_det_m += 2.0 * std::log(llt.matrixL()(i, i));
  const double log_det_a = std::log(ca.determinant());
  const double log_det_b = std::log(cb.determinant());
  const double term1 = 0.125 * dmu.dot(llt.solve(dmu));
  const double term2 = 0.5 * (log_det_m - 0.5 * (log_det_a + log_det_b));
  return term1 + term2;
}

double gmm_distance(const GaussianMixture& p, const GaussianMixture& q,
                    const FeatureWeights& weights) {
  if (p.components.empty() || q.components.empty()) {
    throw std::invalid_argument("gmm_distance: empty mixture");
  }
  double score = 0.0;
  for (const auto& pc : p.components) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& qc : q.components) {
      best = std::min(best, bhattacharyya_gaussian(pc, qc, weights));
    }
    score += pc.weight * best;
  }
  return score;
}

void classify_cells(CellGrid& grid, const std::vector<GaussianMixture>& library,
                    const ClassifyParams& params) {
  if (library.empty()) {
    throw std::invalid_argument("classify_cells: empty library");
  }
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    Cell& cell = grid.cells[i];
    if (cell.samples.size() < params.min_samples) {
      cell.label = CellLabel::Unknown;
      cell.score = 0.0;
      continue;
    }
    if (cell.gmm.components.empty()) {
      EmParams em = params.em;
      em.seed = params.em.seed * 0x9e3779b97f4a7c15ULL + i + 1;
      cell.gmm = fit_gmm_bic(cell.samples, params.k_max, em);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& entry : library) {
      best = std::min(best, gmm_distance(cell.gmm, entry, params.weights));
    }
    cell.score = best;
    cell.label = best <= params.threshold ? CellLabel::Traversable : CellLabel::NotTraversable;
  }
}

std::vector<GaussianMixture> train_library(const std::vector<const CellGrid*>& grids,
                                           const ClassifyParams& params, double merge_threshold) {
  std::vector<GaussianMixture> library;
  for (const CellGrid* grid : grids) {
    for (std::size_t i = 0; i < grid->cells.size(); ++i) {
      const Cell& cell = grid->cells[i];
      if (cell.label != CellLabel::Traversable) continue;
      if (cell.samples.size() < params.min_samples) continue;
      GaussianMixture gmm = cell.gmm;
      if (gmm.components.empty()) {
        EmParams em = params.em;
        em.seed = params.em.seed * 0x9e3779b97f4a7c15ULL + i + 1;
        gmm = fit_gmm_bic(cell.samples, params.k_max, em);
      }
      bool duplicate = false;
      for (const auto& entry : library) {
        if (gmm_distance(gmm, entry, params.weights) < merge_threshold) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) library.push_back(std::move(gmm));
    }
  }
  if (library.empty()) {
    throw std::invalid_argument("train_library: no training cells");
  }
  return library;
}

namespace {

// All cells whose interior the segment (x0,y0)-(x1,y1) crosses, in grid
// index coordinates (cell (r,c) spans [c, c+1) x [r, r+1)).
std::vector<std::pair<int, int>> supercover_cells(double x0, double y0, double x1, double y1,
                                                  int n_rows, int n_cols) {
  std::vector<double> ts{0.0, 1.0};
  const double dx = x1 - x0, dy = y1 - y0;
  if (dx != 0.0) {
    const int lo = static_cast<int>(std::ceil(std::min(x0, x1)));
    const int hi = static_cast<int>(std::floor(std::max(x0, x1)));
    for (int g = lo; g <= hi; ++g) {
      const double t = (g - x0) / dx;
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  }
  if (dy != 0.0) {
    const int lo = static_cast<int>(std::ceil(std::min(y0, y1)));
    const int hi = static_cast<int>(std::floor(std::max(y0, y1)));
    for (int g = lo; g <= hi; ++g) {
      const double t = (g - y0) / dy;
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());
  std::vector<std::pair<int, int>> cells;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const int c = static_cast<int>(std::floor(x0 + tm * dx));
    const int r = static_cast<int>(std::floor(y0 + tm * dy));
    if (r < 0 || r >= n_rows || c < 0 || c >= n_cols) continue;
    if (cells.empty() || cells.back() != std::make_pair(r, c)) cells.emplace_back(r, c);
  }
  return cells;
}

}  // namespace

void mark_occlusion_shadows(CellGrid& grid, double sensor_x, double sensor_y) {
  const double sx = (sensor_x - grid.origin_x) / grid.cell_size;
  const double sy = (sensor_y - grid.origin_y) / grid.cell_size;
  const auto sensor_col = static_cast<long>(std::floor(sx));
  const auto sensor_row = static_cast<long>(std::floor(sy));
  std::vector<std::uint8_t> blocking(grid.cells.size(), 0);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    blocking[i] = grid.cells[i].label == CellLabel::NotTraversable ? 1 : 0;
  }
  for (int r = 0; r < grid.n_rows; ++r) {
    for (int c = 0; c < grid.n_cols; ++c) {
      Cell& cell = grid.at(r, c);
      if (blocking[grid.index(r, c)]) continue;
      const double tx = c + 0.5;
      const double ty = r + 0.5;
      for (const auto& [br, bc] : supercover_cells(sx, sy, tx, ty, grid.n_rows, grid.n_cols)) {
        if (br == r && bc == c) continue;
        if (br == sensor_row && bc == sensor_col) continue;
        if (blocking[grid.index(br, bc)]) {
          cell.label = CellLabel::OccludedNotTraversable;
          break;
        }
      }
    }
  }
}

void write_library(std::ostream& out, const std::vector<GaussianMixture>& library) {
  char buf[64];
  out << library.size() << "\n";
  for (const auto& gmm : library) {
    out << gmm.components.size() << "\n";
    for (const auto& c : gmm.components) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", c.weight);
      out << buf;
      for (int i = 0; i < c.mean.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g%c", c.mean(i),
                      i + 1 == c.mean.size() ? '\n' : ' ');
        out << buf;
      }
      for (int r = 0; r < c.covariance.rows(); ++r) {
        for (int cc = 0; cc < c.covariance.cols(); ++cc) {
          std::snprintf(buf, sizeof(buf), "%.17g%c", c.covariance(r, cc),
                        cc + 1 == c.covariance.cols() ? '\n' : ' ');
          out << buf;
        }
      }
    }
  }
}

void write_library_file(const std::string& path, const std::vector<GaussianMixture>& library) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write library file: " + path);
  write_library(out, library);
}

std::vector<GaussianMixture> read_library(std::istream& in) {
  std::size_t n = 0;
  in >> n;
  std::vector<GaussianMixture> library(n);
  for (auto& gmm : library) {
    std::size_t k = 0;
    in >> k;
    gmm.components.resize(k);
    for (auto& c : gmm.components) {
      in >> c.weight;
      c.mean.resize(kCellFeatureDim);
      for (int i = 0; i < kCellFeatureDim; ++i) in >> c.mean(i);
      c.covariance.resize(kCellFeatureDim, kCellFeatureDim);
      for (int r = 0; r < kCellFeatureDim; ++r)
        for (int cc = 0; cc < kCellFeatureDim; ++cc) in >> c.covariance(r, cc);
    }
  }
  if (!in) throw std::runtime_error("library file: truncated");
  return library;
}

std::vector<GaussianMixture> read_library_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open library file: " + path);
  return read_library(in);
}

}  // namespace agriperc::cells
