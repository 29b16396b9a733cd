#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agriperc/ground.hpp"

namespace agriperc::fuse {

using ground::Label;
using ground::PatchLabel;

// Positive class = Ground.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct ConfusionResult {
  ConfusionMatrix cm;
  std::int64_t excluded = 0;  // Unknown predictions, kept out of the counts
};

// Any metric with a zero denominator is left unset.
struct MetricReport {
  std::optional<double> precision;
  std::optional<double> rejection_precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> accuracy;
  std::optional<double> f1;
};

struct ClassifierWeights {
  double p = 1.0;   // precision weight, applied when the classifier says Ground
  double rp = 1.0;  // rejection-precision weight, applied on NonGround
};

struct TravCell {
  PatchLabel patch;
  bool observed_a = false;
  bool observed_b = false;
  bool occluded = false;  // used by the cell classifier's shadow rule
};

struct TraversabilityMap {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double patch_size = 0.4;
  int n_rows = 0;
  int n_cols = 0;
  std::vector<TravCell> cells;  // row-major

  TraversabilityMap() = default;
  TraversabilityMap(double ox, double oy, double size, int rows, int cols)
      : origin_x(ox), origin_y(oy), patch_size(size), n_rows(rows), n_cols(cols),
        cells(static_cast<std::size_t>(rows) * cols) {}

  int index(int row, int col) const { return row * n_cols + col; }
  TravCell& at(int row, int col) { return cells[index(row, col)]; }
  const TravCell& at(int row, int col) const { return cells[index(row, col)]; }
  bool same_geometry(const TraversabilityMap& o) const {
    return origin_x == o.origin_x && origin_y == o.origin_y && patch_size == o.patch_size &&
           n_rows == o.n_rows && n_cols == o.n_cols;
  }
};

ConfusionResult confusion(const std::vector<Label>& pred, const std::vector<Label>& truth);

MetricReport metrics(const ConfusionMatrix& cm);

// Precision / rejection-precision pair measured against ground truth.
// Throws std::invalid_argument when either denominator is zero.
ClassifierWeights weights_from_groundtruth(const ConfusionMatrix& cm);

// Weighted-sum combination of two squared-Mahalanobis scores. The weight for
// each classifier is its precision when it voted Ground, its rejection
// precision otherwise.
double fuse_scores(double score_a, Label label_a, double score_b, Label label_b,
                   const ClassifierWeights& weights_a, const ClassifierWeights& weights_b);

// Fuses two single-sensor maps over identical grids. Co-observed cells get
// the weighted-sum score thresholded at fused_threshold; cells seen by one
// sensor keep that sensor's label; cells seen by neither stay Unknown.
TraversabilityMap fuse_maps(const TraversabilityMap& map_a, const TraversabilityMap& map_b,
                            const ClassifierWeights& weights_a, const ClassifierWeights& weights_b,
                            double fused_threshold);

// CSV export: one row per frame plus an `aggregate` footer row.
void write_metrics_csv(std::ostream& out, const std::vector<MetricReport>& per_frame,
                       const MetricReport& aggregate);

}  // namespace agriperc::fuse
