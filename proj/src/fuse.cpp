#include "agriperc/fuse.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace agriperc::fuse {

ConfusionResult confusion(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("confusion: prediction/truth length mismatch");
  }
  ConfusionResult r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == Label::Unknown || truth[i] == Label::Unknown) {
      ++r.excluded;
      continue;
    }
    const bool pred_ground = pred[i] == Label::Ground;
    const bool true_ground = truth[i] == Label::Ground;
    if (pred_ground && true_ground) ++r.cm.tp;
    else if (pred_ground && !true_ground) ++r.cm.fp;
    else if (!pred_ground && !true_ground) ++r.cm.tn;
    else ++r.cm.fn;
  }
  return r;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricReport metrics(const ConfusionMatrix& cm) {
  MetricReport m;
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.rejection_precision = ratio(cm.tn, cm.tn + cm.fn);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

ClassifierWeights weights_from_groundtruth(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fp == 0 || cm.tn + cm.fn == 0) {
    throw std::invalid_argument("weights_from_groundtruth: insufficient ground truth");
  }
  ClassifierWeights w;
  w.p = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  w.rp = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fn);
  return w;
}

double fuse_scores(double score_a, Label label_a, double score_b, Label label_b,
                   const ClassifierWeights& weights_a, const ClassifierWeights& weights_b) {
  const double wa = label_a == Label::Ground ? weights_a.p : weights_a.rp;
  const double wb = label_b == Label::Ground ? weights_b.p : weights_b.rp;
  const double sum = wa + wb;
  if (sum <= 0.0) {
    throw std::invalid_argument("fuse_scores: degenerate weights");
  }
  return (wa * score_a + wb * score_b) / sum;
}

TraversabilityMap fuse_maps(const TraversabilityMap& map_a, const TraversabilityMap& map_b,
                            const ClassifierWeights& weights_a, const ClassifierWeights& weights_b,
                            double fused_threshold) {
  if (!map_a.same_geometry(map_b)) {
    throw std::invalid_argument("fuse_maps: grid geometry mismatch");
  }
  TraversabilityMap out(map_a.origin_x, map_a.origin_y, map_a.patch_size, map_a.n_rows,
                        map_a.n_cols);
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    const TravCell& a = map_a.cells[i];
    const TravCell& b = map_b.cells[i];
    TravCell& o = out.cells[i];
    const bool seen_a = a.patch.label != Label::Unknown;
    const bool seen_b = b.patch.label != Label::Unknown;
    o.observed_a = seen_a;
    o.observed_b = seen_b;
    if (seen_a && seen_b) {
      const double fused = fuse_scores(a.patch.score, a.patch.label, b.patch.score, b.patch.label,
                                       weights_a, weights_b);
      o.patch.score = fused;
      o.patch.label = fused <= fused_threshold ? Label::Ground : Label::NonGround;
    } else if (seen_a) {
      o.patch = a.patch;
    } else if (seen_b) {
      o.patch = b.patch;
    } else {
      o.patch = PatchLabel{};
    }
  }
  return out;
}

namespace {

void print_metric(std::ostream& out, const std::optional<double>& v) {
  if (v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    out << buf;
  } else {
    out << "undefined";
  }
}

void print_row(std::ostream& out, const std::string& tag, const MetricReport& m) {
  out << tag;
  for (const auto* v : {&m.precision, &m.rejection_precision, &m.recall, &m.specificity,
                        &m.accuracy, &m.f1}) {
    out << ",";
    print_metric(out, *v);
  }
  out << "\n";
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricReport>& per_frame,
                       const MetricReport& aggregate) {
  out << "frame,precision,rejection_precision,recall,specificity,accuracy,f1\n";
  for (std::size_t i = 0; i < per_frame.size(); ++i) {
    print_row(out, std::to_string(i), per_frame[i]);
  }
  print_row(out, "aggregate", aggregate);
}

}  // namespace agriperc::fuse
