#include <random>

#include "agriperc/fuse.hpp"
#include "doctest.h"

using namespace agriperc::fuse;

TEST_CASE("confusion counts with the Ground-positive convention") {
  ConfusionResult r = confusion({Label::Ground, Label::Ground, Label::NonGround},
                                {Label::Ground, Label::Ground, Label::NonGround});
  CHECK(r.cm.tp == 2);
  CHECK(r.cm.tn == 1);
  CHECK(r.cm.fp == 0);
  CHECK(r.cm.fn == 0);
  CHECK(r.excluded == 0);

  std::vector<Label> pred(7, Label::Ground), truth(7, Label::NonGround);
  ConfusionResult r2 = confusion(pred, truth);
  CHECK(r2.cm.fp == 7);
  CHECK(r2.cm.tp + r2.cm.tn + r2.cm.fn == 0);

  CHECK_THROWS_AS(confusion({Label::Ground}, {}), std::invalid_argument);
}

TEST_CASE("unknown predictions are excluded and counted") {
  ConfusionResult r = confusion({Label::Unknown, Label::Ground}, {Label::Ground, Label::Ground});
  CHECK(r.excluded == 1);
  CHECK(r.cm.tp == 1);
  CHECK(r.cm.total() == 1);
}

TEST_CASE("confusion matches a hand-counting oracle on random labels") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coin(0, 2);
  std::vector<Label> pred, truth;
  for (int i = 0; i < 1000; ++i) {
    pred.push_back(static_cast<Label>(coin(rng) == 2 ? 2 : coin(rng) % 2));
    truth.push_back(static_cast<Label>(coin(rng) % 2));
  }
  ConfusionResult r = confusion(pred, truth);
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0, ex = 0;
  for (int i = 0; i < 1000; ++i) {
    if (pred[i] == Label::Unknown || truth[i] == Label::Unknown) {
      ++ex;
    } else if (pred[i] == Label::Ground) {
      (truth[i] == Label::Ground ? tp : fp) += 1;
    } else {
      (truth[i] == Label::Ground ? fn : tn) += 1;
    }
  }
  CHECK(r.cm.tp == tp);
  CHECK(r.cm.fp == fp);
  CHECK(r.cm.tn == tn);
  CHECK(r.cm.fn == fn);
  CHECK(r.excluded == ex);
}

TEST_CASE("metrics hand-computed fixture") {
  MetricReport m = metrics({90, 10, 45, 5});
  CHECK(*m.precision == doctest::Approx(0.900).epsilon(1e-12));
  CHECK(*m.rejection_precision == doctest::Approx(0.900).epsilon(1e-12));
  CHECK(*m.recall == doctest::Approx(90.0 / 95.0).epsilon(1e-12));
  CHECK(*m.specificity == doctest::Approx(45.0 / 55.0).epsilon(1e-12));
  CHECK(*m.accuracy == doctest::Approx(0.900).epsilon(1e-12));
  CHECK(*m.f1 == doctest::Approx(2.0 * 0.9 * (90.0 / 95.0) / (0.9 + 90.0 / 95.0)).epsilon(1e-12));
}

TEST_CASE("perfect classifier and undefined denominators") {
  MetricReport p = metrics({10, 0, 10, 0});
  CHECK(*p.precision == 1.0);
  CHECK(*p.rejection_precision == 1.0);
  CHECK(*p.recall == 1.0);
  CHECK(*p.specificity == 1.0);
  CHECK(*p.accuracy == 1.0);
  CHECK(*p.f1 == 1.0);

  MetricReport u = metrics({0, 0, 3, 2});
  CHECK(!u.precision.has_value());
  CHECK(!u.f1.has_value());
  CHECK(*u.recall == 0.0);
  CHECK(*u.rejection_precision == doctest::Approx(0.6).epsilon(1e-12));

  MetricReport e = metrics({0, 0, 0, 0});
  CHECK(!e.accuracy.has_value());
  CHECK(!e.specificity.has_value());
}

TEST_CASE("metrics satisfy the accuracy decomposition identity") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> c(0, 200);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm{c(rng), c(rng), c(rng), c(rng)};
    if (cm.total() == 0) continue;
    MetricReport m = metrics(cm);
    if (!m.recall || !m.specificity) continue;
    const double lhs = *m.accuracy;
    const double rhs = (*m.recall * (cm.tp + cm.fn) + *m.specificity * (cm.tn + cm.fp)) /
                       static_cast<double>(cm.total());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("weights from ground truth") {
  ClassifierWeights w = weights_from_groundtruth({97, 3, 9, 1});
  CHECK(w.p == doctest::Approx(0.97).epsilon(1e-12));
  CHECK(w.rp == doctest::Approx(0.90).epsilon(1e-12));

  ClassifierWeights perfect = weights_from_groundtruth({5, 0, 5, 0});
  CHECK(perfect.p == 1.0);
  CHECK(perfect.rp == 1.0);

  CHECK_THROWS_AS(weights_from_groundtruth({0, 0, 1, 1}), std::invalid_argument);
}

TEST_CASE("score fusion closed-form cases") {
  ClassifierWeights unit{1.0, 1.0};
  CHECK(fuse_scores(2.0, Label::Ground, 4.0, Label::Ground, unit, unit) ==
        doctest::Approx(3.0).epsilon(1e-12));

  ClassifierWeights zero{0.0, 0.0};
  CHECK(fuse_scores(2.0, Label::Ground, 4.0, Label::Ground, unit, zero) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(fuse_scores(1, Label::Ground, 2, Label::Ground, zero, zero),
                  std::invalid_argument);

  // Field-calibrated weights applied to both Ground votes.
  ClassifierWeights wl{0.973, 0.836};
  ClassifierWeights ws{0.969, 0.826};
  const double fused = fuse_scores(2.0, Label::Ground, 4.0, Label::Ground, wl, ws);
  CHECK(fused == doctest::Approx((0.973 * 2 + 0.969 * 4) / (0.973 + 0.969)).epsilon(1e-12));
  CHECK(fused == doctest::Approx(2.9979).epsilon(1e-4));
}

TEST_CASE("score fusion is a convex combination and symmetric under swap") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> s(0.0, 30.0);
  for (int i = 0; i < 500; ++i) {
    ClassifierWeights wa{u(rng), u(rng)};
    ClassifierWeights wb{u(rng), u(rng)};
    const Label la = u(rng) < 0.5 ? Label::Ground : Label::NonGround;
    const Label lb = u(rng) < 0.5 ? Label::Ground : Label::NonGround;
    const double ma = s(rng), mb = s(rng);
    const double active_a = la == Label::Ground ? wa.p : wa.rp;
    const double active_b = lb == Label::Ground ? wb.p : wb.rp;
    if (active_a + active_b <= 0.0) continue;
    const double f = fuse_scores(ma, la, mb, lb, wa, wb);
    CHECK(f >= std::min(ma, mb) - 1e-12);
    CHECK(f <= std::max(ma, mb) + 1e-12);
    CHECK(f == doctest::Approx(fuse_scores(mb, lb, ma, la, wb, wa)).epsilon(1e-12));
  }
}

namespace {

TraversabilityMap make_map(int rows, int cols) { return {0, 0, 0.4, rows, cols}; }

}  // namespace

TEST_CASE("map fusion pass-through and agreement cases") {
  ClassifierWeights w{0.9, 0.8};
  TraversabilityMap a = make_map(2, 2);
  TraversabilityMap b = make_map(2, 2);
  a.at(0, 0).patch = {Label::Ground, 1.0};
  a.at(0, 1).patch = {Label::NonGround, 20.0};
  // b entirely unobserved -> output equals a.
  TraversabilityMap f = fuse_maps(a, b, w, w, 11.07);
  CHECK(f.at(0, 0).patch.label == Label::Ground);
  CHECK(f.at(0, 1).patch.label == Label::NonGround);
  CHECK(f.at(1, 1).patch.label == Label::Unknown);
  CHECK(!f.at(1, 1).observed_a);

  // Both agree everywhere -> labels preserved.
  b = a;
  TraversabilityMap g = fuse_maps(a, b, w, w, 11.07);
  CHECK(g.at(0, 0).patch.label == Label::Ground);
  CHECK(g.at(0, 1).patch.label == Label::NonGround);
  CHECK(g.at(0, 0).observed_a);
  CHECK(g.at(0, 0).observed_b);

  TraversabilityMap wrong = make_map(3, 2);
  CHECK_THROWS_AS(fuse_maps(a, wrong, w, w, 11.07), std::invalid_argument);
}

TEST_CASE("map fusion never labels a doubly-unobserved cell") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> score(0.0, 25.0);
  TraversabilityMap a = make_map(6, 6), b = make_map(6, 6);
  for (auto* m : {&a, &b}) {
    for (auto& cell : m->cells) {
      const int k = pick(rng);
      cell.patch.label = k == 0 ? Label::Ground : (k == 1 ? Label::NonGround : Label::Unknown);
      cell.patch.score = score(rng);
    }
  }
  ClassifierWeights w{0.95, 0.85};
  TraversabilityMap f = fuse_maps(a, b, w, w, 11.07);
  for (std::size_t i = 0; i < f.cells.size(); ++i) {
    if (a.cells[i].patch.label == Label::Unknown && b.cells[i].patch.label == Label::Unknown) {
      CHECK(f.cells[i].patch.label == Label::Unknown);
    } else {
      CHECK(f.cells[i].patch.label != Label::Unknown);
    }
  }
}
