#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.hpp"
#include "trackforge/evaluation.hpp"

using namespace trackforge;

namespace {

Box3 unit_box(double x, double y) { return box_from_center(x, y, 0.0, {1.0, 1.0, 1.0}); }

MatchResult scored(const std::vector<std::pair<double, bool>>& s, int gt) {
  MatchResult m;
  m.scored = s;
  m.num_ground_truth = gt;
  return m;
}

}  // namespace

TEST_CASE("iou basics") {
  const Box3 a = unit_box(0, 0);
  CHECK(iou_3d(a, a) == 1.0);
  CHECK(iou_3d(a, unit_box(5, 5)) == 0.0);
  // Shift by half the width: intersection 0.5, union 1.5.
  CHECK(iou_3d(a, unit_box(0.5, 0.0)) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("match_frame classifies per the 50% overlap rule") {
  const std::vector<Box3> gt{unit_box(0, 0)};

  const MatchResult tp = match_frame({{unit_box(0, 0), 0.9}}, gt);
  REQUIRE(tp.scored.size() == 1);
  CHECK(tp.scored[0].second);

  const MatchResult fp = match_frame({{unit_box(3, 3), 0.9}}, gt);
  CHECK_FALSE(fp.scored[0].second);

  // IoU exactly 1/3 < 0.5: a false positive, ground truth unmatched.
  const MatchResult shifted = match_frame({{unit_box(0.5, 0.0), 0.9}}, gt);
  CHECK_FALSE(shifted.scored[0].second);
}

TEST_CASE("each ground truth box is matched at most once") {
  const std::vector<Box3> gt{unit_box(0, 0)};
  const MatchResult m = match_frame({{unit_box(0.05, 0), 0.9}, {unit_box(-0.05, 0), 0.8}}, gt);
  int tp = 0;
  for (const auto& [s, hit] : m.scored) tp += hit;
  CHECK(tp == 1);
  // The higher-scored prediction takes the match.
  CHECK(m.scored[0].first == 0.9);
  CHECK(m.scored[0].second);
}

TEST_CASE("matching does not depend on prediction input order") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Box3> gt;
    for (int g = 0; g < 4; ++g) gt.push_back(unit_box(pos(rng), pos(rng)));
    std::vector<ScoredBox> preds;
    for (int k = 0; k < 8; ++k) preds.push_back({unit_box(pos(rng), pos(rng)), score(rng)});

    const MatchResult a = match_frame(preds, gt);
    std::shuffle(preds.begin(), preds.end(), rng);
    const MatchResult b = match_frame(preds, gt);
    CHECK(a.scored == b.scored);
  }
}

TEST_CASE("average precision worked values") {
  // Perfect ranking over two ground truths.
  CHECK(average_precision(scored({{0.9, true}, {0.8, true}}, 2)) == 1.0);

  // The classic {TP, FP, TP} example: 1*0.5 + (2/3)*0.5.
  CHECK(average_precision(scored({{0.9, true}, {0.8, false}, {0.7, true}}, 2)) ==
        Catch::Approx(0.8333333333333333).margin(1e-12));

  // No predictions at all: zero recall, zero AP.
  CHECK(average_precision(scored({}, 3)) == 0.0);

  CHECK_THROWS_AS(average_precision(scored({{0.9, true}}, 0)), Error);
}

TEST_CASE("average precision matches the prefix-table oracle") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 100);
    std::vector<std::pair<double, bool>> s;
    int tp = 0;
    for (int i = 0; i < n; ++i) {
      const bool hit = rng() % 3 == 0;
      tp += hit;
      s.emplace_back(score(rng), hit);
    }
    const int gt = tp + static_cast<int>(rng() % 5);
    if (gt == 0) continue;
    CHECK(average_precision(scored(s, gt)) ==
          Catch::Approx(oracles::average_precision_prefix_table(s, gt)).margin(1e-12));
  }
}

TEST_CASE("average precision is invariant under monotone score transforms") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<std::pair<double, bool>> s;
  for (int i = 0; i < 60; ++i) s.emplace_back(score(rng), rng() % 2);
  const double base = average_precision(scored(s, 35));
  auto transformed = s;
  for (auto& [v, hit] : transformed) v = std::exp(3.0 * v) + 7.0;
  CHECK(average_precision(scored(transformed, 35)) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("accuracy worked values") {
  std::vector<std::pair<double, bool>> all_correct{{0.9, true}, {0.1, false}};
  CHECK(accuracy(all_correct) == 1.0);

  // TP=8, TN=8, FP=2, FN=2 -> 0.8.
  std::vector<std::pair<double, bool>> mixed;
  for (int i = 0; i < 8; ++i) mixed.emplace_back(0.9, true);
  for (int i = 0; i < 8; ++i) mixed.emplace_back(0.1, false);
  for (int i = 0; i < 2; ++i) mixed.emplace_back(0.9, false);
  for (int i = 0; i < 2; ++i) mixed.emplace_back(0.1, true);
  CHECK(accuracy(mixed) == Catch::Approx(0.8));

  CHECK_THROWS_AS(accuracy(std::vector<std::pair<double, bool>>{}), Error);
}

TEST_CASE("proposal truth labeling by IoU") {
  const std::vector<Box3> gt{unit_box(0, 0), unit_box(4, 4)};
  std::vector<ScoredBox> props{{unit_box(0.05, 0), 0.2},   // overlaps gt0
                               {unit_box(4.0, 4.0), 0.8},  // overlaps gt1
                               {unit_box(-5, -5), 0.9}};   // background
  const auto labeled = label_proposals_by_iou(props, gt);
  REQUIRE(labeled.size() == 3);
  CHECK(labeled[0].second);
  CHECK(labeled[1].second);
  CHECK_FALSE(labeled[2].second);
}

TEST_CASE("pr curve endpoints") {
  const MatchResult m = scored({{0.9, true}, {0.8, false}, {0.7, true}}, 2);
  const auto pr = pr_curve(m);
  REQUIRE(pr.size() == 2);
  CHECK(pr.front().first == Catch::Approx(0.5));   // first TP: recall 0.5
  CHECK(pr.front().second == Catch::Approx(1.0));  // precision from the top prediction
  CHECK(pr.back().first == Catch::Approx(1.0));
  CHECK(pr.back().second == Catch::Approx(2.0 / 3.0));
}
