#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bitsel/eval.hpp"
#include "helpers.hpp"

using namespace bitsel;

namespace {

std::vector<std::int64_t> hist_from_dists(const std::vector<int>& dists, int b) {
  std::vector<std::int64_t> h(static_cast<std::size_t>(b) + 1, 0);
  for (int d : dists) ++h[static_cast<std::size_t>(d)];
  return h;
}

}  // namespace

TEST_CASE("roc endpoints, monotonicity and agreement with auc") {
  const int b = 16;
  Rng rng(200);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> md, nd;
    const int m = 1 + static_cast<int>(rng.uniform_below(150));
    const int n = 1 + static_cast<int>(rng.uniform_below(150));
    for (int i = 0; i < m; ++i) md.push_back(static_cast<int>(rng.uniform_below(b + 1)));
    for (int i = 0; i < n; ++i) nd.push_back(static_cast<int>(rng.uniform_below(b + 1)));
    const auto mh = hist_from_dists(md, b);
    const auto nh = hist_from_dists(nd, b);
    const RocCurve curve = roc(mh, nh);
    REQUIRE(curve.points.size() == static_cast<std::size_t>(b) + 1);
    CHECK(curve.points.back().tpr == 1.0);
    CHECK(curve.points.back().fpr == 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
      CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
    }
    // trapezoidal area and Mann-Whitney are the same integer numerator
    CHECK(curve.auc == auc(mh, nh));

    // explicit trapezoid re-integration stays within float tolerance
    double area = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    for (const auto& pt : curve.points) {
      area += (pt.fpr - prev_fpr) * (pt.tpr + prev_tpr) / 2.0;
      prev_fpr = pt.fpr;
      prev_tpr = pt.tpr;
    }
    CHECK(std::abs(area - curve.auc) < 1e-12);
  }
}

TEST_CASE("roc textbook shapes") {
  const int b = 8;
  std::vector<std::int64_t> match(b + 1, 0), nonmatch(b + 1, 0);
  match[0] = 5;
  nonmatch[b] = 5;
  const RocCurve perfect = roc(match, nonmatch);
  CHECK(perfect.auc == 1.0);
  bool passes_corner = false;
  for (const auto& pt : perfect.points) passes_corner = passes_corner || (pt.fpr == 0.0 && pt.tpr == 1.0);
  CHECK(passes_corner);

  std::vector<std::int64_t> same(b + 1, 0);
  same[2] = 3;
  same[6] = 7;
  const RocCurve diag = roc(same, same);
  CHECK(diag.auc == 0.5);
  for (const auto& pt : diag.points) CHECK(pt.tpr == pt.fpr);

  const auto mh = hist_from_dists({1, 2}, 3);
  const auto nh = hist_from_dists({2, 3}, 3);
  CHECK(roc(mh, nh).auc == doctest::Approx(0.875).epsilon(1e-15));

  std::vector<std::int64_t> empty(b + 1, 0);
  CHECK_THROWS_AS(roc(match, empty), UsageError);
}

TEST_CASE("fpr_at_tpr uses the conservative step rule") {
  const int b = 8;
  std::vector<std::int64_t> match(b + 1, 0), nonmatch(b + 1, 0);
  match[0] = 5;
  nonmatch[b] = 5;
  CHECK(fpr_at_tpr(roc(match, nonmatch), 0.95) == 0.0);

  std::vector<std::int64_t> same(b + 1, 0);
  same[4] = 10;
  CHECK(fpr_at_tpr(roc(same, same), 0.95) == 1.0);

  // matches {0,0,0,5}, nonmatches {3,6,7,8}: tpr first reaches 0.95 at t=5
  const auto mh = hist_from_dists({0, 0, 0, 5}, b);
  const auto nh = hist_from_dists({3, 6, 7, 8}, b);
  CHECK(fpr_at_tpr(roc(mh, nh), 0.95) == doctest::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(fpr_at_tpr(roc(mh, nh), 0.0), ParamError);
  CHECK_THROWS_AS(fpr_at_tpr(roc(mh, nh), 1.5), ParamError);
}

TEST_CASE("evaluate_descriptor reproduces the selector's training AUC exactly") {
  const PairSet set = generate_synthetic_pairset(33, 8, 4, 0.08);
  const BitPool pool = sample_brief_pool(12, 128, 2, 1.0);
  const BitMatrix responses = build_response_matrix(pool, set.patches, 2);
  const BitMatrix table = build_disagreement_table(responses, set.pairs);
  const auto labels = set.labels();

  const auto result = select_hill_climb(table, labels, 32, 256, 9);
  double final_auc = result.trace.front().auc;
  for (const auto& e : result.trace)
    if (e.accepted) final_auc = e.auc;

  Descriptor desc = result.descriptor;
  const EvalReport report = evaluate_descriptor(desc, pool, set, 2);
  CHECK(report.auc == final_auc);  // same integer numerator on both paths
  CHECK(report.curve.points.size() == 33);
  CHECK(report.fpr95 == fpr_at_tpr(report.curve, 0.95));
}

TEST_CASE("evaluate_descriptor is thread-count independent") {
  const PairSet set = generate_synthetic_pairset(34, 6, 3, 0.15);
  const BitPool pool = sample_brief_pool(13, 64, 2, 2.0);
  const Descriptor desc = select_random(64, 24, 5);
  const EvalReport a = evaluate_descriptor(desc, pool, set, 1);
  const EvalReport b = evaluate_descriptor(desc, pool, set, 4);
  CHECK(a.auc == b.auc);
  CHECK(a.fpr95 == b.fpr95);
  for (std::size_t i = 0; i < a.curve.points.size(); ++i) {
    CHECK(a.curve.points[i].fpr == b.curve.points[i].fpr);
    CHECK(a.curve.points[i].tpr == b.curve.points[i].tpr);
  }
}

TEST_CASE("report and curve files have the documented shape") {
  testutil::TempDir tmp("report_io");
  const PairSet set = generate_synthetic_pairset(35, 4, 3, 0.2);
  const BitPool pool = sample_brief_pool(14, 32, 2, 1.0);
  const Descriptor desc = select_random(32, 16, 6);
  const EvalReport report = evaluate_descriptor(desc, pool, set, 1);

  write_report_header(tmp.file("report.csv"));
  append_report_row(tmp.file("report.csv"), "random", "synthetic", "synthetic", 0, report);
  const std::string report_text = testutil::read_file(tmp.file("report.csv"));
  CHECK(report_text.find("method,train,test,run,auc,fpr95\n") == 0);
  CHECK(report_text.find("random,synthetic,synthetic,0,") != std::string::npos);

  write_curve(report.curve, tmp.file("curve.csv"));
  const std::string curve_text = testutil::read_file(tmp.file("curve.csv"));
  CHECK(curve_text.find("threshold,fpr,tpr\n") == 0);
  // b+1 data rows
  const auto rows = std::count(curve_text.begin(), curve_text.end(), '\n');
  CHECK(rows == 1 + 16 + 1);
}
