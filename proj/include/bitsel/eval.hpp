#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bitsel/dataset.hpp"
#include "bitsel/selection.hpp"

namespace bitsel {

struct RocPoint {
  int threshold = 0;  // pairs with distance <= threshold count as positive
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC traced over the integer distance grid 0..b. The auc field is the
// trapezoidal area, which equals the tie-corrected Mann-Whitney statistic
// exactly (both divide the same integer numerator).
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

RocCurve roc(std::span<const std::int64_t> match_hist, std::span<const std::int64_t> nonmatch_hist);

// FPR at the smallest threshold whose TPR reaches target_tpr. Distances are
// integers, so the conservative step function is used; no interpolation.
double fpr_at_tpr(const RocCurve& curve, double target_tpr);

struct EvalReport {
  double auc = 0.0;
  double fpr95 = 0.0;
  RocCurve curve;
};

// Computes signatures for every patch referenced by the pair set, builds
// the distance histograms and returns curve plus scalar metrics. Pure
// function of its inputs.
EvalReport evaluate_descriptor(const Descriptor& desc, const BitPool& pool, const PairSet& set,
                               int threads = 1);

// Report CSV: `method,train,test,run,auc,fpr95`, one row per evaluation.
void write_report_header(const std::filesystem::path& path);
void append_report_row(const std::filesystem::path& path, const std::string& method,
                       const std::string& train, const std::string& test, int run,
                       const EvalReport& report);

// Curve CSV: `threshold,fpr,tpr`, one row per threshold 0..b.
void write_curve(const RocCurve& curve, const std::filesystem::path& path);

}  // namespace bitsel
