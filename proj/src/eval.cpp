#include "bitsel/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "bitsel/parallel.hpp"

namespace bitsel {

RocCurve roc(std::span<const std::int64_t> match_hist, std::span<const std::int64_t> nonmatch_hist) {
  if (match_hist.size() != nonmatch_hist.size())
    throw UsageError("roc: histograms must cover the same distance range");
  std::uint64_t match_total = 0, nonmatch_total = 0;
  for (std::int64_t v : match_hist) match_total += static_cast<std::uint64_t>(v);
  for (std::int64_t v : nonmatch_hist) nonmatch_total += static_cast<std::uint64_t>(v);
  if (match_total == 0 || nonmatch_total == 0)
    throw UsageError("roc: both classes need positive mass");

  RocCurve curve;
  curve.points.reserve(match_hist.size());
  std::uint64_t match_cum = 0, nonmatch_cum = 0;
  for (std::size_t t = 0; t < match_hist.size(); ++t) {
    match_cum += static_cast<std::uint64_t>(match_hist[t]);
    nonmatch_cum += static_cast<std::uint64_t>(nonmatch_hist[t]);
    RocPoint pt;
    pt.threshold = static_cast<int>(t);
    pt.tpr = static_cast<double>(match_cum) / static_cast<double>(match_total);
    pt.fpr = static_cast<double>(nonmatch_cum) / static_cast<double>(nonmatch_total);
    curve.points.push_back(pt);
  }
  curve.auc = static_cast<double>(mann_whitney_numerator_x2(match_hist, nonmatch_hist)) /
              (2.0 * static_cast<double>(match_total) * static_cast<double>(nonmatch_total));
  return curve;
}

double fpr_at_tpr(const RocCurve& curve, double target_tpr) {
  if (target_tpr <= 0.0 || target_tpr > 1.0)
    throw ParamError("fpr_at_tpr: target must be in (0, 1]");
  for (const auto& pt : curve.points)
    if (pt.tpr >= target_tpr) return pt.fpr;
  return 1.0;  // unreachable for a complete curve: tpr hits 1 at the last threshold
}

EvalReport evaluate_descriptor(const Descriptor& desc, const BitPool& pool, const PairSet& set,
                               int threads) {
  if (set.pairs.empty()) throw UsageError("evaluate_descriptor: no pairs to evaluate");
  const std::int64_t num_patches = static_cast<std::int64_t>(set.patches.size());

  // Signatures only for patches some pair references.
  std::vector<std::int32_t> wanted;
  {
    std::vector<bool> used(static_cast<std::size_t>(num_patches), false);
    for (const auto& pp : set.pairs) {
      if (pp.a < 0 || pp.a >= num_patches || pp.b < 0 || pp.b >= num_patches)
        throw UsageError("evaluate_descriptor: pair index out of range");
      used[static_cast<std::size_t>(pp.a)] = true;
      used[static_cast<std::size_t>(pp.b)] = true;
    }
    for (std::int64_t i = 0; i < num_patches; ++i)
      if (used[static_cast<std::size_t>(i)]) wanted.push_back(static_cast<std::int32_t>(i));
  }

  std::vector<Signature> signatures(set.patches.size());
  parallel_blocks(static_cast<std::int64_t>(wanted.size()), threads, 1,
                  [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t i = lo; i < hi; ++i) {
                      const std::int32_t q = wanted[static_cast<std::size_t>(i)];
                      signatures[static_cast<std::size_t>(q)] =
                          compute_signature(desc, pool, set.patches[static_cast<std::size_t>(q)]);
                    }
                  });

  const int b = desc.b();
  std::vector<std::int64_t> match_hist(static_cast<std::size_t>(b) + 1, 0);
  std::vector<std::int64_t> nonmatch_hist(static_cast<std::size_t>(b) + 1, 0);
  for (const auto& pp : set.pairs) {
    const int d = hamming(signatures[static_cast<std::size_t>(pp.a)],
                          signatures[static_cast<std::size_t>(pp.b)]);
    auto& hist = pp.label == Label::Match ? match_hist : nonmatch_hist;
    ++hist[static_cast<std::size_t>(d)];
  }

  EvalReport report;
  report.curve = roc(match_hist, nonmatch_hist);
  report.auc = report.curve.auc;
  report.fpr95 = fpr_at_tpr(report.curve, 0.95);
  return report;
}

void write_report_header(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report file: " + path.string());
  out << "method,train,test,run,auc,fpr95\n";
}

void append_report_row(const std::filesystem::path& path, const std::string& method,
                       const std::string& train, const std::string& test, int run,
                       const EvalReport& report) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write report file: " + path.string());
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%d,%.10g,%.10g\n", run, report.auc, report.fpr95);
  out << method << "," << train << "," << test << buf;
  if (!out) throw IoError("short write to report file: " + path.string());
}

void write_curve(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write curve file: " + path.string());
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& pt : curve.points) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", pt.threshold, pt.fpr, pt.tpr);
    out << buf;
  }
  if (!out) throw IoError("short write to curve file: " + path.string());
}

}  // namespace bitsel
