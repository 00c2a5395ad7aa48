#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bitsel/bitgen.hpp"
#include "bitsel/bitmatrix.hpp"
#include "bitsel/dataset.hpp"

namespace bitsel {

// An ordered selection of b distinct pool indices.
struct Descriptor {
  std::string pool_ref;  // name of the pool the indices refer to
  std::vector<std::int32_t> selected;

  std::int32_t b() const { return static_cast<std::int32_t>(selected.size()); }
};

// Packed b-bit output of a descriptor on one patch. Bit k lives in byte
// k/8 at position k%8 (least-significant first); padding bits are zero.
struct Signature {
  std::int32_t bits = 0;
  std::vector<std::uint8_t> bytes;
};

struct TraceEntry {
  std::int64_t iteration = 0;
  double auc = 0.0;
  bool accepted = false;
};
using SelectionTrace = std::vector<TraceEntry>;

// Per-pair Hamming distances under the current descriptor plus the two
// class histograms over distance 0..b. The hill climb maintains this
// incrementally; compute_pair_distances rebuilds it from scratch.
struct PairDistanceState {
  std::vector<std::int32_t> distances;
  std::vector<std::int64_t> match_hist;
  std::vector<std::int64_t> nonmatch_hist;
};

PairDistanceState compute_pair_distances(const BitMatrix& disagreement,
                                         const std::vector<Label>& labels,
                                         std::span<const std::int32_t> selected);

// Twice the Mann-Whitney numerator: 2*sum_{dm<dn} M(dm)N(dn) + sum_d M(d)N(d).
// Exact in integers; both auc() and roc() divide this by 2*|M|*|N|.
std::uint64_t mann_whitney_numerator_x2(std::span<const std::int64_t> match_hist,
                                        std::span<const std::int64_t> nonmatch_hist);

// Area under the ROC curve traced by thresholding distance, tie-corrected.
double auc(std::span<const std::int64_t> match_hist, std::span<const std::int64_t> nonmatch_hist);

// Number of differing bit positions. Word-popcount inside, contractually
// equal to the per-bit loop.
int hamming(const Signature& a, const Signature& b);

struct HillClimbResult {
  Descriptor descriptor;
  SelectionTrace trace;
};

// Called after initialization and after every accepted swap.
using HillClimbAudit =
    std::function<void(const PairDistanceState&, std::span<const std::int32_t>)>;

// AUC-driven stochastic hill climbing: start from b bits drawn uniformly
// without replacement, then `iterations` times (default 4*B) propose
// swapping a random descriptor position against a random unselected pool
// bit and accept only strict AUC improvement. One proposal costs
// O(|pairs|): distances are updated by the XOR of the two bit rows, never
// recomputed from scratch.
HillClimbResult select_hill_climb(const BitMatrix& disagreement, const std::vector<Label>& labels,
                                  int b, std::int64_t iterations, std::uint64_t seed,
                                  const HillClimbAudit& audit = {});

// Called after every boosting round with the renormalized weights.
using BoostingAudit = std::function<void(int, std::span<const double>, std::int32_t)>;

// AdaBoost-style sequential selection without replacement. Bit p acts as
// the weak classifier h_p(k) = +1 iff its disagreement on pair k is 0; each
// round picks the bit with minimal weighted error, then reweights with
// alpha = shrinkage * 0.5 * ln((1-eps)/eps).
Descriptor select_boosting(const BitMatrix& disagreement, const std::vector<Label>& labels, int b,
                           double shrinkage, const BoostingAudit& audit = {});

struct CorrelationStats {
  bool fill_in_used = false;
  int accepted_before_fill = 0;
};

// Rank bits by single-bit AUC, then greedily accept bits whose absolute
// Pearson correlation with every already selected bit (over the patch
// response rows) stays below tau. If the ranking runs out, the highest
// ranked rejected bits fill the remaining slots.
Descriptor select_correlation(const BitMatrix& disagreement, const std::vector<Label>& labels,
                              const BitMatrix& responses, int b, double tau,
                              CorrelationStats* stats = nullptr);

// b indices uniform without replacement; deterministic in seed.
Descriptor select_random(std::int64_t B, int b, std::uint64_t seed);

// Pearson correlation of two packed 0/1 rows; 0 when either row is constant.
double response_correlation(const BitMatrix& responses, std::int64_t p, std::int64_t q);

// AUC of a single bit used as a 1-bit distance.
double single_bit_auc(const BitMatrix& disagreement, const std::vector<Label>& labels,
                      std::int64_t p);

Signature compute_signature(const Descriptor& desc, const BitPool& pool, const Patch& patch);

std::string signature_hex(const Signature& sig);

// Descriptor file: `DESCRIPTOR v1 <pool-file-name> <b>` then one selected
// index per line.
void write_descriptor(const Descriptor& desc, const std::filesystem::path& path);
Descriptor read_descriptor(const std::filesystem::path& path);

// Trace file: CSV `iteration,auc,accepted`.
void write_trace(const SelectionTrace& trace, const std::filesystem::path& path);
SelectionTrace read_trace(const std::filesystem::path& path);

}  // namespace bitsel
