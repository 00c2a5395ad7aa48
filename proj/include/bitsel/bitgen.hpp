#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "bitsel/bitmatrix.hpp"
#include "bitsel/dataset.hpp"
#include "bitsel/types.hpp"

namespace bitsel {

// One candidate bit. An IntensityPair compares two smoothed pixel
// intensities, a VectorPair compares two components of an LBP vector.
struct IntensityPair {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool operator==(const IntensityPair&) const = default;
};

struct VectorPair {
  int i = 0, j = 0;
  bool operator==(const VectorPair&) const = default;
};

using BitSpec = std::variant<IntensityPair, VectorPair>;

enum class PoolKind : std::uint8_t { Brief, Lbp };

struct LbpParams {
  int dims = 256;           // 16 bins x (cells_per_side)^2
  double threshold = 0.01;  // on intensities scaled to [0,1]

  int cells_per_side() const;
  void validate() const;
};

inline constexpr double kLbpClip = 0.2;
inline constexpr int kDefaultBriefPoolSize = 1024;
inline constexpr int kDefaultLbpPoolSize = 4096;
inline constexpr int kDefaultMargin = 2;
inline constexpr double kDefaultSigma = 2.0;

// B candidate bits of one kind plus the preprocessing they assume.
struct BitPool {
  PoolKind kind = PoolKind::Brief;
  double sigma = kDefaultSigma;  // Brief: Gaussian smoothing
  int margin = kDefaultMargin;   // Brief: sampling margin
  LbpParams lbp;                 // Lbp: vector extraction parameters
  std::vector<BitSpec> specs;

  std::int64_t size() const { return static_cast<std::int64_t>(specs.size()); }
};

// B distinct pixel-pair tests with coordinates uniform in
// [margin, 63-margin]; deterministic in seed.
BitPool sample_brief_pool(std::uint64_t seed, int B, int margin = kDefaultMargin,
                          double sigma = kDefaultSigma);

// B distinct ordered component pairs (i, j), i != j, uniform over the
// n*(n-1) possibilities; deterministic in seed.
BitPool sample_lbp_pool(std::uint64_t seed, int B, int n = 256, double threshold = 0.01);

// Gaussian blur with standard deviation sigma, kernel radius ceil(3*sigma),
// coordinates clamped at the patch border. sigma = 0 is the identity.
ImageD preprocess_patch(const Patch& patch, double sigma);

bool eval_bit(const BitSpec& spec, const ImageD& smoothed);
bool eval_bit(const BitSpec& spec, const LbpVector& v);

// Raw CS-LBP(8,1) cell histograms: one 16-bin histogram per grid cell,
// concatenated cell-major. Entries are integral counts; boundary pixels are
// not coded (the radius-1 neighborhood must fit).
LbpVector extract_lbp_histogram(const Patch& patch, const LbpParams& params = {});

// Heikkila-style normalization of the raw histograms: L2-normalize, clip at
// 0.2, re-L2-normalize. Result has unit norm.
LbpVector extract_lbp_vector(const Patch& patch, const LbpParams& params = {});

// Evaluates every pool bit on every patch; row p, column q holds bit p on
// patch q. Preprocessing runs once per patch. Parallel over patches; the
// result is bit-identical for every thread count.
BitMatrix build_response_matrix(const BitPool& pool, const std::vector<Patch>& patches,
                                int threads = 1);

// entry[p][k] = responses[p][pairs[k].a] XOR responses[p][pairs[k].b]. The
// Hamming distance of pair k under a descriptor is the sum of the selected
// rows' entries in column k.
BitMatrix build_disagreement_table(const BitMatrix& responses, const std::vector<PatchPair>& pairs);

// Pool file: `BITPOOL v1 <brief|lbp> <B> <params...>` then one spec per
// line (`ip x1 y1 x2 y2` or `vp i j`). Round-trips losslessly.
void write_pool(const BitPool& pool, const std::filesystem::path& path);
BitPool read_pool(const std::filesystem::path& path);

}  // namespace bitsel
