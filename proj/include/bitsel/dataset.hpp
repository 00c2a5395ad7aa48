#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bitsel/types.hpp"

namespace bitsel {

enum class Label : std::uint8_t { NonMatch = 0, Match = 1 };

struct PatchPair {
  std::int32_t a = 0;
  std::int32_t b = 0;
  Label label = Label::NonMatch;
};

// A labeled patch-pair benchmark: patches plus matching/non-matching pairs
// indexing into them. Immutable once built.
struct PairSet {
  std::string name;
  std::vector<Patch> patches;
  std::vector<PatchPair> pairs;

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.label);
    return out;
  }
};

// Loads one subset of the Brown patch benchmark.
//
// Layout: `info.txt` has one line per patch, first field the 3D point id;
// patches live in 1024x1024 mosaics `patchesNNNN.bmp`, a 16x16 grid of 64x64
// tiles read row-major, global index = mosaic * 256 + tile. Pair files carry
// seven integers per line, `pid1 pt1 u1 pid2 pt2 u2 u3`; the pair matches
// exactly when pt1 == pt2.
PairSet load_brown_subset(const std::filesystem::path& root, const std::string& pair_file);

// Desk-scale stand-in for the Brown data: `num_classes` random base patches,
// `patches_per_class` noisy copies each (every pixel independently resampled
// with probability noise_level), all within-class pairs labeled Match plus an
// equal number of distinct random cross-class NonMatch pairs. Pure function
// of its arguments.
PairSet generate_synthetic_pairset(std::uint64_t seed, int num_classes, int patches_per_class,
                                   double noise_level);

// Container format: header `PAIRSET v1 <num_patches> <num_pairs>`, then raw
// row-major patch bytes (4096 per patch), then one `a b 0|1` line per pair.
void save_pairset(const PairSet& set, const std::filesystem::path& path);
PairSet load_pairset(const std::filesystem::path& path);

}  // namespace bitsel
