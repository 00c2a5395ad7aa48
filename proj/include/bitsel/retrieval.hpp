#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bitsel/selection.hpp"
#include "bitsel/types.hpp"

namespace bitsel {

struct Keypoint {
  int x = 0;
  int y = 0;
  int score = 0;  // sum over the qualifying arc of |I_p - I_center| - threshold
};

// FAST-9 segment test on the 16-pixel Bresenham circle: a corner needs a
// contiguous arc of at least 9 pixels all brighter than center+threshold or
// all darker than center-threshold. Scores go through 3x3 non-maximum
// suppression; keypoints closer than 32 pixels to a border are discarded
// (they cannot anchor a 64x64 patch); the strongest max_keypoints survive.
std::vector<Keypoint> detect_fast(const Image8& image, int intensity_threshold,
                                  int max_keypoints = 75);

// The 64x64 patch covering [cx-32, cx+31] x [cy-32, cy+31].
Patch crop_patch(const Image8& image, int cx, int cy);

struct IndexedImage {
  std::string name;
  int group = 0;
  std::vector<Signature> signatures;
};

struct ImageIndex {
  std::vector<IndexedImage> images;
  int signature_bits = 0;
};

ImageIndex index_images(std::span<const Image8> images, std::span<const int> groups,
                        std::span<const std::string> names, const Descriptor& desc,
                        const BitPool& pool, int fast_threshold, int max_keypoints = 75,
                        int threads = 1);

// Greedy one-to-one matching over candidate pairs sorted by ascending
// Hamming distance; a candidate is kept when both endpoints are unclaimed.
// Ties sort on the unordered endpoint pair, which makes the count symmetric
// in a and b.
int match_count(std::span<const Signature> a, std::span<const Signature> b, int hamming_threshold);

struct RetrievalHit {
  int image = 0;
  int matches = 0;
};

// All other images ranked by match count, ties broken by ascending image id;
// the top k are returned (fewer when the index is small).
std::vector<RetrievalHit> retrieve(int query, const ImageIndex& index, int k,
                                   int hamming_threshold);

// Mean over all queries of (co-group images in the top k) / k.
double precision_at_k(const ImageIndex& index, int k, int hamming_threshold);

// Exhaustive sweep of the Hamming threshold over 0..bits; returns the
// smallest threshold maximizing precision_at_k.
int tune_threshold(const ImageIndex& index, int k);

// Database manifest: one `path group_id` line per image; paths are resolved
// relative to the manifest's directory.
struct ManifestEntry {
  std::string path;
  int group = 0;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace bitsel
