#include "bitsel/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bitsel/parallel.hpp"

namespace bitsel {

namespace {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr int kCircleX[16] = {0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1};
constexpr int kCircleY[16] = {-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3};

constexpr int kArcLength = 9;
constexpr int kPatchMargin = kPatchSize / 2;

// Score of the strongest contiguous arc of >= 9 equally-classified pixels;
// 0 when no such arc exists.
int segment_score(const Image8& img, int x, int y, int threshold) {
  const int center = img(y, x);
  // classification per circle pixel: +1 bright, -1 dark, 0 neither
  int cls[16];
  int excess[16];
  for (int i = 0; i < 16; ++i) {
    const int p = img(y + kCircleY[i], x + kCircleX[i]);
    if (p > center + threshold)
      cls[i] = 1;
    else if (p < center - threshold)
      cls[i] = -1;
    else
      cls[i] = 0;
    excess[i] = std::abs(p - center) - threshold;
  }

  int best = 0;
  for (int side = -1; side <= 1; side += 2) {
    // Walk the doubled circle so wrapped arcs are seen in one piece.
    int run = 0, sum = 0;
    for (int i = 0; i < 32; ++i) {
      const int j = i & 15;
      if (cls[j] != side) {
        run = 0;
        sum = 0;
        continue;
      }
      ++run;
      sum += excess[j];
      if (run >= kArcLength) best = std::max(best, sum);
      if (run >= 16) break;  // fully uniform circle, already summed once
    }
  }
  return best;
}

}  // namespace

std::vector<Keypoint> detect_fast(const Image8& image, int intensity_threshold, int max_keypoints) {
  if (image.rows() < 71 || image.cols() < 71)
    throw ParamError("detect_fast: image must be at least 71x71");
  if (intensity_threshold < 0) throw ParamError("detect_fast: threshold must be non-negative");
  if (max_keypoints < 1) throw ParamError("detect_fast: max_keypoints must be at least 1");

  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> score =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(h, w);
  for (int y = 3; y < h - 3; ++y)
    for (int x = 3; x < w - 3; ++x) score(y, x) = segment_score(image, x, y, intensity_threshold);

  // 3x3 NMS: a corner survives neighbors with greater score; on a tie the
  // earlier pixel in scan order wins.
  std::vector<Keypoint> kps;
  for (int y = 3; y < h - 3; ++y)
    for (int x = 3; x < w - 3; ++x) {
      const int s = score(y, x);
      if (s <= 0) continue;
      bool maximal = true;
      for (int dy = -1; dy <= 1 && maximal; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int ns = score(y + dy, x + dx);
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (ns > s || (ns == s && earlier)) {
            maximal = false;
            break;
          }
        }
      if (!maximal) continue;
      if (x < kPatchMargin || x > w - kPatchMargin || y < kPatchMargin || y > h - kPatchMargin)
        continue;
      kps.push_back({x, y, s});
    }

  std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(kps.size()) > max_keypoints) kps.resize(static_cast<std::size_t>(max_keypoints));
  return kps;
}

Patch crop_patch(const Image8& image, int cx, int cy) {
  if (cx < kPatchMargin || cx > static_cast<int>(image.cols()) - kPatchMargin ||
      cy < kPatchMargin || cy > static_cast<int>(image.rows()) - kPatchMargin)
    throw UsageError("crop_patch: center too close to the border");
  return image.block(cy - kPatchMargin, cx - kPatchMargin, kPatchSize, kPatchSize);
}

ImageIndex index_images(std::span<const Image8> images, std::span<const int> groups,
                        std::span<const std::string> names, const Descriptor& desc,
                        const BitPool& pool, int fast_threshold, int max_keypoints, int threads) {
  if (images.size() != groups.size() || (names.size() != 0 && names.size() != images.size()))
    throw UsageError("index_images: images, groups and names must align");
  ImageIndex index;
  index.signature_bits = desc.b();
  index.images.resize(images.size());
  parallel_blocks(static_cast<std::int64_t>(images.size()), threads, 1,
                  [&](std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t i = lo; i < hi; ++i) {
                      const auto idx = static_cast<std::size_t>(i);
                      IndexedImage& entry = index.images[idx];
                      entry.name = names.empty() ? std::to_string(i) : names[idx];
                      entry.group = groups[idx];
                      const auto kps = detect_fast(images[idx], fast_threshold, max_keypoints);
                      entry.signatures.reserve(kps.size());
                      for (const auto& kp : kps)
                        entry.signatures.push_back(
                            compute_signature(desc, pool, crop_patch(images[idx], kp.x, kp.y)));
                    }
                  });
  return index;
}

namespace {

struct Candidate {
  int dist;
  int lo, hi;  // unordered endpoint pair
  int first;   // orientation tie-break
  int ia, ib;
};

// Sorting on (dist, unordered pair) leaves only vertex-disjoint ties
// adjacent, so the greedy pass picks the same matching from either side.
std::vector<Candidate> sorted_candidates(std::span<const Signature> a,
                                         std::span<const Signature> b) {
  std::vector<Candidate> candidates;
  candidates.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      Candidate c;
      c.dist = hamming(a[i], b[j]);
      c.ia = static_cast<int>(i);
      c.ib = static_cast<int>(j);
      c.lo = std::min(c.ia, c.ib);
      c.hi = std::max(c.ia, c.ib);
      c.first = c.ia;
      candidates.push_back(c);
    }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    if (x.lo != y.lo) return x.lo < y.lo;
    if (x.hi != y.hi) return x.hi < y.hi;
    return x.first < y.first;
  });
  return candidates;
}

// Greedy claims only ever extend as the threshold grows, so one pass yields
// the match count for every threshold: profile[t] = count at threshold t.
std::vector<int> match_profile(std::span<const Signature> a, std::span<const Signature> b,
                               int bits) {
  std::vector<int> profile(static_cast<std::size_t>(bits) + 1, 0);
  const auto candidates = sorted_candidates(a, b);
  std::vector<bool> taken_a(a.size(), false), taken_b(b.size(), false);
  for (const auto& c : candidates) {
    if (taken_a[static_cast<std::size_t>(c.ia)] || taken_b[static_cast<std::size_t>(c.ib)]) continue;
    taken_a[static_cast<std::size_t>(c.ia)] = true;
    taken_b[static_cast<std::size_t>(c.ib)] = true;
    ++profile[static_cast<std::size_t>(c.dist)];
  }
  for (std::size_t t = 1; t < profile.size(); ++t) profile[t] += profile[t - 1];
  return profile;
}

}  // namespace

int match_count(std::span<const Signature> a, std::span<const Signature> b, int hamming_threshold) {
  if (hamming_threshold < 0) return 0;
  const auto candidates = sorted_candidates(a, b);
  std::vector<bool> taken_a(a.size(), false), taken_b(b.size(), false);
  int count = 0;
  for (const auto& c : candidates) {
    if (c.dist > hamming_threshold) break;
    if (taken_a[static_cast<std::size_t>(c.ia)] || taken_b[static_cast<std::size_t>(c.ib)]) continue;
    taken_a[static_cast<std::size_t>(c.ia)] = true;
    taken_b[static_cast<std::size_t>(c.ib)] = true;
    ++count;
  }
  return count;
}

std::vector<RetrievalHit> retrieve(int query, const ImageIndex& index, int k,
                                   int hamming_threshold) {
  const int n = static_cast<int>(index.images.size());
  if (query < 0 || query >= n) throw UsageError("retrieve: query not in index");
  if (k < 1) throw ParamError("retrieve: k must be at least 1");
  std::vector<RetrievalHit> hits;
  hits.reserve(static_cast<std::size_t>(n) - 1);
  for (int other = 0; other < n; ++other) {
    if (other == query) continue;
    hits.push_back({other, match_count(index.images[static_cast<std::size_t>(query)].signatures,
                                       index.images[static_cast<std::size_t>(other)].signatures,
                                       hamming_threshold)});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.matches != b.matches) return a.matches > b.matches;
    return a.image < b.image;
  });
  if (static_cast<int>(hits.size()) > k) hits.resize(static_cast<std::size_t>(k));
  return hits;
}

double precision_at_k(const ImageIndex& index, int k, int hamming_threshold) {
  const int n = static_cast<int>(index.images.size());
  if (n < 2) throw UsageError("precision_at_k: need at least two images");
  if (k < 1) throw ParamError("precision_at_k: k must be at least 1");
  double total = 0.0;
  for (int q = 0; q < n; ++q) {
    const auto hits = retrieve(q, index, k, hamming_threshold);
    int good = 0;
    for (const auto& h : hits)
      if (index.images[static_cast<std::size_t>(h.image)].group ==
          index.images[static_cast<std::size_t>(q)].group)
        ++good;
    total += static_cast<double>(good) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

int tune_threshold(const ImageIndex& index, int k) {
  const int n = static_cast<int>(index.images.size());
  if (n < 2) throw UsageError("tune_threshold: need at least two images");
  if (k < 1) throw ParamError("tune_threshold: k must be at least 1");
  const int bits = index.signature_bits;

  // Match profiles once per unordered image pair; the sweep then only ranks.
  std::vector<std::vector<int>> profiles(static_cast<std::size_t>(n) * n);
  for (int q = 0; q < n; ++q)
    for (int other = q + 1; other < n; ++other) {
      auto profile = match_profile(index.images[static_cast<std::size_t>(q)].signatures,
                                   index.images[static_cast<std::size_t>(other)].signatures, bits);
      profiles[static_cast<std::size_t>(q) * n + other] = profile;
      profiles[static_cast<std::size_t>(other) * n + q] = std::move(profile);
    }

  int best_t = 0;
  double best_p = -1.0;
  std::vector<RetrievalHit> hits;
  for (int t = 0; t <= bits; ++t) {
    double total = 0.0;
    for (int q = 0; q < n; ++q) {
      hits.clear();
      for (int other = 0; other < n; ++other) {
        if (other == q) continue;
        hits.push_back({other, profiles[static_cast<std::size_t>(q) * n + other][static_cast<std::size_t>(t)]});
      }
      std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.matches != b.matches) return a.matches > b.matches;
        return a.image < b.image;
      });
      const int top = std::min<int>(k, static_cast<int>(hits.size()));
      int good = 0;
      for (int i = 0; i < top; ++i)
        if (index.images[static_cast<std::size_t>(hits[static_cast<std::size_t>(i)].image)].group ==
            index.images[static_cast<std::size_t>(q)].group)
          ++good;
      total += static_cast<double>(good) / static_cast<double>(k);
    }
    const double p = total / static_cast<double>(n);
    if (p > best_p) {
      best_p = p;
      best_t = t;
    }
  }
  return best_t;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.path >> e.group))
      throw FormatError(path.string() + ": malformed line " + std::to_string(line_no));
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace bitsel
