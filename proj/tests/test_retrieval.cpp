#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bitsel/retrieval.hpp"
#include "helpers.hpp"

using namespace bitsel;

namespace {

Image8 constant_image(int h, int w, std::uint8_t v) { return Image8::Constant(h, w, v); }

// Bright axis-aligned square on a dark background.
Image8 square_image(int side, int lo, int hi, std::uint8_t bg, std::uint8_t fg) {
  Image8 img = Image8::Constant(side, side, bg);
  for (int y = lo; y <= hi; ++y)
    for (int x = lo; x <= hi; ++x) img(y, x) = fg;
  return img;
}

// Cluttered scene: random axis-aligned rectangles, corners everywhere.
Image8 rectangle_scene(Rng& rng, int side, int rects) {
  Image8 img = Image8::Constant(side, side, 96);
  for (int r = 0; r < rects; ++r) {
    const int w = 12 + static_cast<int>(rng.uniform_below(28));
    const int h = 12 + static_cast<int>(rng.uniform_below(28));
    const int x0 = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side - w)));
    const int y0 = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side - h)));
    const auto v = static_cast<std::uint8_t>(rng.uniform_below(256));
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) img(y, x) = v;
  }
  return img;
}

Image8 perturb(Rng& rng, const Image8& img, double flip_prob) {
  Image8 out = img;
  for (int y = 0; y < out.rows(); ++y)
    for (int x = 0; x < out.cols(); ++x)
      if (rng.uniform01() < flip_prob) out(y, x) = static_cast<std::uint8_t>(rng.uniform_below(256));
  return out;
}

Signature make_sig(std::initializer_list<std::uint8_t> bytes, int bits) {
  Signature s;
  s.bits = bits;
  s.bytes = bytes;
  return s;
}

}  // namespace

TEST_CASE("fast: constant image has no keypoints, small image rejected") {
  CHECK(detect_fast(constant_image(100, 100, 128), 20).empty());
  CHECK_THROWS_AS(detect_fast(constant_image(60, 60, 0), 20), ParamError);
}

TEST_CASE("fast localizes the four corners of a synthetic square") {
  const Image8 img = square_image(160, 64, 96, 50, 200);
  const auto kps = detect_fast(img, 20, 75);
  REQUIRE(!kps.empty());
  const int expected[4][2] = {{64, 64}, {96, 64}, {64, 96}, {96, 96}};
  for (const auto& corner : expected) {
    bool found = false;
    for (const auto& kp : kps)
      if (std::abs(kp.x - corner[0]) <= 1 && std::abs(kp.y - corner[1]) <= 1) found = true;
    CHECK(found);
  }
  for (const auto& kp : kps) {
    CHECK(kp.x >= 32);
    CHECK(kp.x <= 160 - 32);
    CHECK(kp.y >= 32);
    CHECK(kp.y <= 160 - 32);
    CHECK(kp.score > 0);
  }
}

TEST_CASE("fast caps detections at max_keypoints on a corner-rich image") {
  Rng rng(301);
  const Image8 scene = rectangle_scene(rng, 256, 60);
  const auto kps = detect_fast(scene, 20, 75);
  CHECK(kps.size() == 75);
  // sorted by score descending
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].score >= kps[i].score);

  const auto fewer = detect_fast(scene, 20, 10);
  REQUIRE(fewer.size() == 10);
  for (std::size_t i = 0; i < fewer.size(); ++i) {
    CHECK(fewer[i].x == kps[i].x);
    CHECK(fewer[i].y == kps[i].y);
  }
}

TEST_CASE("crop_patch equals the direct block oracle") {
  Rng rng(302);
  const Image8 scene = rectangle_scene(rng, 180, 30);
  const Patch crop = crop_patch(scene, 80, 90);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) CHECK(crop(y, x) == scene(90 - 32 + y, 80 - 32 + x));
  CHECK_THROWS_AS(crop_patch(scene, 10, 90), UsageError);
}

TEST_CASE("match_count basics: identity, impossibility, mismatch") {
  Rng rng(303);
  std::vector<Signature> sigs;
  for (int i = 0; i < 6; ++i) {
    Signature s;
    s.bits = 64;
    s.bytes.assign(8, 0);
    for (int k = 0; k < 64; ++k)
      if (rng.next_u64() & 1) s.bytes[static_cast<std::size_t>(k) / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    sigs.push_back(s);
  }
  CHECK(match_count(sigs, sigs, 0) == 6);  // every signature matches its twin

  // two far-apart singleton sets under a tiny threshold
  std::vector<Signature> a{make_sig({0x00}, 8)}, b{make_sig({0xff}, 8)};
  CHECK(match_count(a, b, 7) == 0);
  CHECK(match_count(a, b, 8) == 1);

  std::vector<Signature> wrong{make_sig({0x00, 0x00}, 16)};
  CHECK_THROWS_AS(match_count(a, wrong, 3), UsageError);
}

TEST_CASE("match_count follows greedy-ascending one-to-one assignment") {
  // 3x3 instance with hand-set distances via 8-bit signatures:
  //   a = {0x00, 0x0f, 0xff}, b = {0x01, 0x1f, 0x7f}
  // distance matrix (rows a, cols b):
  //   a0: 1 5 7
  //   a1: 3 1 3
  //   a2: 7 3 1
  std::vector<Signature> a{make_sig({0x00}, 8), make_sig({0x0f}, 8), make_sig({0xff}, 8)};
  std::vector<Signature> b{make_sig({0x01}, 8), make_sig({0x1f}, 8), make_sig({0x7f}, 8)};
  // greedy takes the three distance-1 candidates, all disjoint
  CHECK(match_count(a, b, 8) == 3);
  CHECK(match_count(a, b, 0) == 0);
  CHECK(match_count(a, b, 1) == 3);
  // at threshold 2 nothing new is admitted beyond the distance-1 picks
  CHECK(match_count(a, b, 2) == 3);

  // drop b0: only two right-side signatures remain, so one-to-one caps at 2;
  // greedy claims (a1,b1) and (a2,b2) at distance 1 and a0 stays unmatched
  std::vector<Signature> b2{b[1], b[2]};
  CHECK(match_count(a, b2, 0) == 0);
  CHECK(match_count(a, b2, 1) == 2);
  CHECK(match_count(a, b2, 8) == 2);

  // exhaustive-oracle check on the full 3x3 instance: greedy-ascending with
  // disjoint distance-1 picks is also the maximum assignment here
  int best = 0;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& perm : perms) {
    int count = 0;
    for (int i = 0; i < 3; ++i)
      if (hamming(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(perm[i])]) <= 1) ++count;
    best = std::max(best, count);
  }
  CHECK(match_count(a, b, 1) == best);
}

TEST_CASE("match_count is symmetric and monotone in the threshold") {
  Rng rng(304);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Signature> a, b;
    const int na = 1 + static_cast<int>(rng.uniform_below(12));
    const int nb = 1 + static_cast<int>(rng.uniform_below(12));
    for (int i = 0; i < na; ++i) {
      Signature s;
      s.bits = 16;
      s.bytes.assign(2, 0);
      for (int k = 0; k < 16; ++k)
        if (rng.next_u64() & 1) s.bytes[static_cast<std::size_t>(k) / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
      a.push_back(s);
    }
    for (int i = 0; i < nb; ++i) {
      Signature s;
      s.bits = 16;
      s.bytes.assign(2, 0);
      for (int k = 0; k < 16; ++k)
        if (rng.next_u64() & 1) s.bytes[static_cast<std::size_t>(k) / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
      b.push_back(s);
    }
    int prev = 0;
    for (int t = 0; t <= 16; ++t) {
      const int ab = match_count(a, b, t);
      CHECK(ab == match_count(b, a, t));  // exact symmetry incl. tie structure
      CHECK(ab >= prev);
      prev = ab;
    }
  }
}

TEST_CASE("retrieve ranks an exact duplicate first and handles large k") {
  Rng rng(305);
  const Image8 base = rectangle_scene(rng, 160, 25);
  const Image8 other = rectangle_scene(rng, 160, 25);
  std::vector<Image8> images{base, base, other};
  std::vector<int> groups{0, 0, 1};
  std::vector<std::string> names{"q", "dup", "other"};

  const BitPool pool = sample_brief_pool(77, 128, 2, 2.0);
  const Descriptor desc = select_random(128, 64, 9);
  const ImageIndex index = index_images(images, groups, names, desc, pool, 20, 75, 1);

  const auto hits = retrieve(0, index, 1, 10);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].image == 1);

  const auto all = retrieve(0, index, 99, 10);
  CHECK(all.size() == 2);  // k beyond index size returns all others

  CHECK_THROWS_AS(retrieve(7, index, 1, 10), UsageError);
}

TEST_CASE("index_images is deterministic and duplicates share signatures") {
  Rng rng(306);
  const Image8 img = rectangle_scene(rng, 160, 25);
  std::vector<Image8> images{img, img};
  std::vector<int> groups{0, 0};
  const BitPool pool = sample_brief_pool(78, 64, 2, 2.0);
  const Descriptor desc = select_random(64, 32, 3);
  const ImageIndex index = index_images(images, groups, {}, desc, pool, 20, 75, 2);
  REQUIRE(index.images.size() == 2);
  REQUIRE(index.images[0].signatures.size() == index.images[1].signatures.size());
  CHECK(index.images[0].signatures.size() <= 75);
  for (std::size_t i = 0; i < index.images[0].signatures.size(); ++i)
    CHECK(index.images[0].signatures[i].bytes == index.images[1].signatures[i].bytes);
}

TEST_CASE("precision is 1.0 on duplicate groups and chance-level on random labels") {
  Rng rng(307);
  std::vector<Image8> images;
  std::vector<int> groups;
  for (int g = 0; g < 3; ++g) {
    const Image8 base = rectangle_scene(rng, 160, 25);
    for (int m = 0; m < 3; ++m) {
      images.push_back(base);
      groups.push_back(g);
    }
  }
  const BitPool pool = sample_brief_pool(79, 128, 2, 2.0);
  const Descriptor desc = select_random(128, 64, 5);
  const ImageIndex index = index_images(images, groups, {}, desc, pool, 20, 75, 2);
  CHECK(precision_at_k(index, 2, 5) == 1.0);
}

TEST_CASE("tune_threshold equals the naive argmax sweep with smallest-t ties") {
  Rng rng(308);
  // small index with genuinely different images so the sweep is non-trivial
  std::vector<Image8> images;
  std::vector<int> groups;
  for (int g = 0; g < 3; ++g) {
    const Image8 base = rectangle_scene(rng, 160, 20);
    for (int m = 0; m < 2; ++m) {
      images.push_back(perturb(rng, base, 0.02));
      groups.push_back(g);
    }
  }
  const BitPool pool = sample_brief_pool(80, 64, 2, 2.0);
  const Descriptor desc = select_random(64, 48, 6);
  const ImageIndex index = index_images(images, groups, {}, desc, pool, 20, 40, 1);

  const int tuned = tune_threshold(index, 1);
  int naive_best = 0;
  double naive_p = -1.0;
  for (int t = 0; t <= index.signature_bits; ++t) {
    const double p = precision_at_k(index, 1, t);
    if (p > naive_p) {
      naive_p = p;
      naive_best = t;
    }
  }
  CHECK(tuned == naive_best);
  CHECK(precision_at_k(index, 1, tuned) == naive_p);
}

TEST_CASE("tune_threshold returns 0 on a single-group index") {
  Rng rng(309);
  const Image8 base = rectangle_scene(rng, 160, 25);
  std::vector<Image8> images{base, base, base};
  std::vector<int> groups{4, 4, 4};
  const BitPool pool = sample_brief_pool(81, 64, 2, 2.0);
  const Descriptor desc = select_random(64, 32, 2);
  const ImageIndex index = index_images(images, groups, {}, desc, pool, 20, 75, 1);
  CHECK(tune_threshold(index, 2) == 0);
}

TEST_CASE("planted retrieval database: co-group members dominate the top ranks") {
  Rng rng(310);
  std::vector<Image8> images;
  std::vector<int> groups;
  for (int g = 0; g < 4; ++g) {
    const Image8 base = rectangle_scene(rng, 160, 30);
    for (int m = 0; m < 4; ++m) {
      images.push_back(perturb(rng, base, 0.002));
      groups.push_back(g);
    }
  }
  const BitPool pool = sample_brief_pool(82, 256, 2, 2.0);
  const Descriptor desc = select_random(256, 128, 8);
  const ImageIndex index = index_images(images, groups, {}, desc, pool, 20, 75, 2);

  const int tuned = tune_threshold(index, 3);
  const double p = precision_at_k(index, 3, tuned);
  CHECK(p >= 0.9);

  // top-3 of a query are its co-group members
  const auto hits = retrieve(0, index, 3, tuned);
  REQUIRE(hits.size() == 3);
  for (const auto& h : hits) CHECK(index.images[static_cast<std::size_t>(h.image)].group == 0);
}

TEST_CASE("manifest parsing and error paths") {
  testutil::TempDir tmp("manifest");
  {
    std::ofstream out(tmp.file("db.txt"));
    out << "img0.bmp 0\n";
    out << "img1.bmp 0\n";
    out << "\n";
    out << "img2.bmp 1\n";
  }
  const auto entries = read_manifest(tmp.file("db.txt"));
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].path == "img0.bmp");
  CHECK(entries[2].group == 1);

  CHECK_THROWS_AS(read_manifest(tmp.file("missing.txt")), IoError);
  {
    std::ofstream out(tmp.file("bad.txt"));
    out << "img0.bmp\n";
  }
  CHECK_THROWS_AS(read_manifest(tmp.file("bad.txt")), FormatError);
}
