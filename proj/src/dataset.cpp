#include "bitsel/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "bitsel/bmp.hpp"
#include "bitsel/rng.hpp"

namespace bitsel {

namespace {

constexpr int kMosaicTiles = 256;  // 16x16 grid of 64x64 patches
constexpr int kMosaicSide = 1024;

std::string mosaic_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "patches%04d.bmp", index);
  return buf;
}

}  // namespace

PairSet load_brown_subset(const std::filesystem::path& root, const std::string& pair_file) {
  const auto info_path = root / "info.txt";
  std::ifstream info(info_path);
  if (!info) throw IoError("missing file: " + info_path.string());

  std::vector<std::int64_t> point_ids;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(info, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::int64_t pt;
    if (!(ss >> pt))
      throw FormatError(info_path.string() + ": malformed line " + std::to_string(line_no));
    point_ids.push_back(pt);
  }
  const std::int64_t num_patches = static_cast<std::int64_t>(point_ids.size());
  if (num_patches == 0) throw FormatError(info_path.string() + ": no patches listed");

  PairSet set;
  set.name = root.filename().string();
  set.patches.reserve(static_cast<std::size_t>(num_patches));

  // The last mosaic is padded with unused tiles; read only the first
  // num_patches tiles overall.
  const std::int64_t num_mosaics = (num_patches + kMosaicTiles - 1) / kMosaicTiles;
  for (std::int64_t m = 0; m < num_mosaics; ++m) {
    const auto mosaic_path = root / mosaic_name(static_cast<int>(m));
    if (!std::filesystem::exists(mosaic_path))
      throw IoError("missing file: " + mosaic_path.string());
    const Image8 mosaic = read_bmp_gray(mosaic_path);
    if (mosaic.rows() != kMosaicSide || mosaic.cols() != kMosaicSide)
      throw FormatError(mosaic_path.string() + ": expected a 1024x1024 mosaic");
    const std::int64_t tiles = std::min<std::int64_t>(kMosaicTiles, num_patches - m * kMosaicTiles);
    for (std::int64_t t = 0; t < tiles; ++t) {
      const std::int64_t row = (t / 16) * kPatchSize;
      const std::int64_t col = (t % 16) * kPatchSize;
      set.patches.push_back(mosaic.block(row, col, kPatchSize, kPatchSize));
    }
  }

  const auto pairs_path = root / pair_file;
  std::ifstream pairs(pairs_path);
  if (!pairs) throw IoError("missing file: " + pairs_path.string());
  line_no = 0;
  while (std::getline(pairs, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    std::int64_t pid1, pt1, u1, pid2, pt2, u2, u3;
    if (!(ss >> pid1 >> pt1 >> u1 >> pid2 >> pt2 >> u2 >> u3))
      throw FormatError(pairs_path.string() + ": malformed line " + std::to_string(line_no));
    if (pid1 < 0 || pid1 >= num_patches || pid2 < 0 || pid2 >= num_patches)
      throw FormatError(pairs_path.string() + ": patch index out of range on line " +
                        std::to_string(line_no));
    PatchPair pp;
    pp.a = static_cast<std::int32_t>(pid1);
    pp.b = static_cast<std::int32_t>(pid2);
    pp.label = pt1 == pt2 ? Label::Match : Label::NonMatch;
    set.pairs.push_back(pp);
  }
  return set;
}

PairSet generate_synthetic_pairset(std::uint64_t seed, int num_classes, int patches_per_class,
                                   double noise_level) {
  if (num_classes < 2) throw ParamError("generate_synthetic_pairset: need at least 2 classes");
  if (patches_per_class < 2)
    throw ParamError("generate_synthetic_pairset: need at least 2 patches per class");
  if (noise_level < 0.0 || noise_level > 1.0)
    throw ParamError("generate_synthetic_pairset: noise_level must be in [0,1]");

  Rng rng(seed);
  PairSet set;
  set.name = "synthetic";
  set.patches.reserve(static_cast<std::size_t>(num_classes) * patches_per_class);

  for (int c = 0; c < num_classes; ++c) {
    Patch base(kPatchSize, kPatchSize);
    for (int y = 0; y < kPatchSize; ++y)
      for (int x = 0; x < kPatchSize; ++x)
        base(y, x) = static_cast<std::uint8_t>(rng.uniform_below(256));
    for (int m = 0; m < patches_per_class; ++m) {
      Patch p = base;
      for (int y = 0; y < kPatchSize; ++y)
        for (int x = 0; x < kPatchSize; ++x)
          if (rng.uniform01() < noise_level)
            p(y, x) = static_cast<std::uint8_t>(rng.uniform_below(256));
      set.patches.push_back(std::move(p));
    }
  }

  for (int c = 0; c < num_classes; ++c)
    for (int i = 0; i < patches_per_class; ++i)
      for (int j = i + 1; j < patches_per_class; ++j)
        set.pairs.push_back({c * patches_per_class + i, c * patches_per_class + j, Label::Match});

  const std::int64_t want = static_cast<std::int64_t>(set.pairs.size());
  const std::int64_t total = static_cast<std::int64_t>(set.patches.size());
  std::unordered_set<std::int64_t> used;
  std::int64_t made = 0;
  while (made < want) {
    const auto a = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(total)));
    const auto b = static_cast<std::int32_t>(rng.uniform_below(static_cast<std::uint64_t>(total)));
    if (a / patches_per_class == b / patches_per_class) continue;
    const std::int64_t key = static_cast<std::int64_t>(std::min(a, b)) * total + std::max(a, b);
    if (!used.insert(key).second) continue;
    set.pairs.push_back({a, b, Label::NonMatch});
    ++made;
  }
  return set;
}

void save_pairset(const PairSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write pairset file: " + path.string());
  out << "PAIRSET v1 " << set.patches.size() << " " << set.pairs.size() << "\n";
  for (const auto& p : set.patches) {
    require_patch(p, "save_pairset");
    out.write(reinterpret_cast<const char*>(p.data()), kPatchPixels);
  }
  for (const auto& pp : set.pairs)
    out << pp.a << " " << pp.b << " " << (pp.label == Label::Match ? 1 : 0) << "\n";
  if (!out) throw IoError("short write to pairset file: " + path.string());
}

PairSet load_pairset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing file: " + path.string());
  std::string magic, version;
  std::int64_t num_patches = -1, num_pairs = -1;
  in >> magic >> version >> num_patches >> num_pairs;
  if (!in || magic != "PAIRSET" || version != "v1" || num_patches < 0 || num_pairs < 0)
    throw FormatError(path.string() + ": bad pairset header");
  in.ignore(1, '\n');

  PairSet set;
  set.name = path.stem().string();
  set.patches.reserve(static_cast<std::size_t>(num_patches));
  for (std::int64_t i = 0; i < num_patches; ++i) {
    Patch p(kPatchSize, kPatchSize);
    in.read(reinterpret_cast<char*>(p.data()), kPatchPixels);
    if (in.gcount() != kPatchPixels)
      throw FormatError(path.string() + ": truncated patch data at patch " + std::to_string(i));
    set.patches.push_back(std::move(p));
  }
  for (std::int64_t i = 0; i < num_pairs; ++i) {
    std::int64_t a, b, lbl;
    if (!(in >> a >> b >> lbl) || lbl < 0 || lbl > 1)
      throw FormatError(path.string() + ": malformed pair line " + std::to_string(i + 1));
    if (a < 0 || a >= num_patches || b < 0 || b >= num_patches)
      throw FormatError(path.string() + ": pair index out of range on line " + std::to_string(i + 1));
    set.pairs.push_back({static_cast<std::int32_t>(a), static_cast<std::int32_t>(b),
                         lbl == 1 ? Label::Match : Label::NonMatch});
  }
  return set;
}

}  // namespace bitsel
