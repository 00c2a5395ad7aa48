#include "bitsel/bitgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "bitsel/parallel.hpp"
#include "bitsel/rng.hpp"

namespace bitsel {

int LbpParams::cells_per_side() const {
  const int cells = static_cast<int>(std::lround(std::sqrt(dims / 16.0)));
  return cells;
}

void LbpParams::validate() const {
  const int cells = cells_per_side();
  if (cells < 1 || 16 * cells * cells != dims || kPatchSize % cells != 0)
    throw ParamError("LbpParams: dims must be 16*c^2 with c dividing 64, got " +
                     std::to_string(dims));
  if (threshold < 0.0) throw ParamError("LbpParams: threshold must be non-negative");
}

BitPool sample_brief_pool(std::uint64_t seed, int B, int margin, double sigma) {
  if (B < 1) throw ParamError("sample_brief_pool: B must be at least 1");
  if (margin < 0 || margin >= kPatchSize / 2)
    throw ParamError("sample_brief_pool: margin must be in [0, 31]");
  if (sigma < 0.0) throw ParamError("sample_brief_pool: sigma must be non-negative");
  const std::int64_t side = kPatchSize - 2 * margin;
  const std::int64_t locations = side * side;
  if (static_cast<std::int64_t>(B) > locations * (locations - 1))
    throw ParamError("sample_brief_pool: B exceeds the number of distinct specs");

  Rng rng(seed);
  BitPool pool;
  pool.kind = PoolKind::Brief;
  pool.sigma = sigma;
  pool.margin = margin;
  pool.specs.reserve(static_cast<std::size_t>(B));
  std::unordered_set<std::uint32_t> seen;
  while (pool.specs.size() < static_cast<std::size_t>(B)) {
    IntensityPair ip;
    ip.x1 = margin + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    ip.y1 = margin + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    ip.x2 = margin + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    ip.y2 = margin + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(side)));
    if (ip.x1 == ip.x2 && ip.y1 == ip.y2) continue;
    const std::uint32_t key = static_cast<std::uint32_t>(ip.x1) | (static_cast<std::uint32_t>(ip.y1) << 8) |
                              (static_cast<std::uint32_t>(ip.x2) << 16) |
                              (static_cast<std::uint32_t>(ip.y2) << 24);
    if (!seen.insert(key).second) continue;
    pool.specs.emplace_back(ip);
  }
  return pool;
}

BitPool sample_lbp_pool(std::uint64_t seed, int B, int n, double threshold) {
  if (B < 1) throw ParamError("sample_lbp_pool: B must be at least 1");
  // Grid compatibility is only needed when vectors get extracted; sampling
  // just needs a component range.
  if (n < 2) throw ParamError("sample_lbp_pool: n must be at least 2");
  if (threshold < 0.0) throw ParamError("sample_lbp_pool: threshold must be non-negative");
  LbpParams params{n, threshold};
  const std::int64_t max_specs = static_cast<std::int64_t>(n) * (n - 1);
  if (B > max_specs) throw ParamError("sample_lbp_pool: B exceeds n*(n-1) distinct pairs");

  Rng rng(seed);
  BitPool pool;
  pool.kind = PoolKind::Lbp;
  pool.lbp = params;
  pool.specs.reserve(static_cast<std::size_t>(B));
  std::unordered_set<std::uint32_t> seen;
  while (pool.specs.size() < static_cast<std::size_t>(B)) {
    const int i = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    const std::uint32_t key = static_cast<std::uint32_t>(i) * static_cast<std::uint32_t>(n) +
                              static_cast<std::uint32_t>(j);
    if (!seen.insert(key).second) continue;
    pool.specs.emplace_back(VectorPair{i, j});
  }
  return pool;
}

ImageD preprocess_patch(const Patch& patch, double sigma) {
  require_patch(patch, "preprocess_patch");
  if (sigma < 0.0) throw ParamError("preprocess_patch: sigma must be non-negative");
  if (sigma == 0.0) return patch.cast<double>();

  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel(i + radius) = std::exp(-0.5 * (i * i) / (sigma * sigma));
  kernel /= kernel.sum();

  const auto clamp = [](int v) { return std::clamp(v, 0, kPatchSize - 1); };
  ImageD tmp(kPatchSize, kPatchSize);
  for (int y = 0; y < kPatchSize; ++y)
    for (int x = 0; x < kPatchSize; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel(i + radius) * patch(y, clamp(x + i));
      tmp(y, x) = acc;
    }
  ImageD out(kPatchSize, kPatchSize);
  for (int y = 0; y < kPatchSize; ++y)
    for (int x = 0; x < kPatchSize; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel(i + radius) * tmp(clamp(y + i), x);
      out(y, x) = acc;
    }
  return out;
}

bool eval_bit(const BitSpec& spec, const ImageD& smoothed) {
  const auto* ip = std::get_if<IntensityPair>(&spec);
  if (!ip) throw UsageError("eval_bit: vector-pair spec applied to a patch");
  return smoothed(ip->y1, ip->x1) < smoothed(ip->y2, ip->x2);
}

bool eval_bit(const BitSpec& spec, const LbpVector& v) {
  const auto* vp = std::get_if<VectorPair>(&spec);
  if (!vp) throw UsageError("eval_bit: intensity-pair spec applied to a vector");
  if (vp->i >= v.size() || vp->j >= v.size())
    throw UsageError("eval_bit: component index out of range");
  return v(vp->i) > v(vp->j);
}

LbpVector extract_lbp_histogram(const Patch& patch, const LbpParams& params) {
  require_patch(patch, "extract_lbp_histogram");
  params.validate();
  const int cells = params.cells_per_side();
  const int cell_size = kPatchSize / cells;
  const double T = params.threshold;

  // CS-LBP(8,1): four center-symmetric comparisons across the 8-neighborhood.
  // Neighbor i sits at 45*i degrees; pairs are (i, i+4).
  static constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static constexpr int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

  LbpVector hist = LbpVector::Zero(params.dims);
  for (int y = 1; y < kPatchSize - 1; ++y)
    for (int x = 1; x < kPatchSize - 1; ++x) {
      int code = 0;
      for (int i = 0; i < 4; ++i) {
        const double a = patch(y + dy[i], x + dx[i]) / 255.0;
        const double b = patch(y + dy[i + 4], x + dx[i + 4]) / 255.0;
        if (a - b > T) code |= 1 << i;
      }
      const int cell = (y / cell_size) * cells + (x / cell_size);
      hist(cell * 16 + code) += 1.0;
    }
  return hist;
}

LbpVector extract_lbp_vector(const Patch& patch, const LbpParams& params) {
  LbpVector v = extract_lbp_histogram(patch, params);
  v /= v.norm();  // every coded pixel lands in some bin, so the norm is positive
  v = v.cwiseMin(kLbpClip);
  v /= v.norm();
  return v;
}

BitMatrix build_response_matrix(const BitPool& pool, const std::vector<Patch>& patches,
                                int threads) {
  if (pool.specs.empty()) throw ParamError("build_response_matrix: empty pool");
  const std::int64_t B = pool.size();
  const std::int64_t P = static_cast<std::int64_t>(patches.size());
  BitMatrix m(B, P);
  // Blocks are 64-aligned so no two workers write to the same packed word.
  parallel_blocks(P, threads, 64, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t q = lo; q < hi; ++q) {
      if (pool.kind == PoolKind::Brief) {
        const ImageD smoothed = preprocess_patch(patches[static_cast<std::size_t>(q)], pool.sigma);
        for (std::int64_t p = 0; p < B; ++p)
          m.set(p, q, eval_bit(pool.specs[static_cast<std::size_t>(p)], smoothed));
      } else {
        const LbpVector v = extract_lbp_vector(patches[static_cast<std::size_t>(q)], pool.lbp);
        for (std::int64_t p = 0; p < B; ++p)
          m.set(p, q, eval_bit(pool.specs[static_cast<std::size_t>(p)], v));
      }
    }
  });
  return m;
}

BitMatrix build_disagreement_table(const BitMatrix& responses, const std::vector<PatchPair>& pairs) {
  const std::int64_t B = responses.rows();
  const std::int64_t K = static_cast<std::int64_t>(pairs.size());
  for (const auto& pp : pairs)
    if (pp.a < 0 || pp.a >= responses.cols() || pp.b < 0 || pp.b >= responses.cols())
      throw UsageError("build_disagreement_table: pair index out of range");
  BitMatrix table(B, K);
  for (std::int64_t p = 0; p < B; ++p)
    for (std::int64_t k = 0; k < K; ++k) {
      const auto& pp = pairs[static_cast<std::size_t>(k)];
      table.set(p, k, responses.get(p, pp.a) != responses.get(p, pp.b));
    }
  return table;
}

void write_pool(const BitPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write pool file: " + path.string());
  char header[128];
  if (pool.kind == PoolKind::Brief)
    std::snprintf(header, sizeof header, "BITPOOL v1 brief %lld %.17g %d",
                  static_cast<long long>(pool.size()), pool.sigma, pool.margin);
  else
    std::snprintf(header, sizeof header, "BITPOOL v1 lbp %lld %d %.17g",
                  static_cast<long long>(pool.size()), pool.lbp.dims, pool.lbp.threshold);
  out << header << "\n";
  for (const auto& spec : pool.specs) {
    if (const auto* ip = std::get_if<IntensityPair>(&spec))
      out << "ip " << ip->x1 << " " << ip->y1 << " " << ip->x2 << " " << ip->y2 << "\n";
    else {
      const auto& vp = std::get<VectorPair>(spec);
      out << "vp " << vp.i << " " << vp.j << "\n";
    }
  }
  if (!out) throw IoError("short write to pool file: " + path.string());
}

BitPool read_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  std::string magic, version, kind;
  std::int64_t B = -1;
  in >> magic >> version >> kind >> B;
  if (!in || magic != "BITPOOL" || version != "v1" || B < 1)
    throw FormatError(path.string() + ": bad pool header");

  BitPool pool;
  if (kind == "brief") {
    pool.kind = PoolKind::Brief;
    if (!(in >> pool.sigma >> pool.margin))
      throw FormatError(path.string() + ": bad brief pool parameters");
  } else if (kind == "lbp") {
    pool.kind = PoolKind::Lbp;
    if (!(in >> pool.lbp.dims >> pool.lbp.threshold))
      throw FormatError(path.string() + ": bad lbp pool parameters");
    if (pool.lbp.dims < 2 || pool.lbp.threshold < 0.0)
      throw FormatError(path.string() + ": bad lbp pool parameters");
  } else {
    throw FormatError(path.string() + ": unknown pool kind '" + kind + "'");
  }

  std::unordered_set<std::uint64_t> seen;
  for (std::int64_t line = 0; line < B; ++line) {
    std::string tag;
    if (!(in >> tag)) throw FormatError(path.string() + ": truncated pool at spec " + std::to_string(line + 1));
    if (tag == "ip" && pool.kind == PoolKind::Brief) {
      IntensityPair ip;
      if (!(in >> ip.x1 >> ip.y1 >> ip.x2 >> ip.y2))
        throw FormatError(path.string() + ": malformed spec at line " + std::to_string(line + 2));
      const int lo = pool.margin, hi = kPatchSize - 1 - pool.margin;
      const auto in_range = [&](int v) { return v >= lo && v <= hi; };
      if (!in_range(ip.x1) || !in_range(ip.y1) || !in_range(ip.x2) || !in_range(ip.y2) ||
          (ip.x1 == ip.x2 && ip.y1 == ip.y2))
        throw FormatError(path.string() + ": invalid intensity spec at line " + std::to_string(line + 2));
      if (!seen.insert(static_cast<std::uint64_t>(ip.x1) | (static_cast<std::uint64_t>(ip.y1) << 8) |
                       (static_cast<std::uint64_t>(ip.x2) << 16) | (static_cast<std::uint64_t>(ip.y2) << 24))
               .second)
        throw FormatError(path.string() + ": duplicate spec at line " + std::to_string(line + 2));
      pool.specs.emplace_back(ip);
    } else if (tag == "vp" && pool.kind == PoolKind::Lbp) {
      VectorPair vp;
      if (!(in >> vp.i >> vp.j))
        throw FormatError(path.string() + ": malformed spec at line " + std::to_string(line + 2));
      if (vp.i < 0 || vp.j < 0 || vp.i >= pool.lbp.dims || vp.j >= pool.lbp.dims || vp.i == vp.j)
        throw FormatError(path.string() + ": invalid vector spec at line " + std::to_string(line + 2));
      if (!seen.insert(static_cast<std::uint64_t>(vp.i) * static_cast<std::uint64_t>(pool.lbp.dims) +
                       static_cast<std::uint64_t>(vp.j))
               .second)
        throw FormatError(path.string() + ": duplicate spec at line " + std::to_string(line + 2));
      pool.specs.emplace_back(vp);
    } else {
      throw FormatError(path.string() + ": spec tag '" + tag + "' does not match pool kind");
    }
  }
  return pool;
}

}  // namespace bitsel
