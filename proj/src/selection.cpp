#include "bitsel/selection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bitsel/rng.hpp"

namespace bitsel {

namespace {

void require_labels(const BitMatrix& table, const std::vector<Label>& labels) {
  if (static_cast<std::int64_t>(labels.size()) != table.cols())
    throw UsageError("labels must cover every table column");
  bool any_match = false, any_non = false;
  for (Label l : labels) (l == Label::Match ? any_match : any_non) = true;
  if (!any_match || !any_non)
    throw UsageError("need at least one matching and one non-matching pair");
}

std::uint64_t histogram_mass(std::span<const std::int64_t> h) {
  std::uint64_t total = 0;
  for (std::int64_t v : h) total += static_cast<std::uint64_t>(v);
  return total;
}

// Packs the match labels into words aligned with the disagreement rows.
std::vector<std::uint64_t> pack_match_mask(const std::vector<Label>& labels,
                                           std::int64_t words_per_row) {
  std::vector<std::uint64_t> mask(static_cast<std::size_t>(words_per_row), 0);
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] == Label::Match) mask[k >> 6] |= std::uint64_t{1} << (k & 63);
  return mask;
}

}  // namespace

PairDistanceState compute_pair_distances(const BitMatrix& disagreement,
                                         const std::vector<Label>& labels,
                                         std::span<const std::int32_t> selected) {
  require_labels(disagreement, labels);
  const std::int64_t K = disagreement.cols();
  const int b = static_cast<int>(selected.size());
  PairDistanceState state;
  state.distances.assign(static_cast<std::size_t>(K), 0);
  for (std::int32_t p : selected) {
    const auto row = disagreement.row(p);
    for (std::size_t w = 0; w < row.size(); ++w) {
      std::uint64_t bits = row[w];
      while (bits) {
        const int off = std::countr_zero(bits);
        bits &= bits - 1;
        ++state.distances[w * 64 + static_cast<std::size_t>(off)];
      }
    }
  }
  state.match_hist.assign(static_cast<std::size_t>(b) + 1, 0);
  state.nonmatch_hist.assign(static_cast<std::size_t>(b) + 1, 0);
  for (std::int64_t k = 0; k < K; ++k) {
    auto& hist = labels[static_cast<std::size_t>(k)] == Label::Match ? state.match_hist
                                                                     : state.nonmatch_hist;
    ++hist[static_cast<std::size_t>(state.distances[static_cast<std::size_t>(k)])];
  }
  return state;
}

std::uint64_t mann_whitney_numerator_x2(std::span<const std::int64_t> match_hist,
                                        std::span<const std::int64_t> nonmatch_hist) {
  if (match_hist.size() != nonmatch_hist.size())
    throw UsageError("auc: histograms must cover the same distance range");
  std::uint64_t num = 0;
  std::uint64_t match_below = 0;  // match pairs at a strictly smaller distance
  for (std::size_t d = 0; d < match_hist.size(); ++d) {
    const auto m = static_cast<std::uint64_t>(match_hist[d]);
    const auto n = static_cast<std::uint64_t>(nonmatch_hist[d]);
    num += n * (2 * match_below + m);
    match_below += m;
  }
  return num;
}

double auc(std::span<const std::int64_t> match_hist, std::span<const std::int64_t> nonmatch_hist) {
  if (match_hist.size() != nonmatch_hist.size())
    throw UsageError("auc: histograms must cover the same distance range");
  const std::uint64_t m = histogram_mass(match_hist);
  const std::uint64_t n = histogram_mass(nonmatch_hist);
  if (m == 0 || n == 0) throw UsageError("auc: both classes need positive mass");
  return static_cast<double>(mann_whitney_numerator_x2(match_hist, nonmatch_hist)) /
         (2.0 * static_cast<double>(m) * static_cast<double>(n));
}

int hamming(const Signature& a, const Signature& b) {
  if (a.bits != b.bits) throw UsageError("hamming: signature lengths differ");
  const std::size_t n = a.bytes.size();
  int dist = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    std::uint64_t wa, wb;
    std::memcpy(&wa, a.bytes.data() + i, 8);
    std::memcpy(&wb, b.bytes.data() + i, 8);
    dist += std::popcount(wa ^ wb);
  }
  for (; i < n; ++i)
    dist += std::popcount(static_cast<unsigned>(a.bytes[i] ^ b.bytes[i]));
  return dist;
}

HillClimbResult select_hill_climb(const BitMatrix& disagreement, const std::vector<Label>& labels,
                                  int b, std::int64_t iterations, std::uint64_t seed,
                                  const HillClimbAudit& audit) {
  require_labels(disagreement, labels);
  const std::int64_t B = disagreement.rows();
  if (b < 1 || b > B) throw ParamError("select_hill_climb: need 1 <= b <= pool size");
  if (iterations < 0) iterations = 4 * B;

  Rng rng(seed);
  std::vector<std::int32_t> selected = rng.sample_without_replacement(B, b);
  std::vector<std::int32_t> available;
  available.reserve(static_cast<std::size_t>(B - b));
  {
    std::vector<bool> in_desc(static_cast<std::size_t>(B), false);
    for (std::int32_t p : selected) in_desc[static_cast<std::size_t>(p)] = true;
    for (std::int32_t p = 0; p < B; ++p)
      if (!in_desc[static_cast<std::size_t>(p)]) available.push_back(p);
  }

  PairDistanceState state = compute_pair_distances(disagreement, labels, selected);
  const std::uint64_t match_total = histogram_mass(state.match_hist);
  const std::uint64_t nonmatch_total = histogram_mass(state.nonmatch_hist);
  const double denom = 2.0 * static_cast<double>(match_total) * static_cast<double>(nonmatch_total);
  std::uint64_t current_num = mann_whitney_numerator_x2(state.match_hist, state.nonmatch_hist);

  SelectionTrace trace;
  trace.reserve(static_cast<std::size_t>(iterations) + 1);
  trace.push_back({0, static_cast<double>(current_num) / denom, true});
  if (audit) audit(state, selected);

  // Scratch for one proposal: pairs whose distance changes, sign in bit 0.
  std::vector<std::uint32_t> changed;
  changed.reserve(labels.size());
  std::vector<std::int64_t> cand_match(state.match_hist.size());
  std::vector<std::int64_t> cand_nonmatch(state.nonmatch_hist.size());
  const std::int64_t words = disagreement.words_per_row();

  for (std::int64_t iter = 1; iter <= iterations; ++iter) {
    const auto pos = static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(b)));
    const auto avail_idx =
        static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(B - b)));
    const std::int32_t old_bit = selected[pos];
    const std::int32_t new_bit = available[avail_idx];

    const auto old_row = disagreement.row(old_bit);
    const auto new_row = disagreement.row(new_bit);
    changed.clear();
    for (std::int64_t w = 0; w < words; ++w) {
      std::uint64_t diff = old_row[static_cast<std::size_t>(w)] ^ new_row[static_cast<std::size_t>(w)];
      const std::uint64_t up = diff & new_row[static_cast<std::size_t>(w)];
      while (diff) {
        const int off = std::countr_zero(diff);
        diff &= diff - 1;
        const auto k = static_cast<std::uint32_t>(w * 64 + off);
        changed.push_back((k << 1) | static_cast<std::uint32_t>((up >> off) & 1));
      }
    }

    std::copy(state.match_hist.begin(), state.match_hist.end(), cand_match.begin());
    std::copy(state.nonmatch_hist.begin(), state.nonmatch_hist.end(), cand_nonmatch.begin());
    for (std::uint32_t entry : changed) {
      const std::uint32_t k = entry >> 1;
      const int delta = (entry & 1) ? 1 : -1;
      auto& hist = labels[k] == Label::Match ? cand_match : cand_nonmatch;
      const std::int32_t d = state.distances[k];
      --hist[static_cast<std::size_t>(d)];
      ++hist[static_cast<std::size_t>(d + delta)];
    }

    const std::uint64_t cand_num = mann_whitney_numerator_x2(cand_match, cand_nonmatch);
    const bool accept = current_num < cand_num;  // strict improvement, ties reject
    if (accept) {
      for (std::uint32_t entry : changed)
        state.distances[entry >> 1] += (entry & 1) ? 1 : -1;
      state.match_hist.swap(cand_match);
      state.nonmatch_hist.swap(cand_nonmatch);
      std::swap(selected[pos], available[avail_idx]);
      current_num = cand_num;
      if (audit) audit(state, selected);
    }
    trace.push_back({iter, static_cast<double>(cand_num) / denom, accept});
  }

  HillClimbResult result;
  result.descriptor.selected = std::move(selected);
  result.trace = std::move(trace);
  return result;
}

Descriptor select_boosting(const BitMatrix& disagreement, const std::vector<Label>& labels, int b,
                           double shrinkage, const BoostingAudit& audit) {
  require_labels(disagreement, labels);
  const std::int64_t B = disagreement.rows();
  if (b < 1 || b > B) throw ParamError("select_boosting: need 1 <= b <= pool size");
  if (shrinkage <= 0.0 || shrinkage > 1.0)
    throw ParamError("select_boosting: shrinkage must be in (0, 1]");

  const std::int64_t K = disagreement.cols();
  std::vector<double> weights(static_cast<std::size_t>(K), 1.0 / static_cast<double>(K));
  std::vector<bool> taken(static_cast<std::size_t>(B), false);
  Descriptor desc;
  desc.selected.reserve(static_cast<std::size_t>(b));

  for (int round = 0; round < b; ++round) {
    double nonmatch_weight = 0.0;
    for (std::int64_t k = 0; k < K; ++k)
      if (labels[static_cast<std::size_t>(k)] == Label::NonMatch)
        nonmatch_weight += weights[static_cast<std::size_t>(k)];

    // eps_p = sum of weights where the bit disagrees on a match or agrees on
    // a non-match. Walking only the set bits of each row covers both terms.
    std::int64_t best = -1;
    double best_eps = 0.0;
    for (std::int64_t p = 0; p < B; ++p) {
      if (taken[static_cast<std::size_t>(p)]) continue;
      const auto row = disagreement.row(p);
      double set_match = 0.0, set_nonmatch = 0.0;
      for (std::size_t w = 0; w < row.size(); ++w) {
        std::uint64_t bits = row[w];
        while (bits) {
          const int off = std::countr_zero(bits);
          bits &= bits - 1;
          const std::size_t k = w * 64 + static_cast<std::size_t>(off);
          if (labels[k] == Label::Match)
            set_match += weights[k];
          else
            set_nonmatch += weights[k];
        }
      }
      const double eps = set_match + (nonmatch_weight - set_nonmatch);
      if (best < 0 || eps < best_eps) {
        best = p;
        best_eps = eps;
      }
    }

    const double eps = std::clamp(best_eps, 1e-12, 1.0 - 1e-12);
    const double alpha = shrinkage * 0.5 * std::log((1.0 - eps) / eps);
    taken[static_cast<std::size_t>(best)] = true;
    desc.selected.push_back(static_cast<std::int32_t>(best));

    const auto row = disagreement.row(best);
    double sum = 0.0;
    for (std::int64_t k = 0; k < K; ++k) {
      const bool disagrees = (row[static_cast<std::size_t>(k >> 6)] >> (k & 63)) & 1u;
      const int h = disagrees ? -1 : +1;
      const int y = labels[static_cast<std::size_t>(k)] == Label::Match ? +1 : -1;
      weights[static_cast<std::size_t>(k)] *= std::exp(-alpha * y * h);
      sum += weights[static_cast<std::size_t>(k)];
    }
    for (double& w : weights) w /= sum;
    if (audit) audit(round, weights, static_cast<std::int32_t>(best));
  }
  return desc;
}

double response_correlation(const BitMatrix& responses, std::int64_t p, std::int64_t q) {
  const std::int64_t n = responses.cols();
  if (n == 0) return 0.0;
  const std::int64_t a = popcount(responses.row(p));
  const std::int64_t b = popcount(responses.row(q));
  if (a == 0 || a == n || b == 0 || b == n) return 0.0;  // constant bit carries no information
  const std::int64_t both = and_popcount(responses.row(p), responses.row(q));
  const double cov = static_cast<double>(n) * static_cast<double>(both) -
                     static_cast<double>(a) * static_cast<double>(b);
  const double var = static_cast<double>(a) * static_cast<double>(n - a) *
                     static_cast<double>(b) * static_cast<double>(n - b);
  return cov / std::sqrt(var);
}

double single_bit_auc(const BitMatrix& disagreement, const std::vector<Label>& labels,
                      std::int64_t p) {
  const auto mask = pack_match_mask(labels, disagreement.words_per_row());
  const auto row = disagreement.row(p);
  std::int64_t match_total = 0;
  for (Label l : labels)
    if (l == Label::Match) ++match_total;
  const std::int64_t nonmatch_total = static_cast<std::int64_t>(labels.size()) - match_total;
  const std::int64_t m1 = and_popcount(row, mask);
  const std::int64_t n1 = popcount(row) - m1;
  const std::int64_t match_hist[2] = {match_total - m1, m1};
  const std::int64_t nonmatch_hist[2] = {nonmatch_total - n1, n1};
  return auc(std::span<const std::int64_t>(match_hist, 2),
             std::span<const std::int64_t>(nonmatch_hist, 2));
}

Descriptor select_correlation(const BitMatrix& disagreement, const std::vector<Label>& labels,
                              const BitMatrix& responses, int b, double tau,
                              CorrelationStats* stats) {
  require_labels(disagreement, labels);
  const std::int64_t B = disagreement.rows();
  if (responses.rows() != B)
    throw UsageError("select_correlation: responses and disagreement disagree on pool size");
  if (b < 1 || b > B) throw ParamError("select_correlation: need 1 <= b <= pool size");
  if (tau <= 0.0 || tau > 1.0) throw ParamError("select_correlation: tau must be in (0, 1]");

  // Rank by single-bit AUC. The numerator is exact, so ranking ties resolve
  // by pool index.
  const auto mask = pack_match_mask(labels, disagreement.words_per_row());
  std::int64_t match_total = 0;
  for (Label l : labels)
    if (l == Label::Match) ++match_total;
  const std::int64_t nonmatch_total = static_cast<std::int64_t>(labels.size()) - match_total;

  std::vector<std::uint64_t> rank_key(static_cast<std::size_t>(B));
  for (std::int64_t p = 0; p < B; ++p) {
    const auto row = disagreement.row(p);
    const std::int64_t m1 = and_popcount(row, mask);
    const std::int64_t n1 = popcount(row) - m1;
    const std::int64_t match_hist[2] = {match_total - m1, m1};
    const std::int64_t nonmatch_hist[2] = {nonmatch_total - n1, n1};
    rank_key[static_cast<std::size_t>(p)] =
        mann_whitney_numerator_x2(std::span<const std::int64_t>(match_hist, 2),
                                  std::span<const std::int64_t>(nonmatch_hist, 2));
  }
  std::vector<std::int32_t> ranked(static_cast<std::size_t>(B));
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::int32_t lhs, std::int32_t rhs) {
    return rank_key[static_cast<std::size_t>(lhs)] > rank_key[static_cast<std::size_t>(rhs)];
  });

  Descriptor desc;
  desc.selected.reserve(static_cast<std::size_t>(b));
  std::vector<std::int32_t> rejected;
  for (std::int32_t p : ranked) {
    if (desc.selected.size() == static_cast<std::size_t>(b)) break;
    bool ok = true;
    for (std::int32_t q : desc.selected)
      if (std::abs(response_correlation(responses, p, q)) >= tau) {
        ok = false;
        break;
      }
    if (ok)
      desc.selected.push_back(p);
    else
      rejected.push_back(p);
  }
  if (stats) {
    stats->fill_in_used = desc.selected.size() < static_cast<std::size_t>(b);
    stats->accepted_before_fill = static_cast<int>(desc.selected.size());
  }
  for (std::size_t r = 0; desc.selected.size() < static_cast<std::size_t>(b); ++r)
    desc.selected.push_back(rejected[r]);
  return desc;
}

Descriptor select_random(std::int64_t B, int b, std::uint64_t seed) {
  if (b < 1 || b > B) throw ParamError("select_random: need 1 <= b <= pool size");
  Rng rng(seed);
  Descriptor desc;
  desc.selected = rng.sample_without_replacement(B, b);
  return desc;
}

Signature compute_signature(const Descriptor& desc, const BitPool& pool, const Patch& patch) {
  for (std::int32_t p : desc.selected)
    if (p < 0 || p >= pool.size())
      throw UsageError("compute_signature: descriptor index out of pool range");
  Signature sig;
  sig.bits = desc.b();
  sig.bytes.assign((static_cast<std::size_t>(sig.bits) + 7) / 8, 0);
  if (pool.kind == PoolKind::Brief) {
    const ImageD smoothed = preprocess_patch(patch, pool.sigma);
    for (std::int32_t k = 0; k < sig.bits; ++k)
      if (eval_bit(pool.specs[static_cast<std::size_t>(desc.selected[static_cast<std::size_t>(k)])], smoothed))
        sig.bytes[static_cast<std::size_t>(k) / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  } else {
    const LbpVector v = extract_lbp_vector(patch, pool.lbp);
    for (std::int32_t k = 0; k < sig.bits; ++k)
      if (eval_bit(pool.specs[static_cast<std::size_t>(desc.selected[static_cast<std::size_t>(k)])], v))
        sig.bytes[static_cast<std::size_t>(k) / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  }
  return sig;
}

std::string signature_hex(const Signature& sig) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(sig.bytes.size() * 2);
  for (std::uint8_t byte : sig.bytes) {
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

void write_descriptor(const Descriptor& desc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write descriptor file: " + path.string());
  out << "DESCRIPTOR v1 " << (desc.pool_ref.empty() ? "-" : desc.pool_ref) << " " << desc.b()
      << "\n";
  for (std::int32_t p : desc.selected) out << p << "\n";
  if (!out) throw IoError("short write to descriptor file: " + path.string());
}

Descriptor read_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  std::string magic, version, pool_ref;
  std::int64_t b = -1;
  in >> magic >> version >> pool_ref >> b;
  if (!in || magic != "DESCRIPTOR" || version != "v1" || b < 1)
    throw FormatError(path.string() + ": bad descriptor header");
  Descriptor desc;
  desc.pool_ref = pool_ref == "-" ? "" : pool_ref;
  desc.selected.reserve(static_cast<std::size_t>(b));
  std::vector<bool> seen;
  for (std::int64_t i = 0; i < b; ++i) {
    std::int64_t p;
    if (!(in >> p) || p < 0)
      throw FormatError(path.string() + ": malformed index at line " + std::to_string(i + 2));
    if (static_cast<std::size_t>(p) >= seen.size()) seen.resize(static_cast<std::size_t>(p) + 1, false);
    if (seen[static_cast<std::size_t>(p)])
      throw FormatError(path.string() + ": duplicate index at line " + std::to_string(i + 2));
    seen[static_cast<std::size_t>(p)] = true;
    desc.selected.push_back(static_cast<std::int32_t>(p));
  }
  return desc;
}

void write_trace(const SelectionTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write trace file: " + path.string());
  out << "iteration,auc,accepted\n";
  char buf[64];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%d\n", static_cast<long long>(e.iteration), e.auc,
                  e.accepted ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("short write to trace file: " + path.string());
}

SelectionTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "iteration,auc,accepted")
    throw FormatError(path.string() + ": bad trace header");
  SelectionTrace trace;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    long long iteration = 0;
    double value = 0.0;
    int accepted = 0;
    if (std::sscanf(line.c_str(), "%lld,%lg,%d", &iteration, &value, &accepted) != 3)
      throw FormatError(path.string() + ": malformed trace line " + std::to_string(line_no));
    trace.push_back({iteration, value, accepted != 0});
  }
  return trace;
}

}  // namespace bitsel
