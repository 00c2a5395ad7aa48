#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "bitsel/bitgen.hpp"
#include "bitsel/bitmatrix.hpp"
#include "bitsel/dataset.hpp"
#include "bitsel/rng.hpp"
#include "bitsel/selection.hpp"

namespace testutil {

// Scratch directory under the ctest working dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::current_path() /
           ("tmp_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline bool images_equal(const bitsel::Image8& a, const bitsel::Image8& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

inline int naive_hamming(const bitsel::Signature& a, const bitsel::Signature& b) {
  int d = 0;
  for (int k = 0; k < a.bits; ++k) {
    const int bit_a = (a.bytes[static_cast<std::size_t>(k) / 8] >> (k % 8)) & 1;
    const int bit_b = (b.bytes[static_cast<std::size_t>(k) / 8] >> (k % 8)) & 1;
    d += bit_a != bit_b;
  }
  return d;
}

// O(|M|*|N|) Mann-Whitney over expanded distance lists; 0.5 terms are exact
// in double, so this agrees bit-for-bit with the histogram route.
inline double brute_force_auc(const std::vector<int>& match_dists,
                              const std::vector<int>& nonmatch_dists) {
  double score = 0.0;
  for (int dm : match_dists)
    for (int dn : nonmatch_dists) {
      if (dm < dn)
        score += 1.0;
      else if (dm == dn)
        score += 0.5;
    }
  return score / (static_cast<double>(match_dists.size()) * static_cast<double>(nonmatch_dists.size()));
}

inline double auc_of_selection(const bitsel::BitMatrix& table,
                               const std::vector<bitsel::Label>& labels,
                               std::span<const std::int32_t> selected) {
  const auto state = bitsel::compute_pair_distances(table, labels, selected);
  return bitsel::auc(state.match_hist, state.nonmatch_hist);
}

// Synthetic selection problem with a known informative subset. Pair k is
// backed by synthetic patches (2k, 2k+1) in the response matrix, so the
// derived disagreement table is exactly "label with flip noise" on the
// informative rows and coin flips elsewhere.
struct PlantedInstance {
  bitsel::BitMatrix responses;  // B x 2*num_pairs
  std::vector<bitsel::PatchPair> pairs;
  std::vector<bitsel::Label> labels;
  bitsel::BitMatrix disagreement;  // B x num_pairs
  std::vector<std::int32_t> informative;
};

inline PlantedInstance make_planted(std::uint64_t seed, int B, int num_informative,
                                    double flip_prob, int num_pairs) {
  bitsel::Rng rng(seed);
  PlantedInstance inst;
  inst.informative = rng.sample_without_replacement(B, num_informative);
  std::vector<bool> is_informative(static_cast<std::size_t>(B), false);
  for (std::int32_t p : inst.informative) is_informative[static_cast<std::size_t>(p)] = true;

  inst.pairs.reserve(static_cast<std::size_t>(num_pairs));
  inst.labels.reserve(static_cast<std::size_t>(num_pairs));
  for (int k = 0; k < num_pairs; ++k) {
    inst.pairs.push_back({2 * k, 2 * k + 1,
                          k % 2 == 0 ? bitsel::Label::Match : bitsel::Label::NonMatch});
    inst.labels.push_back(inst.pairs.back().label);
  }

  inst.responses = bitsel::BitMatrix(B, 2 * num_pairs);
  for (int p = 0; p < B; ++p)
    for (int k = 0; k < num_pairs; ++k) {
      const bool first = rng.next_u64() & 1;
      bool disagrees;
      if (is_informative[static_cast<std::size_t>(p)]) {
        disagrees = inst.labels[static_cast<std::size_t>(k)] == bitsel::Label::NonMatch;
        if (rng.uniform01() < flip_prob) disagrees = !disagrees;
      } else {
        disagrees = rng.next_u64() & 1;
      }
      inst.responses.set(p, 2 * k, first);
      inst.responses.set(p, 2 * k + 1, first != disagrees);
    }
  inst.disagreement = bitsel::build_disagreement_table(inst.responses, inst.pairs);
  return inst;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

#ifdef BITSEL_CLI_PATH
inline std::string cli_path() { return BITSEL_CLI_PATH; }
#else
inline std::string cli_path() { return "bitsel"; }
#endif

// Runs the CLI with stdout+stderr captured; no shell quoting in args.
inline CliResult run_cli(const std::string& args) {
  CliResult result;
  const std::string cmd = cli_path() + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return result;
  char buf[4096];
  std::size_t n;
  while ((n = ::fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

inline std::string read_file(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace testutil
