#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bitsel/bitgen.hpp"
#include "bitsel/bmp.hpp"
#include "bitsel/dataset.hpp"
#include "bitsel/eval.hpp"
#include "bitsel/retrieval.hpp"
#include "bitsel/selection.hpp"

namespace fs = std::filesystem;
using namespace bitsel;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

struct DatasetFlags {
  std::string pairset;
  std::string brown_dir;
  std::string pair_file = "m50_100000_100000_0.txt";

  void attach(CLI::App* cmd) {
    cmd->add_option("--pairset", pairset, "pairset container file");
    cmd->add_option("--brown-dir", brown_dir, "Brown subset directory (info.txt + mosaics)");
    cmd->add_option("--pair-file", pair_file, "pair file inside --brown-dir");
  }

  PairSet load() const {
    if (!pairset.empty() && !brown_dir.empty())
      throw ParamError("give either --pairset or --brown-dir, not both");
    if (!pairset.empty()) return load_pairset(pairset);
    if (!brown_dir.empty()) return load_brown_subset(brown_dir, pair_file);
    throw ParamError("no dataset given: use --pairset or --brown-dir");
  }
};

// Response/disagreement caches restricted to the patches the pairs touch.
struct TrainingCache {
  BitMatrix responses;
  BitMatrix disagreement;
  std::vector<Label> labels;
};

TrainingCache build_training_cache(const BitPool& pool, const PairSet& set, int threads) {
  std::vector<std::int32_t> remap(set.patches.size(), -1);
  std::vector<Patch> subset;
  for (const auto& pp : set.pairs)
    for (const std::int32_t idx : {pp.a, pp.b})
      if (remap[static_cast<std::size_t>(idx)] < 0) {
        remap[static_cast<std::size_t>(idx)] = static_cast<std::int32_t>(subset.size());
        subset.push_back(set.patches[static_cast<std::size_t>(idx)]);
      }
  std::vector<PatchPair> remapped;
  remapped.reserve(set.pairs.size());
  for (const auto& pp : set.pairs)
    remapped.push_back({remap[static_cast<std::size_t>(pp.a)],
                        remap[static_cast<std::size_t>(pp.b)], pp.label});

  TrainingCache cache;
  cache.responses = build_response_matrix(pool, subset, threads);
  cache.disagreement = build_disagreement_table(cache.responses, remapped);
  cache.labels = set.labels();
  return cache;
}

double final_accepted_auc(const SelectionTrace& trace) {
  double value = trace.front().auc;
  for (const auto& e : trace)
    if (e.accepted) value = e.auc;
  return value;
}

int cmd_gen_pool(const std::string& kind, int B, std::uint64_t seed, int margin, double sigma,
                 int n, double threshold, fs::path out, const fs::path& out_dir) {
  BitPool pool;
  if (kind == "brief") {
    if (B == 0) B = kDefaultBriefPoolSize;
    pool = sample_brief_pool(seed, B, margin, sigma);
  } else {
    if (B == 0) B = kDefaultLbpPoolSize;
    pool = sample_lbp_pool(seed, B, n, threshold);
  }
  if (out.empty()) out = out_dir / ("pool_" + kind + ".txt");
  ensure_parent(out);
  write_pool(pool, out);
  std::cout << "wrote " << out.string() << " (" << pool.size() << " bits)\n";
  return 0;
}

int cmd_gen_synth(std::uint64_t seed, int classes, int per_class, double noise, fs::path out,
                  const fs::path& out_dir) {
  const PairSet set = generate_synthetic_pairset(seed, classes, per_class, noise);
  if (out.empty()) out = out_dir / "synthetic.pairset";
  ensure_parent(out);
  save_pairset(set, out);
  std::cout << "wrote " << out.string() << " (" << set.patches.size() << " patches, "
            << set.pairs.size() << " pairs)\n";
  return 0;
}

int cmd_select(const std::string& pool_file, const DatasetFlags& data, const std::string& method,
               int b, std::int64_t iterations, double shrinkage, double tau, std::uint64_t seed,
               int runs, int threads, fs::path out_prefix, const fs::path& out_dir) {
  const BitPool pool = read_pool(pool_file);
  const PairSet set = data.load();
  const TrainingCache cache = build_training_cache(pool, set, threads);
  if (out_prefix.empty()) out_prefix = out_dir / method;
  ensure_parent(out_prefix);

  const fs::path runs_csv = out_prefix.string() + "_runs.csv";
  {
    std::ofstream metrics(runs_csv, std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics file: " + runs_csv.string());
    metrics << "method,run,seed,auc\n";
  }

  for (int run = 0; run < runs; ++run) {
    const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(run);
    Descriptor desc;
    SelectionTrace trace;
    if (method == "hillclimb") {
      auto result = select_hill_climb(cache.disagreement, cache.labels, b, iterations, run_seed);
      desc = std::move(result.descriptor);
      trace = std::move(result.trace);
    } else if (method == "boost") {
      desc = select_boosting(cache.disagreement, cache.labels, b, shrinkage);
    } else if (method == "corr") {
      desc = select_correlation(cache.disagreement, cache.labels, cache.responses, b, tau);
    } else {
      desc = select_random(cache.disagreement.rows(), b, run_seed);
    }
    if (trace.empty()) {
      const auto state = compute_pair_distances(cache.disagreement, cache.labels, desc.selected);
      trace.push_back({0, auc(state.match_hist, state.nonmatch_hist), true});
    }
    desc.pool_ref = fs::path(pool_file).filename().string();

    const fs::path desc_path = out_prefix.string() + "_run" + std::to_string(run) + ".desc";
    const fs::path trace_path = out_prefix.string() + "_run" + std::to_string(run) + "_trace.csv";
    write_descriptor(desc, desc_path);
    write_trace(trace, trace_path);

    std::ofstream metrics(runs_csv, std::ios::app);
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%d,%llu,%.17g\n", run,
                  static_cast<unsigned long long>(run_seed), final_accepted_auc(trace));
    metrics << method << buf;
    std::cout << "run " << run << ": wrote " << desc_path.string() << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& pool_file, const std::vector<std::string>& descriptor_files,
             std::vector<std::string> labels, const DatasetFlags& data,
             const std::string& train_name, const std::string& test_name, int run, int threads,
             fs::path report_path, std::string curve_prefix, const fs::path& out_dir) {
  const BitPool pool = read_pool(pool_file);
  const PairSet set = data.load();

  if (labels.empty())
    for (const auto& file : descriptor_files) labels.push_back(fs::path(file).stem().string());
  if (labels.size() != descriptor_files.size())
    throw ParamError("--label count must match --descriptor count");

  if (report_path.empty()) report_path = out_dir / "report.csv";
  if (curve_prefix.empty()) curve_prefix = (out_dir / "curve_").string();
  ensure_parent(report_path);
  write_report_header(report_path);

  const std::string pool_name = fs::path(pool_file).filename().string();
  for (std::size_t i = 0; i < descriptor_files.size(); ++i) {
    const Descriptor desc = read_descriptor(descriptor_files[i]);
    if (!desc.pool_ref.empty() && desc.pool_ref != pool_name)
      throw UsageError("descriptor " + descriptor_files[i] + " was built from pool '" +
                       desc.pool_ref + "', not '" + pool_name + "'");
    const EvalReport report = evaluate_descriptor(desc, pool, set, threads);
    append_report_row(report_path, labels[i], train_name, test_name, run, report);
    const fs::path curve_path = curve_prefix + labels[i] + ".csv";
    ensure_parent(curve_path);
    write_curve(report.curve, curve_path);
    char buf[96];
    std::snprintf(buf, sizeof buf, "auc %.6f fpr95 %.6f", report.auc, report.fpr95);
    std::cout << labels[i] << ": " << buf << "\n";
  }
  return 0;
}

int cmd_retrieve(const std::string& manifest_file, const std::string& pool_file,
                 const std::string& descriptor_file, int k, int threshold, bool tune,
                 int fast_threshold, int max_keypoints, int threads, fs::path out,
                 const fs::path& out_dir) {
  const BitPool pool = read_pool(pool_file);
  const Descriptor desc = read_descriptor(descriptor_file);
  const auto entries = read_manifest(manifest_file);
  if (entries.empty()) throw FormatError(manifest_file + ": empty manifest");

  const fs::path base = fs::path(manifest_file).parent_path();
  std::vector<Image8> images;
  std::vector<int> groups;
  std::vector<std::string> names;
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_relative()) p = base / p;
    images.push_back(read_bmp_gray(p));
    groups.push_back(e.group);
    names.push_back(e.path);
  }

  const ImageIndex index =
      index_images(images, groups, names, desc, pool, fast_threshold, max_keypoints, threads);
  if (tune) threshold = tune_threshold(index, k);
  if (threshold < 0 || threshold > index.signature_bits)
    throw ParamError("hamming threshold must be in [0, b]");
  const double precision = precision_at_k(index, k, threshold);

  if (out.empty()) out = out_dir / "retrieval.csv";
  ensure_parent(out);
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw IoError("cannot write results file: " + out.string());
  csv << "query_id,rank,retrieved_id,match_count\n";
  for (int q = 0; q < static_cast<int>(index.images.size()); ++q) {
    const auto hits = retrieve(q, index, k, threshold);
    for (std::size_t r = 0; r < hits.size(); ++r)
      csv << q << "," << (r + 1) << "," << hits[r].image << "," << hits[r].matches << "\n";
  }
  char summary[96];
  std::snprintf(summary, sizeof summary, "precision_at_k,%d,%.10g,threshold,%d", k, precision,
                threshold);
  csv << summary << "\n";
  if (!csv) throw IoError("short write to results file: " + out.string());
  std::cout << summary << "\n";
  return 0;
}

int cmd_bench(int classes, int per_class, double noise, const std::string& kind, int B, int b,
              std::int64_t iterations, std::uint64_t seed, int threads) {
  const PairSet set = generate_synthetic_pairset(seed, classes, per_class, noise);
  const BitPool pool = kind == "brief"
                           ? sample_brief_pool(seed, B == 0 ? kDefaultBriefPoolSize : B)
                           : sample_lbp_pool(seed, B == 0 ? kDefaultLbpPoolSize : B);
  std::printf("pairs,%zu\n", set.pairs.size());
  std::printf("pool_bits,%lld\n", static_cast<long long>(pool.size()));

  auto t0 = std::chrono::steady_clock::now();
  const BitMatrix responses = build_response_matrix(pool, set.patches, threads);
  std::printf("response_matrix_seconds,%.3f\n", seconds_since(t0));

  t0 = std::chrono::steady_clock::now();
  const BitMatrix table = build_disagreement_table(responses, set.pairs);
  std::printf("disagreement_table_seconds,%.3f\n", seconds_since(t0));

  const auto labels = set.labels();
  t0 = std::chrono::steady_clock::now();
  const auto result = select_hill_climb(table, labels, b, iterations, seed);
  std::printf("selection_seconds,%.3f\n", seconds_since(t0));
  std::printf("final_auc,%.10g\n", final_accepted_auc(result.trace));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binary descriptor construction by AUC hill climbing"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([subcommand] sections)");

  std::string out_dir_str = ".";
  app.add_option("--out-dir", out_dir_str, "default directory for output files")
      ->envname("BITSEL_OUT_DIR");

  // gen-pool
  auto* gen_pool = app.add_subcommand("gen-pool", "sample a candidate bit pool");
  std::string gp_kind;
  int gp_B = 0;
  std::uint64_t gp_seed = 1;
  int gp_margin = kDefaultMargin;
  double gp_sigma = kDefaultSigma;
  int gp_n = 256;
  double gp_T = 0.01;
  std::string gp_out;
  gen_pool->add_option("--kind", gp_kind, "pool kind")
      ->required()
      ->check(CLI::IsMember({"brief", "lbp"}));
  gen_pool->add_option("--B", gp_B, "pool size (default 1024 brief / 4096 lbp)");
  gen_pool->add_option("--seed", gp_seed, "RNG seed");
  gen_pool->add_option("--margin", gp_margin, "sampling margin (brief)");
  gen_pool->add_option("--sigma", gp_sigma, "Gaussian smoothing sigma (brief)");
  gen_pool->add_option("--n", gp_n, "LBP vector dimension (lbp)");
  gen_pool->add_option("--T", gp_T, "CS-LBP threshold (lbp)");
  gen_pool->add_option("--out", gp_out, "output pool file");

  // gen-synth
  auto* gen_synth = app.add_subcommand("gen-synth", "generate a synthetic pairset");
  std::uint64_t gs_seed = 1;
  int gs_classes = 50;
  int gs_per_class = 4;
  double gs_noise = 0.1;
  std::string gs_out;
  gen_synth->add_option("--seed", gs_seed, "RNG seed");
  gen_synth->add_option("--classes", gs_classes, "number of classes");
  gen_synth->add_option("--per-class", gs_per_class, "patches per class");
  gen_synth->add_option("--noise", gs_noise, "per-pixel resampling probability")
      ->check(CLI::Range(0.0, 1.0));
  gen_synth->add_option("--out", gs_out, "output pairset file");

  // select
  auto* select = app.add_subcommand("select", "select descriptor bits from a pool");
  std::string sel_pool, sel_method, sel_prefix;
  DatasetFlags sel_data;
  int sel_b = 256;
  std::int64_t sel_N = -1;
  double sel_shrinkage = 0.5;
  double sel_tau = 0.3;
  std::uint64_t sel_seed = 1;
  int sel_runs = 1;
  int sel_threads = 0;
  select->add_option("--pool", sel_pool, "pool file")->required();
  sel_data.attach(select);
  select->add_option("--method", sel_method, "selection method")
      ->required()
      ->check(CLI::IsMember({"hillclimb", "boost", "corr", "random"}));
  select->add_option("--b", sel_b, "descriptor length");
  select->add_option("--N", sel_N, "hill-climb iterations (default 4*B)");
  select->add_option("--shrinkage", sel_shrinkage, "boosting shrinkage")
      ->check(CLI::Range(1e-9, 1.0));
  select->add_option("--tau", sel_tau, "correlation threshold")->check(CLI::Range(1e-9, 1.0));
  select->add_option("--seed", sel_seed, "base RNG seed (run r uses seed+r)");
  select->add_option("--runs", sel_runs, "number of runs")->check(CLI::PositiveNumber);
  select->add_option("--threads", sel_threads, "worker threads (0 = all cores)");
  select->add_option("--out-prefix", sel_prefix, "output file prefix");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate descriptors on a pair set");
  std::string ev_pool, ev_train = "-", ev_test = "-", ev_report, ev_curve_prefix;
  std::vector<std::string> ev_descs, ev_labels;
  DatasetFlags ev_data;
  int ev_run = 0;
  int ev_threads = 0;
  eval->add_option("--pool", ev_pool, "pool file")->required();
  eval->add_option("--descriptor", ev_descs, "descriptor file (repeatable)")->required();
  eval->add_option("--label", ev_labels, "method label per descriptor (repeatable)");
  ev_data.attach(eval);
  eval->add_option("--train-name", ev_train, "training set name for the report");
  eval->add_option("--test-name", ev_test, "test set name for the report");
  eval->add_option("--run", ev_run, "run index for the report");
  eval->add_option("--threads", ev_threads, "worker threads (0 = all cores)");
  eval->add_option("--report", ev_report, "report CSV path");
  eval->add_option("--curve-prefix", ev_curve_prefix, "curve CSV path prefix");

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "keypoint retrieval over an image database");
  std::string rt_manifest, rt_pool, rt_desc, rt_out;
  int rt_k = 3;
  int rt_threshold = 0;
  bool rt_tune = false;
  int rt_fast_threshold = 20;
  int rt_max_keypoints = 75;
  int rt_threads = 0;
  retrieve_cmd->add_option("--manifest", rt_manifest, "database manifest (path group_id)")
      ->required();
  retrieve_cmd->add_option("--pool", rt_pool, "pool file")->required();
  retrieve_cmd->add_option("--descriptor", rt_desc, "descriptor file")->required();
  retrieve_cmd->add_option("--k", rt_k, "retrieved neighbors per query");
  retrieve_cmd->add_option("--threshold", rt_threshold, "Hamming match threshold");
  retrieve_cmd->add_flag("--tune", rt_tune, "sweep thresholds and use the argmax");
  retrieve_cmd->add_option("--fast-threshold", rt_fast_threshold, "FAST intensity threshold");
  retrieve_cmd->add_option("--max-keypoints", rt_max_keypoints, "keypoints per image");
  retrieve_cmd->add_option("--threads", rt_threads, "worker threads (0 = all cores)");
  retrieve_cmd->add_option("--out", rt_out, "results CSV path");

  // bench
  auto* bench = app.add_subcommand("bench", "time the selection stage on synthetic data");
  int bn_classes = 500;
  int bn_per_class = 5;
  double bn_noise = 0.1;
  std::string bn_kind = "brief";
  int bn_B = 1024;
  int bn_b = 256;
  std::int64_t bn_N = -1;
  std::uint64_t bn_seed = 1;
  int bn_threads = 0;
  bench->add_option("--classes", bn_classes, "synthetic classes");
  bench->add_option("--per-class", bn_per_class, "patches per class");
  bench->add_option("--noise", bn_noise, "synthetic noise level");
  bench->add_option("--kind", bn_kind, "pool kind")->check(CLI::IsMember({"brief", "lbp"}));
  bench->add_option("--B", bn_B, "pool size");
  bench->add_option("--b", bn_b, "descriptor length");
  bench->add_option("--N", bn_N, "iterations (default 4*B)");
  bench->add_option("--seed", bn_seed, "RNG seed");
  bench->add_option("--threads", bn_threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
    const fs::path out_dir = out_dir_str;
    if (gen_pool->parsed())
      return cmd_gen_pool(gp_kind, gp_B, gp_seed, gp_margin, gp_sigma, gp_n, gp_T, gp_out, out_dir);
    if (gen_synth->parsed())
      return cmd_gen_synth(gs_seed, gs_classes, gs_per_class, gs_noise, gs_out, out_dir);
    if (select->parsed())
      return cmd_select(sel_pool, sel_data, sel_method, sel_b, sel_N, sel_shrinkage, sel_tau,
                        sel_seed, sel_runs, sel_threads, sel_prefix, out_dir);
    if (eval->parsed())
      return cmd_eval(ev_pool, ev_descs, ev_labels, ev_data, ev_train, ev_test, ev_run, ev_threads,
                      ev_report, ev_curve_prefix, out_dir);
    if (retrieve_cmd->parsed())
      return cmd_retrieve(rt_manifest, rt_pool, rt_desc, rt_k, rt_threshold, rt_tune,
                          rt_fast_threshold, rt_max_keypoints, rt_threads, rt_out, out_dir);
    if (bench->parsed())
      return cmd_bench(bn_classes, bn_per_class, bn_noise, bn_kind, bn_B, bn_b, bn_N, bn_seed,
                       bn_threads);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // --help exits 0, usage errors exit 1
  } catch (const ParamError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
