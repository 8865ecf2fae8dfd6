#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dabench/comm.hpp"
#include "dabench/dmat.hpp"

namespace dabench::harness {

/// One benchmark execution request. Exactly one of rows_per_rank /
/// bytes_per_rank must be set; a byte size must be a whole number of
/// ncols * 8 byte rows.
struct BenchmarkConfig {
  dmat::Workload workload = dmat::Workload::kPca;
  int ranks = 1;
  std::size_t rows_per_rank = 0;
  std::size_t bytes_per_rank = 0;
  std::size_t ncols = 250;
  std::uint64_t seed = 1;
  std::vector<int> kmeans_k{2, 3, 4};
  int kmeans_max_iter = 30;
  int svm_iters = 500;
  dmat::GenMode gen_mode = dmat::GenMode::kPerRankStream;
  bool full_scale = false;  // enforce the >= 1 TiB problem-size floor
  int gen_delay_ms = 0;     // test hook: extra latency inside the generation window
};

/// Validates the config and returns the per-rank row count it resolves to.
std::size_t resolve_rows_per_rank(const BenchmarkConfig& config);

/// Kernel-only wall-clock seconds across ranks.
struct TimingSummary {
  double t_min = 0.0;
  double t_mean = 0.0;
  double t_max = 0.0;
  std::vector<double> per_rank;
};

struct RunRecord {
  BenchmarkConfig config;
  TimingSummary timing;
  std::size_t problem_bytes = 0;
  double throughput_gbs = 0.0;        // problem_bytes / t_max / 2^30
  std::vector<std::string> digests;   // one entry per result (one per k for k-means)
  std::string timestamp;
  std::string host;
  std::map<std::string, std::string> factors;  // architecture, library, threads, version
};

/// Inputs of the ensemble figure of merit. t_a is the mean over ensemble jobs
/// of each job's maximum (slowest-rank) kernel wall time.
struct FomInput {
  double t_a = 0.0;
  double job_size_tb = 1.024;
  double total_nodes = 0.0;
  double job_nodes = 0.0;
};

/// job_size_tb / t_a * (total_nodes / job_nodes), in TB/s.
double fom_tbs(const FomInput& input);

/// t_a for a desk-scale ensemble: the mean of the slowest-rank time over a
/// sequence of repeated runs.
double mean_t_max(const std::vector<RunRecord>& records);

/// Generates data, barriers, times only the kernel (k-means: one timed run per
/// requested k, summed), and gathers per-rank times. The record is returned on
/// rank 0; other ranks get nullopt.
std::optional<RunRecord> run_benchmark(const BenchmarkConfig& config, comm::Communicator& comm);

/// Convenience driver: spawns config.ranks in-process workers and returns the
/// rank-0 record.
RunRecord run_benchmark_threads(const BenchmarkConfig& config);

enum class ScalingMode { kWeak, kStrong };

/// A scaling campaign: weak mode fixes size_bytes per rank, strong mode fixes
/// size_bytes globally.
struct CampaignPlan {
  ScalingMode mode = ScalingMode::kWeak;
  std::vector<int> ranks;
  std::size_t size_bytes = 0;
  std::vector<dmat::Workload> workloads;
  BenchmarkConfig base;  // ncols, seed, gen_mode and kernel settings to reuse
};

std::vector<RunRecord> campaign(const CampaignPlan& plan);

/// Plain-text t_max-vs-ranks table.
std::string campaign_summary(const std::vector<RunRecord>& records);

/// Comma-separated table (one row per record) for the performance-model tooling.
std::string campaign_csv(const std::vector<RunRecord>& records);

/// Line-delimited records: one self-describing JSON object per line.
void write_records(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_records(const std::string& path);

std::string record_to_json_line(const RunRecord& record);
RunRecord record_from_json_line(const std::string& line);

const char* scaling_mode_name(ScalingMode mode);
const char* gen_mode_name(dmat::GenMode mode);

}  // namespace dabench::harness
