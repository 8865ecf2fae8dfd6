#include "dabench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <sys/utsname.h>
#include <unistd.h>

#include <json.hpp>

#include "dabench/errors.hpp"
#include "dabench/kernels.hpp"

namespace dabench::harness {

namespace {

using json = nlohmann::json;

constexpr std::size_t kFullScaleFloorBytes = 1024ull << 30;  // 1024 GiB

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double now_seconds() {
  const auto t = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration<double>(t).count();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string host_label() {
  char buf[256] = {0};
  if (gethostname(buf, sizeof(buf) - 1) != 0) return "unknown";
  return buf;
}

std::map<std::string, std::string> default_factors() {
  utsname un{};
  std::string arch = "unknown";
  if (uname(&un) == 0) arch = un.machine;
  return {{"architecture", arch}, {"library", "builtin"}, {"threads", "1"}, {"version", "0.1.0"}};
}

double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

dmat::GenMode gen_mode_from_name(const std::string& name) {
  if (name == "per-rank") return dmat::GenMode::kPerRankStream;
  if (name == "replicated") return dmat::GenMode::kReplicatedByRowIndex;
  throw std::invalid_argument("unknown gen mode '" + name + "'");
}

dmat::Workload workload_from_name(const std::string& name) {
  if (name == "pca") return dmat::Workload::kPca;
  if (name == "kmeans") return dmat::Workload::kKmeans;
  if (name == "svm") return dmat::Workload::kSvm;
  throw std::invalid_argument("unknown workload '" + name + "'");
}

json config_to_json(const BenchmarkConfig& c) {
  return json{{"workload", dmat::workload_name(c.workload)},
              {"ranks", c.ranks},
              {"rows_per_rank", c.rows_per_rank},
              {"bytes_per_rank", c.bytes_per_rank},
              {"ncols", c.ncols},
              {"seed", c.seed},
              {"kmeans_k", c.kmeans_k},
              {"kmeans_max_iter", c.kmeans_max_iter},
              {"svm_iters", c.svm_iters},
              {"gen_mode", gen_mode_name(c.gen_mode)},
              {"full_scale", c.full_scale}};
}

void run_kernel(const BenchmarkConfig& config, const dmat::LabeledBlock& data,
                comm::Communicator& comm, double& elapsed, std::vector<std::string>& digests);

BenchmarkConfig config_from_json(const json& j) {
  BenchmarkConfig c;
  c.workload = workload_from_name(j.at("workload").get<std::string>());
  c.ranks = j.at("ranks").get<int>();
  c.rows_per_rank = j.at("rows_per_rank").get<std::size_t>();
  c.bytes_per_rank = j.at("bytes_per_rank").get<std::size_t>();
  c.ncols = j.at("ncols").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kmeans_k = j.at("kmeans_k").get<std::vector<int>>();
  c.kmeans_max_iter = j.at("kmeans_max_iter").get<int>();
  c.svm_iters = j.at("svm_iters").get<int>();
  c.gen_mode = gen_mode_from_name(j.at("gen_mode").get<std::string>());
  c.full_scale = j.at("full_scale").get<bool>();
  return c;
}

}  // namespace

std::size_t resolve_rows_per_rank(const BenchmarkConfig& config) {
  if (config.ranks < 1) throw std::invalid_argument("config: ranks must be >= 1");
  if (config.ncols < 1) throw std::invalid_argument("config: ncols must be >= 1");
  if (config.workload == dmat::Workload::kSvm && config.ncols < 2) {
    throw std::invalid_argument("config: SVM needs ncols >= 2");
  }
  if ((config.rows_per_rank == 0) == (config.bytes_per_rank == 0)) {
    throw std::invalid_argument("config: set exactly one of rows_per_rank / bytes_per_rank");
  }
  if (config.kmeans_max_iter < 1) throw std::invalid_argument("config: kmeans_max_iter >= 1");
  if (config.svm_iters < 1) throw std::invalid_argument("config: svm_iters >= 1");
  if (config.workload == dmat::Workload::kKmeans) {
    if (config.kmeans_k.empty()) throw std::invalid_argument("config: kmeans_k is empty");
    for (int k : config.kmeans_k) {
      if (k < 2 || k > 4) {
        throw std::invalid_argument("config: kmeans_k entries must be in {2,3,4}");
      }
    }
  }

  std::size_t rows = config.rows_per_rank;
  if (rows == 0) {
    const std::size_t row_bytes = config.ncols * sizeof(double);
    if (config.bytes_per_rank % row_bytes != 0) {
      throw std::invalid_argument("config: bytes_per_rank (" +
                                  std::to_string(config.bytes_per_rank) +
                                  ") is not a whole number of " + std::to_string(row_bytes) +
                                  "-byte rows");
    }
    rows = config.bytes_per_rank / row_bytes;
  }
  if (rows == 0) throw std::invalid_argument("config: zero rows per rank");

  if (config.full_scale) {
    const std::size_t total =
        rows * static_cast<std::size_t>(config.ranks) * config.ncols * sizeof(double);
    if (total < kFullScaleFloorBytes) {
      throw std::invalid_argument("config: --full-scale requires at least " +
                                  std::to_string(kFullScaleFloorBytes) + " bytes, got " +
                                  std::to_string(total));
    }
  }
  return rows;
}

double fom_tbs(const FomInput& input) {
  if (!(input.t_a > 0.0)) throw std::invalid_argument("fom: t_a must be positive");
  if (!(input.job_size_tb > 0.0)) throw std::invalid_argument("fom: job size must be positive");
  if (!(input.total_nodes > 0.0) || !(input.job_nodes > 0.0)) {
    throw std::invalid_argument("fom: node counts must be positive");
  }
  if (input.job_nodes > input.total_nodes) {
    throw std::invalid_argument("fom: job_nodes exceeds total_nodes");
  }
  return input.job_size_tb / input.t_a * (input.total_nodes / input.job_nodes);
}

double mean_t_max(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("mean_t_max: no records");
  double sum = 0.0;
  for (const auto& r : records) sum += r.timing.t_max;
  return sum / static_cast<double>(records.size());
}

std::optional<RunRecord> run_benchmark(const BenchmarkConfig& config, comm::Communicator& comm) {
  const std::size_t rows = resolve_rows_per_rank(config);
  if (comm.size() != config.ranks) {
    throw std::invalid_argument("run_benchmark: communicator has " + std::to_string(comm.size()) +
                                " ranks, config wants " + std::to_string(config.ranks));
  }

  dmat::GenSpec spec;
  spec.workload = config.workload;
  spec.nrows_global = rows * static_cast<std::size_t>(config.ranks);
  spec.ncols = config.ncols;
  spec.seed = config.seed;
  spec.mode = config.gen_mode;
  const auto data = dmat::generate(spec, comm);
  if (config.gen_delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(config.gen_delay_ms));
  }

  // Only the kernel is timed; the barrier keeps generation out of the window.
  comm.barrier();
  double elapsed = 0.0;
  std::vector<std::string> digests;
  try {
    run_kernel(config, data, comm, elapsed, digests);
  } catch (const NumericError& e) {
    throw NumericError("rank " + std::to_string(comm.rank()) + ": " + e.what());
  }

  const auto per_rank = comm.gather(elapsed, 0);
  if (!per_rank.has_value()) return std::nullopt;

  RunRecord record;
  record.config = config;
  record.config.rows_per_rank = rows;
  record.timing.per_rank = *per_rank;
  record.timing.t_min = *std::min_element(per_rank->begin(), per_rank->end());
  record.timing.t_max = *std::max_element(per_rank->begin(), per_rank->end());
  double sum = 0.0;
  for (double t : *per_rank) sum += t;
  record.timing.t_mean = std::clamp(sum / static_cast<double>(per_rank->size()),
                                    record.timing.t_min, record.timing.t_max);
  record.problem_bytes = spec.nrows_global * spec.ncols * sizeof(double);
  const double t_max = std::max(record.timing.t_max, 1e-9);
  record.throughput_gbs =
      static_cast<double>(record.problem_bytes) / t_max / static_cast<double>(1ull << 30);
  record.digests = std::move(digests);
  record.timestamp = utc_timestamp();
  record.host = host_label();
  record.factors = default_factors();
  return record;
}

namespace {

void run_kernel(const BenchmarkConfig& config, const dmat::LabeledBlock& data,
                comm::Communicator& comm, double& elapsed, std::vector<std::string>& digests) {
  switch (config.workload) {
    case dmat::Workload::kPca: {
      const double t0 = now_seconds();
      const auto r = kernels::pca_sdev(data.X, comm);
      elapsed = now_seconds() - t0;
      digests.push_back("sdev_first=" + fmt6(r.sdev_first) + ";sdev_last=" + fmt6(r.sdev_last));
      break;
    }
    case dmat::Workload::kKmeans: {
      for (int k : config.kmeans_k) {
        const double t0 = now_seconds();
        const auto init = kernels::kmeans_seeded_init(data.X, k, config.seed, comm);
        const auto r = kernels::kmeans_lloyd(data.X, k, init, config.kmeans_max_iter, comm);
        elapsed += now_seconds() - t0;
        digests.push_back("k=" + std::to_string(k) + ":iters=" + std::to_string(r.iterations_run) +
                          ";wcss=" + fmt6(r.wcss_history.back()) +
                          ";csum=" + fmt6(l1_norm(r.centroids)));
      }
      break;
    }
    case dmat::Workload::kSvm: {
      const double t0 = now_seconds();
      const auto model = kernels::svm_fit(data, config.svm_iters, comm);
      elapsed = now_seconds() - t0;
      digests.push_back("loss=" + fmt6(model.final_loss) + ";wl1=" + fmt6(l1_norm(model.weights)));
      break;
    }
  }
}

}  // namespace

RunRecord run_benchmark_threads(const BenchmarkConfig& config) {
  resolve_rows_per_rank(config);  // fail before spawning workers
  std::optional<RunRecord> record;
  comm::run_ranks(config.ranks, [&](comm::Communicator& c) {
    auto r = run_benchmark(config, c);
    if (c.rank() == 0) record = std::move(r);
  });
  if (!record.has_value()) throw NumericError("run_benchmark_threads: rank 0 produced no record");
  return *record;
}

std::vector<RunRecord> campaign(const CampaignPlan& plan) {
  if (plan.ranks.empty()) throw std::invalid_argument("campaign: empty rank list");
  if (plan.workloads.empty()) throw std::invalid_argument("campaign: empty workload list");
  if (plan.size_bytes == 0) throw std::invalid_argument("campaign: size must be positive");

  std::vector<RunRecord> records;
  for (const auto workload : plan.workloads) {
    for (const int nranks : plan.ranks) {
      BenchmarkConfig config = plan.base;
      config.workload = workload;
      config.ranks = nranks;
      config.rows_per_rank = 0;
      if (plan.mode == ScalingMode::kWeak) {
        config.bytes_per_rank = plan.size_bytes;
      } else {
        if (plan.size_bytes % static_cast<std::size_t>(nranks) != 0) {
          throw std::invalid_argument("campaign: strong-mode size " +
                                      std::to_string(plan.size_bytes) + " does not split over " +
                                      std::to_string(nranks) + " ranks");
        }
        config.bytes_per_rank = plan.size_bytes / static_cast<std::size_t>(nranks);
      }
      records.push_back(run_benchmark_threads(config));
    }
  }
  return records;
}

std::string campaign_summary(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "workload    ranks   problem_bytes     t_min_s      t_mean_s     t_max_s      GB/s\n";
  for (const auto& r : records) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-11s %-7d %-17zu %-12.6g %-12.6g %-12.6g %.6g\n",
                  dmat::workload_name(r.config.workload), r.config.ranks, r.problem_bytes,
                  r.timing.t_min, r.timing.t_mean, r.timing.t_max, r.throughput_gbs);
    os << line;
  }
  return os.str();
}

std::string campaign_csv(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "workload,ranks,threads,architecture,library,version,problem_bytes,t_max_s,"
        "throughput_gbs\n";
  for (const auto& r : records) {
    auto factor = [&](const char* key) {
      const auto it = r.factors.find(key);
      return it == r.factors.end() ? std::string("unknown") : it->second;
    };
    os << dmat::workload_name(r.config.workload) << ',' << r.config.ranks << ','
       << factor("threads") << ',' << factor("architecture") << ',' << factor("library") << ','
       << factor("version") << ',' << r.problem_bytes << ',' << fmt6(r.timing.t_max) << ','
       << fmt6(r.throughput_gbs) << '\n';
  }
  return os.str();
}

std::string record_to_json_line(const RunRecord& record) {
  json j = config_to_json(record.config);
  j["timing"] = {{"t_min", record.timing.t_min},
                 {"t_mean", record.timing.t_mean},
                 {"t_max", record.timing.t_max},
                 {"per_rank", record.timing.per_rank}};
  j["problem_bytes"] = record.problem_bytes;
  j["throughput_gbs"] = record.throughput_gbs;
  j["digests"] = record.digests;
  j["timestamp"] = record.timestamp;
  j["host"] = record.host;
  j["factors"] = record.factors;
  return j.dump();
}

RunRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  RunRecord r;
  r.config = config_from_json(j);
  const auto& t = j.at("timing");
  r.timing.t_min = t.at("t_min").get<double>();
  r.timing.t_mean = t.at("t_mean").get<double>();
  r.timing.t_max = t.at("t_max").get<double>();
  r.timing.per_rank = t.at("per_rank").get<std::vector<double>>();
  r.problem_bytes = j.at("problem_bytes").get<std::size_t>();
  r.throughput_gbs = j.at("throughput_gbs").get<double>();
  r.digests = j.at("digests").get<std::vector<std::string>>();
  r.timestamp = j.at("timestamp").get<std::string>();
  r.host = j.at("host").get<std::string>();
  r.factors = j.at("factors").get<std::map<std::string, std::string>>();
  return r;
}

void write_records(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_records: cannot open " + path);
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw IoError("write_records: short write to " + path);
}

std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_records: cannot open " + path);
  std::vector<RunRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), lineno);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("bad record: ") + e.what(), lineno);
    }
  }
  return records;
}

const char* scaling_mode_name(ScalingMode mode) {
  return mode == ScalingMode::kWeak ? "weak" : "strong";
}

const char* gen_mode_name(dmat::GenMode mode) {
  return mode == dmat::GenMode::kPerRankStream ? "per-rank" : "replicated";
}

}  // namespace dabench::harness
