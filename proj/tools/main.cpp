#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dabench/comm.hpp"
#include "dabench/dmat.hpp"
#include "dabench/errors.hpp"
#include "dabench/harness.hpp"
#include "dabench/perfmodel.hpp"
#include "dabench/validate.hpp"

namespace {

using namespace dabench;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

dmat::Workload workload_from(const std::string& name) {
  if (name == "pca") return dmat::Workload::kPca;
  if (name == "kmeans") return dmat::Workload::kKmeans;
  if (name == "svm") return dmat::Workload::kSvm;
  throw CLI::ValidationError("--workload", "must be one of pca|kmeans|svm");
}

std::vector<int> int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "expected a comma-separated integer list");
    }
  }
  return out;
}

std::string csv_sibling_path(const std::string& records_path) {
  const auto dot = records_path.find_last_of('.');
  const auto slash = records_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return records_path + ".csv";
  }
  return records_path.substr(0, dot) + ".csv";
}

void print_record(const harness::RunRecord& record) {
  std::printf("workload:        %s\n", dmat::workload_name(record.config.workload));
  std::printf("ranks:           %d\n", record.config.ranks);
  std::printf("rows per rank:   %zu\n", record.config.rows_per_rank);
  std::printf("columns:         %zu\n", record.config.ncols);
  std::printf("problem bytes:   %zu\n", record.problem_bytes);
  std::printf("t_min/mean/max:  %.6g / %.6g / %.6g s\n", record.timing.t_min,
              record.timing.t_mean, record.timing.t_max);
  std::printf("throughput:      %.6g GB/s\n", record.throughput_gbs);
  for (const auto& d : record.digests) std::printf("digest:          %s\n", d.c_str());
}

int run_bench(const std::string& workload, int ranks, std::size_t rows, std::size_t bytes,
              std::size_t cols, std::uint64_t seed, const std::string& kmeans_k, int kmeans_iters,
              int svm_iters, const std::string& gen_mode, bool full_scale,
              const std::string& out) {
  harness::BenchmarkConfig config;
  config.workload = workload_from(workload);
  config.ranks = ranks;
  config.rows_per_rank = rows;
  config.bytes_per_rank = bytes;
  config.ncols = cols;
  config.seed = seed;
  config.kmeans_k = int_list(kmeans_k, "--kmeans-k");
  config.kmeans_max_iter = kmeans_iters;
  config.svm_iters = svm_iters;
  if (gen_mode == "per-rank") {
    config.gen_mode = dmat::GenMode::kPerRankStream;
  } else if (gen_mode == "replicated") {
    config.gen_mode = dmat::GenMode::kReplicatedByRowIndex;
  } else {
    throw CLI::ValidationError("--gen-mode", "must be per-rank or replicated");
  }
  config.full_scale = full_scale;

  const auto record = harness::run_benchmark_threads(config);
  print_record(record);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::app);
    if (!f) throw IoError("cannot open " + out);
    f << harness::record_to_json_line(record) << '\n';
    std::printf("record appended to %s\n", out.c_str());
  }
  return 0;
}

int run_validate(const std::string& test, int ranks) {
  std::vector<validate::Test> tests;
  if (test == "all") {
    tests = {validate::Test::kPca, validate::Test::kKmeans, validate::Test::kSvm};
  } else if (test == "pca") {
    tests = {validate::Test::kPca};
  } else if (test == "kmeans") {
    tests = {validate::Test::kKmeans};
  } else if (test == "svm") {
    tests = {validate::Test::kSvm};
  } else {
    throw CLI::ValidationError("--test", "must be one of pca|kmeans|svm|all");
  }

  std::vector<validate::ValidationReport> reports;
  comm::run_ranks(ranks, [&](comm::Communicator& c) {
    std::vector<validate::ValidationReport> local;
    for (const auto t : tests) {
      switch (t) {
        case validate::Test::kPca:
          local.push_back(validate::validate_pca(c));
          break;
        case validate::Test::kKmeans:
          local.push_back(validate::validate_kmeans(c));
          break;
        case validate::Test::kSvm:
          local.push_back(validate::validate_svm(c));
          break;
      }
    }
    if (c.rank() == 0) reports = local;
  });

  bool all_passed = true;
  for (const auto& r : reports) {
    std::printf("[%s] metric=%.9g threshold=%.9g %s\n", validate::test_name(r.test), r.metric,
                r.threshold, r.passed ? "PASS" : "FAIL");
    all_passed = all_passed && r.passed;
  }
  return all_passed ? 0 : 1;
}

int run_fom(double ta, double job_size_tb, double total_nodes, double job_nodes) {
  const double fom = harness::fom_tbs({ta, job_size_tb, total_nodes, job_nodes});
  std::printf("FOM (TB/s): %.6g\n", fom);
  return 0;
}

int run_campaign(const std::string& mode, const std::string& ranks, std::size_t size,
                 const std::string& workloads, const std::string& out, std::size_t cols,
                 std::uint64_t seed, const std::string& gen_mode) {
  harness::CampaignPlan plan;
  if (mode == "weak") {
    plan.mode = harness::ScalingMode::kWeak;
  } else if (mode == "strong") {
    plan.mode = harness::ScalingMode::kStrong;
  } else {
    throw CLI::ValidationError("--mode", "must be weak or strong");
  }
  plan.ranks = int_list(ranks, "--ranks");
  plan.size_bytes = size;
  for (const auto& w : split_list(workloads)) plan.workloads.push_back(workload_from(w));
  plan.base.ncols = cols;
  plan.base.seed = seed;
  plan.base.gen_mode = gen_mode == "replicated" ? dmat::GenMode::kReplicatedByRowIndex
                                                : dmat::GenMode::kPerRankStream;

  const auto records = harness::campaign(plan);
  std::printf("%s", harness::campaign_summary(records).c_str());
  if (!out.empty()) {
    harness::write_records(records, out);
    const auto csv_path = csv_sibling_path(out);
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    csv << harness::campaign_csv(records);
    std::printf("records written to %s, summary table to %s\n", out.c_str(), csv_path.c_str());
  }
  return 0;
}

int run_model(const std::string& in, const std::string& response, const std::string& factors) {
  auto table = perfmodel::FactorTable::from_csv(in);

  std::string response_column = response;
  if (!table.has_column(response_column)) {
    std::string base;
    if (response == "log-throughput") {
      base = table.has_column("throughput_gbs") ? "throughput_gbs" : "throughput";
    } else if (response.rfind("log-", 0) == 0) {
      base = response.substr(4);
    }
    if (base.empty() || !table.has_column(base)) {
      throw std::invalid_argument("response '" + response + "' not found in " + in);
    }
    response_column = "log(" + base + ")";
    table.add_log_column(base, response_column);
  }

  const auto candidates = split_list(factors);
  if (candidates.empty()) throw std::invalid_argument("--factors must name at least one column");
  const auto fit = perfmodel::stepwise_aic(table, response_column, candidates);
  std::printf("%s", perfmodel::format_fit(fit).c_str());
  if (fit.terms.empty()) {
    std::printf("\nIntercept-only model selected; no terms to decompose.\n");
    return 0;
  }
  const auto anova_table = perfmodel::anova(fit, table);
  std::printf("\nAnalysis of variance:\n%s", perfmodel::format_anova(anova_table).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Message-passing analytics kernel benchmarks (PCA, k-means, SVM)"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run one benchmark and report timings");
  std::string workload;
  int ranks = 1;
  std::size_t rows = 0, bytes = 0, cols = 250;
  std::uint64_t seed = 1;
  std::string kmeans_k = "2,3,4";
  int kmeans_iters = 30, svm_iters = 500;
  std::string gen_mode = "per-rank";
  bool full_scale = false;
  std::string out;
  bench->add_option("--workload", workload, "pca|kmeans|svm")->required();
  bench->add_option("--ranks", ranks, "worker count")->check(CLI::PositiveNumber);
  auto* rows_opt = bench->add_option("--rows-per-rank", rows, "rows per rank");
  bench->add_option("--bytes-per-rank", bytes, "bytes per rank")
      ->excludes(rows_opt)
      ->transform(CLI::AsSizeValue(true));
  bench->add_option("--cols", cols, "columns (default 250)");
  bench->add_option("--seed", seed, "generator seed");
  bench->add_option("--kmeans-k", kmeans_k, "cluster counts, e.g. 2,3,4");
  bench->add_option("--kmeans-iters", kmeans_iters, "k-means iteration cap");
  bench->add_option("--svm-iters", svm_iters, "SVM simplex iterations");
  bench->add_option("--gen-mode", gen_mode, "per-rank|replicated");
  bench->add_flag("--full-scale", full_scale, "enforce the 1024 GiB problem-size floor");
  bench->add_option("--out", out, "append the record to this JSONL file");

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "Run the reference-data validation tests");
  std::string test = "all";
  int validate_ranks = 2;
  validate_cmd->add_option("--test", test, "pca|kmeans|svm|all")->required();
  validate_cmd->add_option("--ranks", validate_ranks, "worker count (>= 2)");

  // fom
  auto* fom = app.add_subcommand("fom", "Compute the ensemble figure of merit");
  double ta = 0.0, job_size_tb = 1.024, total_nodes = 0.0, job_nodes = 0.0;
  fom->add_option("--ta", ta, "mean of per-job maximum kernel seconds")->required();
  fom->add_option("--job-size-tb", job_size_tb, "per-job input size in TB (default 1.024)");
  fom->add_option("--total-nodes", total_nodes, "machine node count")->required();
  fom->add_option("--job-nodes", job_nodes, "nodes per ensemble job")->required();

  // campaign
  auto* campaign_cmd = app.add_subcommand("campaign", "Run a weak or strong scaling sweep");
  std::string mode = "weak", campaign_ranks = "1,2,4", workloads = "pca,kmeans,svm";
  std::size_t size = 0;
  std::string campaign_out;
  std::size_t campaign_cols = 250;
  std::uint64_t campaign_seed = 1;
  std::string campaign_gen_mode = "per-rank";
  campaign_cmd->add_option("--mode", mode, "weak|strong")->required();
  campaign_cmd->add_option("--ranks", campaign_ranks, "comma-separated rank counts");
  campaign_cmd->add_option("--size", size, "bytes per rank (weak) or global bytes (strong)")
      ->required()
      ->transform(CLI::AsSizeValue(true));
  campaign_cmd->add_option("--workloads", workloads, "comma-separated workload list");
  campaign_cmd->add_option("--out", campaign_out, "records JSONL path (.csv written alongside)");
  campaign_cmd->add_option("--cols", campaign_cols, "columns (default 250)");
  campaign_cmd->add_option("--seed", campaign_seed, "generator seed");
  campaign_cmd->add_option("--gen-mode", campaign_gen_mode, "per-rank|replicated");

  // model
  auto* model = app.add_subcommand("model", "Fit the log-performance factor model");
  std::string in, response = "log-throughput", factors;
  model->add_option("--in", in, "comma-separated observation table")->required();
  model->add_option("--response", response, "response column or log-<column>");
  model->add_option("--factors", factors, "comma-separated candidate factors")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench->parsed()) {
      return run_bench(workload, ranks, rows, bytes, cols, seed, kmeans_k, kmeans_iters, svm_iters,
                       gen_mode, full_scale, out);
    }
    if (validate_cmd->parsed()) return run_validate(test, validate_ranks);
    if (fom->parsed()) return run_fom(ta, job_size_tb, total_nodes, job_nodes);
    if (campaign_cmd->parsed()) {
      return run_campaign(mode, campaign_ranks, size, workloads, campaign_out, campaign_cols,
                          campaign_seed, campaign_gen_mode);
    }
    if (model->parsed()) return run_model(in, response, factors);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
