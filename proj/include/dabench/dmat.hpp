#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dabench/comm.hpp"

namespace dabench::dmat {

enum class Workload { kPca, kKmeans, kSvm };

/// How synthetic rows map onto random streams.
///  - kPerRankStream: each rank draws from its own stream keyed by (seed xor rank);
///    the global dataset depends on the rank count.
///  - kReplicatedByRowIndex: row i is a pure function of (seed, i); the global
///    dataset is invariant to the rank count, enabling exact cross-rank oracles.
enum class GenMode { kPerRankStream, kReplicatedByRowIndex };

enum class LabelRole { kNone, kSvmResponse, kKmeansTruth };

/// Dense double-precision matrix whose rows are split contiguously across ranks.
struct RowBlockMatrix {
  std::vector<double> local_rows;  // row-major, local_nrows x ncols
  std::size_t ncols = 0;
  std::size_t global_nrows = 0;
  std::size_t row_offset = 0;  // global index of the first local row

  std::size_t local_nrows() const { return ncols == 0 ? 0 : local_rows.size() / ncols; }
  double* row(std::size_t r) { return local_rows.data() + r * ncols; }
  const double* row(std::size_t r) const { return local_rows.data() + r * ncols; }
};

struct GenSpec {
  Workload workload = Workload::kPca;
  std::size_t nrows_global = 0;
  std::size_t ncols = 250;
  std::uint64_t seed = 1;
  GenMode mode = GenMode::kPerRankStream;
};

/// A row block plus the labels its generator produced. For SVM data y holds the
/// -1/+1 response; for k-means data it holds the mixture component each row was
/// drawn from (kept for tests only - the benchmark clusters unsupervised).
struct LabeledBlock {
  RowBlockMatrix X;
  std::vector<double> y;
  LabelRole role = LabelRole::kNone;
};

/// Contiguous, as-even-as-possible split: the first nrows % size ranks get one
/// extra row. Returns {row_offset, local_rows}.
std::pair<std::size_t, std::size_t> block_partition(std::size_t nrows_global, int size, int rank);

/// Deterministic synthetic data for one workload. PCA rows are standard normal;
/// k-means rows come from one of three spherical Gaussians with per-coordinate
/// means {0, 2, 10} picked uniformly; SVM rows carry an all-ones intercept column
/// followed by features from a Gaussian of mean 0 (y = -1) or 2 (y = +1).
LabeledBlock generate(const GenSpec& spec, comm::Communicator& comm);

/// Global per-column arithmetic means; identical vector on every rank.
std::vector<double> column_means(const RowBlockMatrix& X, comm::Communicator& comm);

/// Sample covariance (divisor n - 1) of the mean-centered matrix, as a dense
/// row-major ncols x ncols buffer; identical on every rank.
std::vector<double> covariance(const RowBlockMatrix& X, comm::Communicator& comm);

/// Debug export of a local block: 16-byte header (8-byte magic, u32 nrows,
/// u32 ncols) followed by row-major doubles.
void write_block(const RowBlockMatrix& X, const std::string& path);
RowBlockMatrix read_block(const std::string& path);

const char* workload_name(Workload w);

}  // namespace dabench::dmat
