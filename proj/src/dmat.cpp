#include "dabench/dmat.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dabench/errors.hpp"
#include "dabench/rng.hpp"

namespace dabench::dmat {

namespace {

// Counter layout per row: normals use counter pairs (2j, 2j+1); one reserved
// draw at 2*ncols selects the mixture component. The stride is fixed by ncols
// alone so a row's stream never depends on the workload.
std::uint64_t row_stride(std::size_t ncols) { return 2 * static_cast<std::uint64_t>(ncols) + 2; }

constexpr std::array<double, 3> kKmeansMeans{0.0, 2.0, 10.0};
constexpr std::array<double, 2> kSvmMeans{0.0, 2.0};
constexpr char kBlockMagic[8] = {'D', 'B', 'L', 'K', '0', '0', '0', '1'};

}  // namespace

std::pair<std::size_t, std::size_t> block_partition(std::size_t nrows_global, int size, int rank) {
  const auto s = static_cast<std::size_t>(size);
  const auto r = static_cast<std::size_t>(rank);
  const std::size_t base = nrows_global / s;
  const std::size_t extra = nrows_global % s;
  const std::size_t local = base + (r < extra ? 1 : 0);
  const std::size_t offset = r * base + (r < extra ? r : extra);
  return {offset, local};
}

LabeledBlock generate(const GenSpec& spec, comm::Communicator& comm) {
  if (spec.nrows_global < static_cast<std::size_t>(comm.size())) {
    throw std::invalid_argument("generate: nrows_global (" + std::to_string(spec.nrows_global) +
                                ") < rank count (" + std::to_string(comm.size()) + ")");
  }
  if (spec.ncols == 0) throw std::invalid_argument("generate: ncols must be >= 1");
  if (spec.workload == Workload::kSvm && spec.ncols < 2) {
    throw std::invalid_argument("generate: SVM needs ncols >= 2 (intercept plus a feature)");
  }

  const auto [offset, local] = block_partition(spec.nrows_global, comm.size(), comm.rank());

  LabeledBlock block;
  block.X.ncols = spec.ncols;
  block.X.global_nrows = spec.nrows_global;
  block.X.row_offset = offset;
  block.X.local_rows.resize(local * spec.ncols);

  const bool replicated = spec.mode == GenMode::kReplicatedByRowIndex;
  const std::uint64_t key =
      replicated ? spec.seed : spec.seed ^ static_cast<std::uint64_t>(comm.rank());
  const std::uint64_t stride = row_stride(spec.ncols);

  switch (spec.workload) {
    case Workload::kPca:
      block.role = LabelRole::kNone;
      break;
    case Workload::kKmeans:
      block.role = LabelRole::kKmeansTruth;
      block.y.resize(local);
      break;
    case Workload::kSvm:
      block.role = LabelRole::kSvmResponse;
      block.y.resize(local);
      break;
  }

  for (std::size_t r = 0; r < local; ++r) {
    const std::uint64_t row_index = replicated ? offset + r : r;
    const std::uint64_t base = row_index * stride;
    double* x = block.X.row(r);
    switch (spec.workload) {
      case Workload::kPca: {
        for (std::size_t j = 0; j < spec.ncols; ++j) x[j] = counter_normal(key, base + 2 * j);
        break;
      }
      case Workload::kKmeans: {
        const double u = counter_uniform(key, base + 2 * spec.ncols);
        const auto cls = std::min<std::size_t>(2, static_cast<std::size_t>(u * 3.0));
        for (std::size_t j = 0; j < spec.ncols; ++j)
          x[j] = counter_normal(key, base + 2 * j) + kKmeansMeans[cls];
        block.y[r] = static_cast<double>(cls);
        break;
      }
      case Workload::kSvm: {
        const double u = counter_uniform(key, base + 2 * spec.ncols);
        const auto cls = std::min<std::size_t>(1, static_cast<std::size_t>(u * 2.0));
        x[0] = 1.0;
        for (std::size_t j = 1; j < spec.ncols; ++j)
          x[j] = counter_normal(key, base + 2 * (j - 1)) + kSvmMeans[cls];
        block.y[r] = cls == 0 ? -1.0 : 1.0;
        break;
      }
    }
  }
  return block;
}

std::vector<double> column_means(const RowBlockMatrix& X, comm::Communicator& comm) {
  if (X.global_nrows == 0) throw std::invalid_argument("column_means: matrix has zero rows");
  std::vector<double> sums(X.ncols, 0.0);
  for (std::size_t r = 0; r < X.local_nrows(); ++r) {
    const double* row = X.row(r);
    for (std::size_t j = 0; j < X.ncols; ++j) sums[j] += row[j];
  }
  auto total = comm.allreduce_sum(sums);
  for (auto& v : total) v /= static_cast<double>(X.global_nrows);
  return total;
}

std::vector<double> covariance(const RowBlockMatrix& X, comm::Communicator& comm) {
  if (X.global_nrows < 2) {
    throw std::invalid_argument("covariance: needs at least 2 global rows (divisor n - 1)");
  }
  const auto means = column_means(X, comm);
  const std::size_t p = X.ncols;

  std::vector<double> gram(p * p, 0.0);  // upper triangle of (X - mean)^T (X - mean)
  std::vector<double> centered(p);
  for (std::size_t r = 0; r < X.local_nrows(); ++r) {
    const double* row = X.row(r);
    for (std::size_t j = 0; j < p; ++j) centered[j] = row[j] - means[j];
    for (std::size_t i = 0; i < p; ++i) {
      const double ci = centered[i];
      double* g = gram.data() + i * p;
      for (std::size_t j = i; j < p; ++j) g[j] += ci * centered[j];
    }
  }

  auto total = comm.allreduce_sum(gram);
  const double divisor = static_cast<double>(X.global_nrows) - 1.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      const double v = total[i * p + j] / divisor;
      total[i * p + j] = v;
      total[j * p + i] = v;
    }
  }
  return total;
}

void write_block(const RowBlockMatrix& X, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_block: cannot open " + path);
  const auto nrows = static_cast<std::uint32_t>(X.local_nrows());
  const auto ncols = static_cast<std::uint32_t>(X.ncols);
  out.write(kBlockMagic, sizeof(kBlockMagic));
  out.write(reinterpret_cast<const char*>(&nrows), sizeof(nrows));
  out.write(reinterpret_cast<const char*>(&ncols), sizeof(ncols));
  out.write(reinterpret_cast<const char*>(X.local_rows.data()),
            static_cast<std::streamsize>(X.local_rows.size() * sizeof(double)));
  if (!out) throw IoError("write_block: short write to " + path);
}

RowBlockMatrix read_block(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_block: cannot open " + path);
  char magic[8];
  std::uint32_t nrows = 0;
  std::uint32_t ncols = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&nrows), sizeof(nrows));
  in.read(reinterpret_cast<char*>(&ncols), sizeof(ncols));
  if (!in || std::memcmp(magic, kBlockMagic, sizeof(magic)) != 0) {
    throw IoError("read_block: " + path + " is not a block file (bad magic)");
  }
  RowBlockMatrix X;
  X.ncols = ncols;
  X.global_nrows = nrows;
  X.row_offset = 0;
  X.local_rows.resize(static_cast<std::size_t>(nrows) * ncols);
  in.read(reinterpret_cast<char*>(X.local_rows.data()),
          static_cast<std::streamsize>(X.local_rows.size() * sizeof(double)));
  if (!in) throw IoError("read_block: " + path + " truncated");
  return X;
}

const char* workload_name(Workload w) {
  switch (w) {
    case Workload::kPca:
      return "pca";
    case Workload::kKmeans:
      return "kmeans";
    case Workload::kSvm:
      return "svm";
  }
  return "unknown";
}

}  // namespace dabench::dmat
