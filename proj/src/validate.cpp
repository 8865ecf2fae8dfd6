#include "dabench/validate.hpp"

#include <algorithm>
#include <cfloat>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dabench/dmat.hpp"
#include "dabench/errors.hpp"
#include "dabench/kernels.hpp"
#include "dabench/rng.hpp"

namespace dabench::validate {

namespace {

constexpr std::size_t kIrisRows = 150;
constexpr std::size_t kIrisCols = 4;
constexpr std::uint64_t kIrisChecksum = 0x9bc190fb5227ebacull;

const std::string_view kIrisCsv =
#include "iris_csv.inc"
    ;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

IrisTable parse_iris(std::string_view text) {
  const auto sum = fnv1a64(text);
  if (sum != kIrisChecksum) {
    throw IoError("iris resource checksum mismatch: expected " + hex64(kIrisChecksum) + ", got " +
                  hex64(sum));
  }

  IrisTable table;
  table.features.reserve(kIrisRows * kIrisCols);
  table.species.reserve(kIrisRows);

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header

    std::size_t field_start = 0;
    for (int field = 0; field < 5; ++field) {
      auto comma = line.find(',', field_start);
      if (comma == std::string_view::npos) comma = line.size();
      const std::string_view cell = line.substr(field_start, comma - field_start);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError("iris table: bad numeric field '" + std::string(cell) + "'", lineno);
      }
      if (field < 4) {
        table.features.push_back(value);
      } else {
        table.species.push_back(static_cast<int>(value));
      }
      field_start = comma + 1;
    }
  }
  if (table.nrows() != kIrisRows) {
    throw ParseError("iris table: expected 150 observations, got " + std::to_string(table.nrows()),
                     lineno);
  }
  return table;
}

void require_two_ranks(const comm::Communicator& comm, const char* what) {
  if (comm.size() < 2) {
    throw std::invalid_argument(std::string(what) + ": validation requires at least 2 ranks, got " +
                                std::to_string(comm.size()));
  }
}

// Distributes the table rows as a contiguous row block; optionally prefixes an
// all-ones intercept column.
dmat::RowBlockMatrix iris_block(const IrisTable& table, comm::Communicator& comm, bool intercept) {
  const std::size_t ncols = kIrisCols + (intercept ? 1 : 0);
  const auto [offset, local] = dmat::block_partition(table.nrows(), comm.size(), comm.rank());
  dmat::RowBlockMatrix X;
  X.ncols = ncols;
  X.global_nrows = table.nrows();
  X.row_offset = offset;
  X.local_rows.resize(local * ncols);
  for (std::size_t r = 0; r < local; ++r) {
    double* row = X.row(r);
    const double* src = table.features.data() + (offset + r) * kIrisCols;
    if (intercept) row[0] = 1.0;
    std::copy(src, src + kIrisCols, row + (intercept ? 1 : 0));
  }
  return X;
}

// All-gather of per-rank integer labels into the full global vector, using the
// row offsets to place each rank's slice.
std::vector<int> allgather_labels(const dmat::RowBlockMatrix& X, std::span<const int> local,
                                  comm::Communicator& comm) {
  std::vector<double> buf(X.global_nrows, 0.0);
  for (std::size_t r = 0; r < local.size(); ++r) {
    buf[X.row_offset + r] = static_cast<double>(local[r]);
  }
  const auto total = comm.allreduce_sum(buf);
  std::vector<int> out(total.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(total[i]);
  return out;
}

double binom2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

std::string_view bundled_iris_csv() { return kIrisCsv; }

IrisTable load_iris() { return parse_iris(kIrisCsv); }

IrisTable load_iris(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_iris: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_iris(buf.str());
}

double rand_measure(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("rand_measure: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("rand_measure: needs at least 2 items");

  // contingency table over the two label alphabets
  std::map<int, std::size_t> amap;
  std::map<int, std::size_t> bmap;
  for (int v : a) amap.emplace(v, amap.size());
  for (int v : b) bmap.emplace(v, bmap.size());
  const std::size_t ka = amap.size();
  const std::size_t kb = bmap.size();
  std::vector<double> cells(ka * kb, 0.0);
  std::vector<double> arow(ka, 0.0);
  std::vector<double> bcol(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ai = amap[a[i]];
    const std::size_t bi = bmap[b[i]];
    cells[ai * kb + bi] += 1.0;
    arow[ai] += 1.0;
    bcol[bi] += 1.0;
  }

  const double total_pairs = binom2(static_cast<double>(n));
  double cell_pairs = 0.0;
  for (double c : cells) cell_pairs += binom2(c);
  double a_same = 0.0;
  for (double c : arow) a_same += binom2(c);
  double b_same = 0.0;
  for (double c : bcol) b_same += binom2(c);

  const double agree_together = cell_pairs;
  const double agree_apart = total_pairs + cell_pairs - a_same - b_same;
  return (agree_together + agree_apart) / total_pairs;
}

ValidationReport validate_pca(comm::Communicator& comm) {
  require_two_ranks(comm, "validate_pca");
  const auto table = load_iris();

  // Every rank factors the full 150 x 4 matrix (p is tiny); the reconstruction
  // error is accumulated over this rank's row block and reduced globally.
  const auto f = kernels::svd_factor(table.features, table.nrows(), kIrisCols);
  const auto [offset, local] = dmat::block_partition(table.nrows(), comm.size(), comm.rank());
  double abs_err = 0.0;
  for (std::size_t r = offset; r < offset + local; ++r) {
    for (std::size_t c = 0; c < kIrisCols; ++c) {
      double v = 0.0;
      for (std::size_t k = 0; k < kIrisCols; ++k) {
        v += f.u[r * kIrisCols + k] * f.s[k] * f.v[c * kIrisCols + k];
      }
      abs_err += std::abs(v - table.features[r * kIrisCols + c]);
    }
  }
  const double mae =
      comm.allreduce_sum_scalar(abs_err) / static_cast<double>(table.nrows() * kIrisCols);

  ValidationReport report;
  report.test = Test::kPca;
  report.threshold = std::sqrt(DBL_EPSILON);  // sqrt(2^-52) per IEEE 754 binary64
  report.metric = mae;
  report.passed = mae < report.threshold;
  return report;
}

ValidationReport validate_kmeans(comm::Communicator& comm) {
  require_two_ranks(comm, "validate_kmeans");
  const auto table = load_iris();
  const auto X = iris_block(table, comm, /*intercept=*/false);

  double best = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto init = kernels::kmeans_seeded_init(X, 3, seed, comm);
    const auto result = kernels::kmeans_lloyd(X, 3, init, 1000, comm);
    const auto labels = allgather_labels(X, result.labels, comm);
    best = std::max(best, rand_measure(labels, table.species));
  }

  ValidationReport report;
  report.test = Test::kKmeans;
  report.threshold = 0.75;
  report.metric = best;
  report.passed = best > report.threshold;
  return report;
}

ValidationReport validate_svm(comm::Communicator& comm) {
  require_two_ranks(comm, "validate_svm");
  const auto table = load_iris();

  dmat::LabeledBlock data;
  data.X = iris_block(table, comm, /*intercept=*/true);
  data.role = dmat::LabelRole::kSvmResponse;
  data.y.resize(data.X.local_nrows());
  for (std::size_t r = 0; r < data.y.size(); ++r) {
    data.y[r] = table.species[data.X.row_offset + r] == 1 ? 1.0 : -1.0;
  }

  const auto model = kernels::svm_fit(data, 500, comm);
  const double accuracy = kernels::svm_accuracy(model, data, comm);

  ValidationReport report;
  report.test = Test::kSvm;
  report.threshold = 0.80;
  report.metric = accuracy;
  report.passed = accuracy > report.threshold;
  return report;
}

const char* test_name(Test t) {
  switch (t) {
    case Test::kPca:
      return "pca";
    case Test::kKmeans:
      return "kmeans";
    case Test::kSvm:
      return "svm";
  }
  return "unknown";
}

}  // namespace dabench::validate
