#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dabench/comm.hpp"
#include "dabench/dmat.hpp"
#include "dabench/errors.hpp"
#include "dabench/kernels.hpp"
#include "dabench/rng.hpp"

using namespace dabench;
using dmat::GenMode;
using dmat::GenSpec;
using dmat::RowBlockMatrix;
using dmat::Workload;

namespace {

RowBlockMatrix local_matrix(std::size_t nrows, std::size_t ncols, std::vector<double> values) {
  RowBlockMatrix X;
  X.ncols = ncols;
  X.global_nrows = nrows;
  X.local_rows = std::move(values);
  return X;
}

std::vector<double> random_matrix(std::size_t m, std::size_t n, std::uint64_t key) {
  std::vector<double> a(m * n);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = counter_normal(key, 2 * i);
  return a;
}

double reconstruction_mae(const kernels::SvdResult& f, std::span<const double> A) {
  double err = 0.0;
  for (std::size_t r = 0; r < f.m; ++r) {
    for (std::size_t c = 0; c < f.n; ++c) {
      double v = 0.0;
      for (std::size_t k = 0; k < f.n; ++k) v += f.u[r * f.n + k] * f.s[k] * f.v[c * f.n + k];
      err += std::abs(v - A[r * f.n + c]);
    }
  }
  return err / static_cast<double>(f.m * f.n);
}

double max_orthogonality_defect(const std::vector<double>& mat, std::size_t rows,
                                std::size_t cols) {
  double worst = 0.0;
  for (std::size_t a = 0; a < cols; ++a) {
    for (std::size_t b = 0; b < cols; ++b) {
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += mat[r * cols + a] * mat[r * cols + b];
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------- eigenvalues

TEST_CASE("eigenvalues of the identity") {
  const std::vector<double> S{1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(kernels::symmetric_eigenvalues(S, 3) == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("eigenvalues of a diagonal matrix") {
  const std::vector<double> S{2, 0, 0, 0};
  CHECK(kernels::symmetric_eigenvalues(S, 2) == std::vector<double>{2.0, 0.0});
}

TEST_CASE("eigenvalues of [[2,1],[1,2]] are 3 and 1") {
  const std::vector<double> S{2, 1, 1, 2};
  auto ev = kernels::symmetric_eigenvalues(S, 2);
  CHECK(std::abs(ev[0] - 3.0) <= 1e-12);
  CHECK(std::abs(ev[1] - 1.0) <= 1e-12);
}

TEST_CASE("asymmetric input is rejected") {
  const std::vector<double> S{1, 2, 0, 1};
  CHECK_THROWS_AS(kernels::symmetric_eigenvalues(S, 2), std::invalid_argument);
}

TEST_CASE("eigenvalue sum and square-sum match trace invariants") {
  // trace(S) = sum of eigenvalues, ||S||_F^2 = sum of squared eigenvalues
  const std::size_t p = 12;
  auto raw = random_matrix(p, p, 77);
  std::vector<double> S(p * p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) S[i * p + j] = 0.5 * (raw[i * p + j] + raw[j * p + i]);
  auto ev = kernels::symmetric_eigenvalues(S, p);
  double trace = 0.0, frob2 = 0.0, evsum = 0.0, evsq = 0.0;
  for (std::size_t i = 0; i < p; ++i) trace += S[i * p + i];
  for (double v : S) frob2 += v * v;
  for (double v : ev) {
    evsum += v;
    evsq += v * v;
  }
  CHECK(std::abs(trace - evsum) <= 1e-10 * std::max(1.0, std::abs(trace)));
  CHECK(std::abs(frob2 - evsq) <= 1e-9 * std::max(1.0, frob2));
  for (std::size_t i = 0; i + 1 < p; ++i) CHECK(ev[i] >= ev[i + 1]);
}

// ------------------------------------------------------------------- pca_sdev

TEST_CASE("pca_sdev of {(1,0),(-1,0)}") {
  comm::SoloComm solo;
  auto X = local_matrix(2, 2, {1.0, 0.0, -1.0, 0.0});
  auto r = kernels::pca_sdev(X, solo);
  CHECK(std::abs(r.sdev_first - std::sqrt(2.0)) <= 1e-12);
  CHECK(r.sdev_last == 0.0);
}

TEST_CASE("pca_sdev agrees between 1 and 4 ranks on replicated data") {
  GenSpec spec{Workload::kPca, 600, 8, 3, GenMode::kReplicatedByRowIndex};
  comm::SoloComm solo;
  auto r1 = kernels::pca_sdev(dmat::generate(spec, solo).X, solo);
  kernels::PcaResult r4;
  comm::run_ranks(4, [&](comm::Communicator& c) {
    auto res = kernels::pca_sdev(dmat::generate(spec, c).X, c);
    if (c.rank() == 0) r4 = res;
  });
  CHECK(std::abs(r1.sdev_first - r4.sdev_first) <= 1e-10);
  CHECK(std::abs(r1.sdev_last - r4.sdev_last) <= 1e-10);
}

TEST_CASE("pca_sdev is identical on every rank of one run") {
  GenSpec spec{Workload::kPca, 240, 5, 17, GenMode::kPerRankStream};
  std::vector<kernels::PcaResult> results(3);
  comm::run_ranks(3, [&](comm::Communicator& c) {
    results[c.rank()] = kernels::pca_sdev(dmat::generate(spec, c).X, c);
  });
  for (int r = 1; r < 3; ++r) {
    CHECK(results[r].sdev_first == results[0].sdev_first);  // bit-identical
    CHECK(results[r].sdev_last == results[0].sdev_last);
  }
}

// ----------------------------------------------------------------- svd_factor

TEST_CASE("svd of diag(3,2)") {
  const std::vector<double> A{3, 0, 0, 2};
  auto f = kernels::svd_factor(A, 2, 2);
  CHECK(std::abs(f.s[0] - 3.0) <= 1e-12);
  CHECK(std::abs(f.s[1] - 2.0) <= 1e-12);
  CHECK(reconstruction_mae(f, A) <= 1e-12);
}

TEST_CASE("svd of the zero matrix reconstructs exactly") {
  const std::vector<double> A(4 * 2, 0.0);
  auto f = kernels::svd_factor(A, 4, 2);
  CHECK(f.s == std::vector<double>{0.0, 0.0});
  CHECK(reconstruction_mae(f, A) == 0.0);
  CHECK(max_orthogonality_defect(f.u, 4, 2) <= 1e-9);
}

TEST_CASE("svd reconstruction and orthogonality on random matrices") {
  for (std::uint64_t key = 1; key <= 5; ++key) {
    auto A = random_matrix(30, 6, key);
    auto f = kernels::svd_factor(A, 30, 6);
    CHECK(reconstruction_mae(f, A) < 1e-10);
    CHECK(max_orthogonality_defect(f.u, 30, 6) <= 1e-9);
    CHECK(max_orthogonality_defect(f.v, 6, 6) <= 1e-9);
    for (std::size_t i = 0; i + 1 < 6; ++i) CHECK(f.s[i] >= f.s[i + 1]);
    for (double s : f.s) CHECK(s >= 0.0);
  }
}

TEST_CASE("svd of a rank-deficient matrix keeps U orthonormal") {
  // two identical columns -> one zero singular value
  std::vector<double> A(5 * 2);
  for (std::size_t r = 0; r < 5; ++r) {
    A[r * 2] = static_cast<double>(r + 1);
    A[r * 2 + 1] = static_cast<double>(r + 1);
  }
  auto f = kernels::svd_factor(A, 5, 2);
  CHECK(f.s[1] <= 1e-12 * f.s[0]);
  CHECK(reconstruction_mae(f, A) <= 1e-10);
  CHECK(max_orthogonality_defect(f.u, 5, 2) <= 1e-9);
}

TEST_CASE("svd rejects m < n") {
  const std::vector<double> A(2 * 3, 1.0);
  CHECK_THROWS_AS(kernels::svd_factor(A, 2, 3), std::invalid_argument);
}

TEST_CASE("sqrt of covariance eigenvalues equals singular values of the centered matrix") {
  // equivalence of the two PCA routes on small dense matrices
  comm::SoloComm solo;
  for (std::uint64_t key = 1; key <= 8; ++key) {
    const std::size_t m = 40 + static_cast<std::size_t>(key % 3) * 5;  // up to 50
    const std::size_t n = 4 + static_cast<std::size_t>(key % 5);       // up to 8
    auto A = random_matrix(m, n, 1000 + key);
    auto X = local_matrix(m, n, A);
    auto means = dmat::column_means(X, solo);
    std::vector<double> centered(A);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) centered[r * n + c] -= means[c];
    auto f = kernels::svd_factor(centered, m, n);
    auto pca = kernels::pca_sdev(X, solo);
    REQUIRE(pca.eigenvalues.size() == n);
    const double scale = std::sqrt(static_cast<double>(m) - 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(std::abs(std::sqrt(pca.eigenvalues[j]) - f.s[j] / scale) <= 1e-8);
    }
  }
}

// --------------------------------------------------------------- kmeans_lloyd

TEST_CASE("kmeans on four 1-D points converges to the two pair means") {
  comm::SoloComm solo;
  auto X = local_matrix(4, 1, {0.0, 0.1, 9.9, 10.0});
  const std::vector<double> init{0.0, 10.0};
  auto r = kernels::kmeans_lloyd(X, 2, init, 100, solo);
  CHECK(std::abs(r.centroids[0] - 0.05) <= 1e-12);
  CHECK(std::abs(r.centroids[1] - 9.95) <= 1e-12);
  CHECK(r.iterations_run <= 2);
  CHECK(r.labels == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("kmeans with k=1 returns the column means") {
  GenSpec spec{Workload::kKmeans, 150, 3, 5, GenMode::kPerRankStream};
  comm::SoloComm solo;
  auto block = dmat::generate(spec, solo);
  auto means = dmat::column_means(block.X, solo);
  const std::vector<double> init(3, 0.0);
  auto r = kernels::kmeans_lloyd(block.X, 1, init, 10, solo);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(r.centroids[j] - means[j]) <= 1e-12);
}

TEST_CASE("kmeans recovers a well-separated mixture") {
  GenSpec spec{Workload::kKmeans, 3000, 16, 11, GenMode::kPerRankStream};
  comm::SoloComm solo;
  auto block = dmat::generate(spec, solo);
  auto init = kernels::kmeans_seeded_init(block.X, 3, 1, solo);
  auto r = kernels::kmeans_lloyd(block.X, 3, init, 1000, solo);
  // labels must match generator truth up to a relabeling; check pair agreement
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t j = i + 1; j < 500; ++j) {
      const bool same_truth = block.y[i] == block.y[j];
      const bool same_label = r.labels[i] == r.labels[j];
      agree += same_truth == same_label;
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(total) > 0.99);
}

TEST_CASE("kmeans wcss is non-increasing and assignment is idempotent at convergence") {
  GenSpec spec{Workload::kKmeans, 900, 4, 23, GenMode::kPerRankStream};
  comm::SoloComm solo;
  auto block = dmat::generate(spec, solo);
  auto init = kernels::kmeans_seeded_init(block.X, 3, 9, solo);
  auto r = kernels::kmeans_lloyd(block.X, 3, init, 1000, solo);
  for (std::size_t i = 0; i + 1 < r.wcss_history.size(); ++i) {
    CHECK(r.wcss_history[i + 1] <= r.wcss_history[i] + 1e-9);
  }
  // converged: rerunning assignment changes nothing
  auto rerun = kernels::kmeans_lloyd(block.X, 3, r.centroids, 1, solo);
  CHECK(rerun.labels == r.labels);
  CHECK(rerun.centroids == r.centroids);
}

TEST_CASE("kmeans centroids equal the means of their assigned rows at termination") {
  GenSpec spec{Workload::kKmeans, 600, 3, 31, GenMode::kPerRankStream};
  comm::SoloComm solo;
  auto block = dmat::generate(spec, solo);
  auto init = kernels::kmeans_seeded_init(block.X, 4, 2, solo);
  auto r = kernels::kmeans_lloyd(block.X, 4, init, 7, solo);  // stop mid-run at max_iter
  for (int c = 0; c < 4; ++c) {
    std::vector<double> mean(3, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < block.X.local_nrows(); ++i) {
      if (r.labels[i] != c) continue;
      ++count;
      for (std::size_t j = 0; j < 3; ++j) mean[j] += block.X.row(i)[j];
    }
    if (count == 0) continue;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(mean[j] / static_cast<double>(count) - r.centroids[c * 3 + j]) <= 1e-10);
    }
  }
}

TEST_CASE("kmeans agrees between 1 and 4 ranks on replicated data") {
  GenSpec spec{Workload::kKmeans, 800, 6, 13, GenMode::kReplicatedByRowIndex};
  comm::SoloComm solo;
  auto b1 = dmat::generate(spec, solo);
  auto init1 = kernels::kmeans_seeded_init(b1.X, 3, 4, solo);
  auto r1 = kernels::kmeans_lloyd(b1.X, 3, init1, 50, solo);

  kernels::KmeansResult r4;
  comm::run_ranks(4, [&](comm::Communicator& c) {
    auto b = dmat::generate(spec, c);
    auto init = kernels::kmeans_seeded_init(b.X, 3, 4, c);
    auto r = kernels::kmeans_lloyd(b.X, 3, init, 50, c);
    if (c.rank() == 0) r4 = r;
  });
  REQUIRE(r1.centroids.size() == r4.centroids.size());
  for (std::size_t i = 0; i < r1.centroids.size(); ++i) {
    CHECK(std::abs(r1.centroids[i] - r4.centroids[i]) <= 1e-10);
  }
  CHECK(r1.iterations_run == r4.iterations_run);
}

TEST_CASE("kmeans rejects k larger than the row count") {
  comm::SoloComm solo;
  auto X = local_matrix(2, 1, {0.0, 1.0});
  const std::vector<double> init(3, 0.0);
  CHECK_THROWS_AS(kernels::kmeans_lloyd(X, 3, init, 5, solo), std::invalid_argument);
}

// ----------------------------------------------------------------- hinge_loss

TEST_CASE("hinge loss at w = 0 equals the global row count") {
  GenSpec spec{Workload::kSvm, 120, 4, 3, GenMode::kPerRankStream};
  std::vector<double> losses(3, 0.0);
  comm::run_ranks(3, [&](comm::Communicator& c) {
    auto block = dmat::generate(spec, c);
    const std::vector<double> w(4, 0.0);
    losses[c.rank()] = kernels::hinge_loss(w, block.X, block.y, c);
  });
  for (double l : losses) CHECK(l == 120.0);
}

TEST_CASE("hinge loss of a correctly classified row with margin is zero") {
  comm::SoloComm solo;
  auto X = local_matrix(1, 2, {1.0, 1.0});
  const std::vector<double> y{1.0};
  const std::vector<double> w{2.0, 0.0};
  CHECK(kernels::hinge_loss(w, X, y, solo) == 0.0);
}

TEST_CASE("hinge loss hand case sums to 5.5") {
  // x.w = {0.5, -1, 2} with y = {+1, +1, -1} -> 0.5 + 2 + 3
  comm::SoloComm solo;
  auto X = local_matrix(3, 1, {0.5, -1.0, 2.0});
  const std::vector<double> y{1.0, 1.0, -1.0};
  const std::vector<double> w{1.0};
  CHECK(kernels::hinge_loss(w, X, y, solo) == 5.5);
}

TEST_CASE("hinge loss rejects mismatched dimensions") {
  comm::SoloComm solo;
  auto X = local_matrix(1, 2, {1.0, 1.0});
  const std::vector<double> y{1.0};
  const std::vector<double> w{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(kernels::hinge_loss(w, X, y, solo), std::invalid_argument);
}

TEST_CASE("hinge loss is convex in w") {
  comm::SoloComm solo;
  GenSpec spec{Workload::kSvm, 40, 3, 19, GenMode::kPerRankStream};
  auto block = dmat::generate(spec, solo);
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(3), b(3), mid(3);
    for (int j = 0; j < 3; ++j) {
      a[j] = nd(gen);
      b[j] = nd(gen);
      mid[j] = 0.5 * (a[j] + b[j]);
    }
    const double fa = kernels::hinge_loss(a, block.X, block.y, solo);
    const double fb = kernels::hinge_loss(b, block.X, block.y, solo);
    const double fm = kernels::hinge_loss(mid, block.X, block.y, solo);
    CHECK(fm <= 0.5 * (fa + fb) + 1e-12);
  }
}

// ---------------------------------------------------------------- nelder_mead

TEST_CASE("nelder_mead minimizes a 1-D parabola") {
  auto f = [](std::span<const double> w) { return (w[0] - 3.0) * (w[0] - 3.0); };
  const std::vector<double> w0{0.0};
  auto [w, fval] = kernels::nelder_mead(f, w0, 200);
  CHECK(std::abs(w[0] - 3.0) < 1e-4);
  CHECK(fval == f(w));
}

TEST_CASE("nelder_mead on a constant function returns an initial-simplex vertex") {
  auto f = [](std::span<const double>) { return 2.5; };
  const std::vector<double> w0{1.0, -1.0};
  auto [w, fval] = kernels::nelder_mead(f, w0, 25);
  CHECK(fval == 2.5);
  // every vertex the algorithm can produce is a combination of the initial ones,
  // but with a constant objective nothing improves: best stays vertex 0
  CHECK(w == w0);
}

TEST_CASE("nelder_mead improves the objective in 5 dimensions") {
  auto f = [](std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return s;
  };
  const std::vector<double> w0{1.0, -2.0, 0.5, 3.0, -1.5};
  auto [w, fval] = kernels::nelder_mead(f, w0, 500);
  CHECK(fval < f(w0));
}

TEST_CASE("nelder_mead best value never increases with more iterations") {
  auto f = [](std::span<const double> w) {
    return std::abs(w[0] - 1.0) + 0.5 * std::abs(w[1] + 2.0);
  };
  const std::vector<double> w0{4.0, 4.0};
  double prev = std::numeric_limits<double>::infinity();
  for (int iters : {1, 2, 5, 10, 50, 100}) {
    auto [w, fval] = kernels::nelder_mead(f, w0, iters);
    CHECK(fval <= prev + 1e-15);
    prev = fval;
  }
}

TEST_CASE("nelder_mead rejects a non-finite start") {
  auto f = [](std::span<const double> w) { return std::log(w[0]); };  // -inf at 0... nan below
  const std::vector<double> w0{-1.0};
  CHECK_THROWS_AS(kernels::nelder_mead(f, w0, 10), NumericError);
}

// -------------------------------------------------------------------- svm_fit

TEST_CASE("svm_fit separates a trivially separable 1-D problem") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(4, 2, {1.0, -5.0, 1.0, -5.5, 1.0, 5.0, 1.0, 5.5});
  data.y = {-1.0, -1.0, 1.0, 1.0};
  data.role = dmat::LabelRole::kSvmResponse;
  auto model = kernels::svm_fit(data, 500, solo);
  CHECK(kernels::svm_accuracy(model, data, solo) == 1.0);
}

TEST_CASE("svm_fit after one iteration is no worse than w = 0") {
  comm::SoloComm solo;
  GenSpec spec{Workload::kSvm, 60, 3, 8, GenMode::kPerRankStream};
  auto block = dmat::generate(spec, solo);
  auto model = kernels::svm_fit(block, 1, solo);
  CHECK(model.final_loss <= 60.0);
  CHECK(model.iterations_run == 1);
}

TEST_CASE("svm_fit final_loss equals the hinge loss of its weights") {
  comm::SoloComm solo;
  GenSpec spec{Workload::kSvm, 80, 4, 15, GenMode::kPerRankStream};
  auto block = dmat::generate(spec, solo);
  auto model = kernels::svm_fit(block, 40, solo);
  CHECK(model.final_loss == kernels::hinge_loss(model.weights, block.X, block.y, solo));
}

TEST_CASE("svm_fit weights agree between 1 and 4 ranks on replicated data") {
  GenSpec spec{Workload::kSvm, 400, 5, 29, GenMode::kReplicatedByRowIndex};
  comm::SoloComm solo;
  auto m1 = kernels::svm_fit(dmat::generate(spec, solo), 120, solo);
  kernels::SvmModel m4;
  comm::run_ranks(4, [&](comm::Communicator& c) {
    auto m = kernels::svm_fit(dmat::generate(spec, c), 120, c);
    if (c.rank() == 0) m4 = m;
  });
  REQUIRE(m1.weights.size() == m4.weights.size());
  for (std::size_t j = 0; j < m1.weights.size(); ++j) {
    CHECK(std::abs(m1.weights[j] - m4.weights[j]) <= 1e-10);
  }
}

TEST_CASE("svm_fit rejects labels outside {-1,+1}") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(2, 2, {1.0, 0.0, 1.0, 1.0});
  data.y = {0.0, 1.0};
  CHECK_THROWS_AS(kernels::svm_fit(data, 5, solo), std::invalid_argument);
}

// --------------------------------------------------------------- svm_accuracy

TEST_CASE("svm_accuracy is 1 when everything is labeled +1 on all-positive data") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(3, 1, {0.5, 1.5, 2.5});
  data.y = {1.0, 1.0, 1.0};
  kernels::SvmModel model;
  model.weights = {1.0};
  CHECK(kernels::svm_accuracy(model, data, solo) == 1.0);
}

TEST_CASE("svm_accuracy with w = 0 equals the fraction of +1 labels") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(4, 1, {1.0, 2.0, 3.0, 4.0});
  data.y = {1.0, -1.0, 1.0, -1.0};
  kernels::SvmModel model;
  model.weights = {0.0};  // sign(0) counts as +1
  CHECK(kernels::svm_accuracy(model, data, solo) == 0.5);
}

TEST_CASE("svm_accuracy hand case of two thirds") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(3, 1, {1.0, -1.0, 1.0});
  data.y = {1.0, 1.0, 1.0};
  kernels::SvmModel model;
  model.weights = {1.0};  // predictions {+,-,+} vs truth {+,+,+}
  const double acc = kernels::svm_accuracy(model, data, solo);
  CHECK(std::abs(acc - 2.0 / 3.0) <= 1e-15);
}

TEST_CASE("svm_accuracy rejects mismatched dimensions") {
  comm::SoloComm solo;
  dmat::LabeledBlock data;
  data.X = local_matrix(1, 2, {1.0, 1.0});
  data.y = {1.0};
  kernels::SvmModel model;
  model.weights = {1.0};
  CHECK_THROWS_AS(kernels::svm_accuracy(model, data, solo), std::invalid_argument);
}
