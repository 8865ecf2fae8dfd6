#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dabench/comm.hpp"
#include "dabench/dmat.hpp"

namespace dabench::kernels {

struct PcaResult {
  double sdev_first = 0.0;
  double sdev_last = 0.0;
  std::vector<double> eigenvalues;  // descending
};

struct KmeansResult {
  std::vector<double> centroids;  // row-major k x ncols
  std::vector<int> labels;        // local rows, cluster ids in [0, k)
  int iterations_run = 0;
  std::vector<double> wcss_history;  // global within-cluster sum of squares per iteration
};

struct SvmModel {
  std::vector<double> weights;  // index 0 = intercept weight
  double final_loss = 0.0;
  int iterations_run = 0;
};

struct NmParams {
  double alpha = 1.0;         // reflection
  double gamma = 2.0;         // expansion
  double rho = 0.5;           // contraction
  double sigma = 0.5;         // shrink
  double simplex_step = 0.1;  // initial vertex displacement
};

struct SvdResult {
  std::vector<double> u;  // row-major m x n
  std::vector<double> s;  // n singular values, descending
  std::vector<double> v;  // row-major n x n
  std::size_t m = 0;
  std::size_t n = 0;
};

/// All real eigenvalues of a symmetric p x p matrix, descending, via cyclic
/// Jacobi rotations (off-diagonal Frobenius tolerance 1e-11 relative, 100 sweeps).
std::vector<double> symmetric_eigenvalues(std::span<const double> S, std::size_t p);

/// Square roots of the covariance eigenvalues; the exact method, no
/// approximations. Identical result on every rank.
PcaResult pca_sdev(const dmat::RowBlockMatrix& X, comm::Communicator& comm);

/// Thin SVD A = U diag(s) V^T of a dense m x n matrix, m >= n, by one-sided
/// Jacobi. Columns of U belonging to zero singular values are completed to an
/// orthonormal set.
SvdResult svd_factor(std::span<const double> A, std::size_t m, std::size_t n);

/// Lloyd's algorithm: nearest-centroid assignment (ties to the lowest cluster
/// index) alternated with global mean updates. Stops after max_iter iterations
/// or when no label changes globally; empty clusters keep their previous
/// centroid. Centroids are identical on every rank.
KmeansResult kmeans_lloyd(const dmat::RowBlockMatrix& X, int k,
                          std::span<const double> init_centroids, int max_iter,
                          comm::Communicator& comm);

/// Initial centroids for a seeded run: k distinct global row indices drawn from
/// the counter stream keyed by `seed`, resolved to rows across ranks.
std::vector<double> kmeans_seeded_init(const dmat::RowBlockMatrix& X, int k, std::uint64_t seed,
                                       comm::Communicator& comm);

/// Global hinge loss sum_i max(0, 1 - y_i * (x_i . w)); identical on every rank.
double hinge_loss(std::span<const double> w, const dmat::RowBlockMatrix& X,
                  std::span<const double> y, comm::Communicator& comm);

/// Runs exactly `iters` simplex iterations from the simplex {w0, w0 + step e_i}
/// and returns the best vertex with its objective value.
std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(std::span<const double>)>& f, std::span<const double> w0,
    int iters, const NmParams& params = {});

/// Hinge-loss SVM trained by Nelder-Mead from w = 0 for exactly `iters`
/// iterations (no convergence stop). Weights identical on every rank.
SvmModel svm_fit(const dmat::LabeledBlock& data, int iters, comm::Communicator& comm);

/// Global fraction of rows with sign(x . w) == y, where sign(0) counts as +1.
double svm_accuracy(const SvmModel& model, const dmat::LabeledBlock& data,
                    comm::Communicator& comm);

}  // namespace dabench::kernels
