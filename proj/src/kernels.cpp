#include "dabench/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dabench/errors.hpp"
#include "dabench/rng.hpp"

namespace dabench::kernels {

namespace {

double frobenius(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double off_diagonal_frobenius(const std::vector<double>& A, std::size_t p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (i != j) s += A[i * p + j] * A[i * p + j];
  return std::sqrt(s);
}

// tangent of the Jacobi rotation angle that annihilates a_pq
double jacobi_tangent(double app, double aqq, double apq) {
  const double theta = (aqq - app) / (2.0 * apq);
  if (std::abs(theta) > 1e154) return 1.0 / (2.0 * theta);  // avoid theta^2 overflow
  const double sign = theta >= 0.0 ? 1.0 : -1.0;
  return sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
}

}  // namespace

std::vector<double> symmetric_eigenvalues(std::span<const double> S, std::size_t p) {
  if (p == 0) throw std::invalid_argument("symmetric_eigenvalues: p must be >= 1");
  if (S.size() != p * p) throw std::invalid_argument("symmetric_eigenvalues: buffer is not p*p");

  double max_abs = 0.0;
  double max_asym = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      max_abs = std::max(max_abs, std::abs(S[i * p + j]));
      max_asym = std::max(max_asym, std::abs(S[i * p + j] - S[j * p + i]));
    }
  }
  if (max_asym > 1e-9 * std::max(max_abs, std::numeric_limits<double>::min())) {
    throw std::invalid_argument("symmetric_eigenvalues: input asymmetric beyond 1e-9 relative");
  }

  std::vector<double> A(S.begin(), S.end());
  const double scale = frobenius(A);
  std::vector<double> eigenvalues(p);
  if (scale == 0.0) return eigenvalues;  // zero matrix

  const double tol = 1e-11 * scale;
  constexpr int kMaxSweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_frobenius(A, p) <= tol) {
      converged = true;
      break;
    }
    for (std::size_t pi = 0; pi + 1 < p; ++pi) {
      for (std::size_t qi = pi + 1; qi < p; ++qi) {
        const double apq = A[pi * p + qi];
        if (apq == 0.0) continue;
        const double t = jacobi_tangent(A[pi * p + pi], A[qi * p + qi], apq);
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < p; ++k) {
          if (k == pi || k == qi) continue;
          const double akp = A[k * p + pi];
          const double akq = A[k * p + qi];
          A[k * p + pi] = A[pi * p + k] = c * akp - s * akq;
          A[k * p + qi] = A[qi * p + k] = s * akp + c * akq;
        }
        A[pi * p + pi] -= t * apq;
        A[qi * p + qi] += t * apq;
        A[pi * p + qi] = A[qi * p + pi] = 0.0;
      }
    }
  }
  if (!converged && off_diagonal_frobenius(A, p) > tol) {
    throw NumericError("symmetric_eigenvalues: no convergence after 100 sweeps, off-diagonal " +
                       std::to_string(off_diagonal_frobenius(A, p)));
  }

  for (std::size_t i = 0; i < p; ++i) eigenvalues[i] = A[i * p + i];
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  return eigenvalues;
}

PcaResult pca_sdev(const dmat::RowBlockMatrix& X, comm::Communicator& comm) {
  const auto C = dmat::covariance(X, comm);
  auto eigenvalues = symmetric_eigenvalues(C, X.ncols);

  PcaResult result;
  for (auto& ev : eigenvalues) {
    if (ev < -1e-10) {
      throw NumericError("pca_sdev: covariance eigenvalue " + std::to_string(ev) +
                         " below -1e-10");
    }
    if (ev < 0.0) ev = 0.0;
  }
  result.sdev_first = std::sqrt(eigenvalues.front());
  result.sdev_last = std::sqrt(eigenvalues.back());
  result.eigenvalues = std::move(eigenvalues);
  return result;
}

SvdResult svd_factor(std::span<const double> A, std::size_t m, std::size_t n) {
  if (m < n) throw std::invalid_argument("svd_factor: requires m >= n");
  if (A.size() != m * n) throw std::invalid_argument("svd_factor: buffer is not m*n");
  for (double v : A) {
    if (!std::isfinite(v)) throw std::invalid_argument("svd_factor: non-finite entry");
  }

  SvdResult out;
  out.m = m;
  out.n = n;
  out.u.assign(A.begin(), A.end());
  out.v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.v[i * n + i] = 1.0;

  auto col_dot = [&](const std::vector<double>& mat, std::size_t rows, std::size_t cols,
                     std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += mat[r * cols + a] * mat[r * cols + b];
    return s;
  };
  auto rotate_cols = [](std::vector<double>& mat, std::size_t rows, std::size_t cols,
                        std::size_t a, std::size_t b, double c, double s) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double va = mat[r * cols + a];
      const double vb = mat[r * cols + b];
      mat[r * cols + a] = c * va - s * vb;
      mat[r * cols + b] = s * va + c * vb;
    }
  };

  // One-sided Jacobi: orthogonalize the columns of U in place, accumulating
  // the rotations into V.
  constexpr int kMaxSweeps = 60;
  constexpr double kOrthTol = 1e-14;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = col_dot(out.u, m, n, i, i);
        const double beta = col_dot(out.u, m, n, j, j);
        const double g = col_dot(out.u, m, n, i, j);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(g) <= kOrthTol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double t = jacobi_tangent(alpha, beta, g);
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        rotate_cols(out.u, m, n, i, j, c, s);
        rotate_cols(out.v, n, n, i, j, c, s);
      }
    }
  }
  if (!converged) {
    throw NumericError("svd_factor: one-sided Jacobi did not converge in 60 sweeps");
  }

  out.s.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) out.s[j] = std::sqrt(col_dot(out.u, m, n, j, j));

  // descending order, stable over ties
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.s[a] > out.s[b]; });
  SvdResult sorted;
  sorted.m = m;
  sorted.n = n;
  sorted.s.resize(n);
  sorted.u.assign(m * n, 0.0);
  sorted.v.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    sorted.s[j] = out.s[src];
    for (std::size_t r = 0; r < m; ++r) sorted.u[r * n + j] = out.u[r * n + src];
    for (std::size_t r = 0; r < n; ++r) sorted.v[r * n + j] = out.v[r * n + src];
  }

  // normalize U columns; columns of zero singular value get an orthonormal fill
  const double s_max = sorted.s.empty() ? 0.0 : sorted.s.front();
  for (std::size_t j = 0; j < n; ++j) {
    if (sorted.s[j] > s_max * 1e-15 && sorted.s[j] > 0.0) {
      for (std::size_t r = 0; r < m; ++r) sorted.u[r * n + j] /= sorted.s[j];
      continue;
    }
    sorted.s[j] = 0.0;
    // Gram-Schmidt a standard basis vector against the columns so far
    for (std::size_t cand = 0; cand < m; ++cand) {
      std::vector<double> v(m, 0.0);
      v[cand] = 1.0;
      for (std::size_t prev = 0; prev < j; ++prev) {
        double proj = 0.0;
        for (std::size_t r = 0; r < m; ++r) proj += v[r] * sorted.u[r * n + prev];
        for (std::size_t r = 0; r < m; ++r) v[r] -= proj * sorted.u[r * n + prev];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.5) {
        for (std::size_t r = 0; r < m; ++r) sorted.u[r * n + j] = v[r] / norm;
        break;
      }
    }
  }
  return sorted;
}

KmeansResult kmeans_lloyd(const dmat::RowBlockMatrix& X, int k,
                          std::span<const double> init_centroids, int max_iter,
                          comm::Communicator& comm) {
  if (k < 1) throw std::invalid_argument("kmeans_lloyd: k must be >= 1");
  if (static_cast<std::size_t>(k) > X.global_nrows) {
    throw std::invalid_argument("kmeans_lloyd: k exceeds the global row count");
  }
  if (max_iter < 1) throw std::invalid_argument("kmeans_lloyd: max_iter must be >= 1");
  const std::size_t p = X.ncols;
  if (init_centroids.size() != static_cast<std::size_t>(k) * p) {
    throw std::invalid_argument("kmeans_lloyd: init centroid buffer is not k*ncols");
  }
  for (double v : init_centroids) {
    if (!std::isfinite(v)) throw std::invalid_argument("kmeans_lloyd: non-finite init centroid");
  }

  KmeansResult result;
  result.centroids.assign(init_centroids.begin(), init_centroids.end());
  result.labels.assign(X.local_nrows(), -1);

  const std::size_t kc = static_cast<std::size_t>(k);
  // One reduce per iteration: [cluster sums | cluster counts | changed | wcss]
  std::vector<double> reduce_buf(kc * p + kc + 2);

  for (int iter = 1; iter <= max_iter; ++iter) {
    std::fill(reduce_buf.begin(), reduce_buf.end(), 0.0);
    double* sums = reduce_buf.data();
    double* counts = reduce_buf.data() + kc * p;
    double& changed = reduce_buf[kc * p + kc];
    double& wcss = reduce_buf[kc * p + kc + 1];

    for (std::size_t r = 0; r < X.local_nrows(); ++r) {
      const double* row = X.row(r);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kc; ++c) {
        const double* centroid = result.centroids.data() + c * p;
        double d = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double diff = row[j] - centroid[j];
          d += diff * diff;
        }
        if (d < best_d) {  // strict: ties stay with the lowest index
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (result.labels[r] != best) {
        result.labels[r] = best;
        changed += 1.0;
      }
      wcss += best_d;
      double* sum = sums + static_cast<std::size_t>(best) * p;
      for (std::size_t j = 0; j < p; ++j) sum[j] += row[j];
      counts[static_cast<std::size_t>(best)] += 1.0;
    }

    const auto total = comm.allreduce_sum(reduce_buf);
    const double* gsums = total.data();
    const double* gcounts = total.data() + kc * p;
    for (std::size_t c = 0; c < kc; ++c) {
      if (gcounts[c] <= 0.0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < p; ++j) {
        result.centroids[c * p + j] = gsums[c * p + j] / gcounts[c];
      }
    }
    result.wcss_history.push_back(total[kc * p + kc + 1]);
    result.iterations_run = iter;
    if (total[kc * p + kc] == 0.0) break;  // no label changed anywhere
  }
  return result;
}

std::vector<double> kmeans_seeded_init(const dmat::RowBlockMatrix& X, int k, std::uint64_t seed,
                                       comm::Communicator& comm) {
  if (k < 1) throw std::invalid_argument("kmeans_seeded_init: k must be >= 1");
  if (static_cast<std::size_t>(k) > X.global_nrows) {
    throw std::invalid_argument("kmeans_seeded_init: k exceeds the global row count");
  }
  const auto indices = draw_distinct_indices(seed, static_cast<std::size_t>(k), X.global_nrows);
  std::vector<double> centroids(static_cast<std::size_t>(k) * X.ncols, 0.0);
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const std::size_t g = indices[c];
    if (g >= X.row_offset && g < X.row_offset + X.local_nrows()) {
      const double* row = X.row(g - X.row_offset);
      std::copy(row, row + X.ncols, centroids.begin() + static_cast<std::ptrdiff_t>(c * X.ncols));
    }
  }
  return comm.allreduce_sum(centroids);  // each drawn row is owned by exactly one rank
}

double hinge_loss(std::span<const double> w, const dmat::RowBlockMatrix& X,
                  std::span<const double> y, comm::Communicator& comm) {
  if (w.size() != X.ncols) throw std::invalid_argument("hinge_loss: len(w) != ncols");
  if (y.size() != X.local_nrows()) throw std::invalid_argument("hinge_loss: labels != local rows");
  double local = 0.0;
  for (std::size_t r = 0; r < X.local_nrows(); ++r) {
    const double* row = X.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < X.ncols; ++j) dot += row[j] * w[j];
    local += std::max(0.0, 1.0 - y[r] * dot);
  }
  return comm.allreduce_sum_scalar(local);
}

std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(std::span<const double>)>& f, std::span<const double> w0,
    int iters, const NmParams& params) {
  if (iters < 1) throw std::invalid_argument("nelder_mead: iters must be >= 1");
  if (w0.empty()) throw std::invalid_argument("nelder_mead: empty start point");
  if (!(params.alpha > 0.0) || !(params.gamma > 1.0) || !(params.rho > 0.0) ||
      !(params.rho < 1.0) || !(params.sigma > 0.0) || !(params.sigma < 1.0)) {
    throw std::invalid_argument("nelder_mead: coefficients out of range");
  }

  const std::size_t d = w0.size();
  std::vector<std::vector<double>> verts(d + 1, std::vector<double>(w0.begin(), w0.end()));
  for (std::size_t i = 0; i < d; ++i) verts[i + 1][i] += params.simplex_step;

  std::vector<double> fv(d + 1);
  for (std::size_t i = 0; i <= d; ++i) {
    fv[i] = f(verts[i]);
    if (!std::isfinite(fv[i])) {
      throw NumericError("nelder_mead: objective non-finite on the initial simplex");
    }
  }

  std::vector<std::size_t> order(d + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> vs(d + 1);
    std::vector<double> fs(d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
      vs[i] = std::move(verts[order[i]]);
      fs[i] = fv[order[i]];
    }
    verts = std::move(vs);
    fv = std::move(fs);
  };

  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  for (int it = 0; it < iters; ++it) {
    sort_simplex();
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += verts[i][j];
      centroid[j] = s / static_cast<double>(d);
    }
    for (std::size_t j = 0; j < d; ++j) xr[j] = centroid[j] + params.alpha * (centroid[j] - verts[d][j]);
    const double fr = f(xr);

    if (fr < fv[0]) {
      for (std::size_t j = 0; j < d; ++j) xe[j] = centroid[j] + params.gamma * (xr[j] - centroid[j]);
      const double fe = f(xe);
      if (fe < fr) {
        verts[d] = xe;
        fv[d] = fe;
      } else {
        verts[d] = xr;
        fv[d] = fr;
      }
      continue;
    }
    if (fr < fv[d - 1]) {
      verts[d] = xr;
      fv[d] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < fv[d]) {
      for (std::size_t j = 0; j < d; ++j) xc[j] = centroid[j] + params.rho * (xr[j] - centroid[j]);
      const double fc = f(xc);
      if (fc <= fr) {
        verts[d] = xc;
        fv[d] = fc;
      } else {
        shrink = true;
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) xc[j] = centroid[j] - params.rho * (centroid[j] - verts[d][j]);
      const double fc = f(xc);
      if (fc < fv[d]) {
        verts[d] = xc;
        fv[d] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 1; i <= d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          verts[i][j] = verts[0][j] + params.sigma * (verts[i][j] - verts[0][j]);
        }
        fv[i] = f(verts[i]);
      }
    }
  }
  sort_simplex();
  return {verts[0], fv[0]};
}

SvmModel svm_fit(const dmat::LabeledBlock& data, int iters, comm::Communicator& comm) {
  for (double v : data.y) {
    if (v != 1.0 && v != -1.0) {
      throw std::invalid_argument("svm_fit: labels must be -1 or +1");
    }
  }
  const std::vector<double> w0(data.X.ncols, 0.0);
  auto objective = [&](std::span<const double> w) {
    return hinge_loss(w, data.X, data.y, comm);
  };
  auto [weights, fval] = nelder_mead(objective, w0, iters);

  SvmModel model;
  model.weights = std::move(weights);
  model.final_loss = fval;
  model.iterations_run = iters;
  return model;
}

double svm_accuracy(const SvmModel& model, const dmat::LabeledBlock& data,
                    comm::Communicator& comm) {
  if (model.weights.size() != data.X.ncols) {
    throw std::invalid_argument("svm_accuracy: weight/column mismatch");
  }
  if (data.y.size() != data.X.local_nrows()) {
    throw std::invalid_argument("svm_accuracy: labels != local rows");
  }
  double correct = 0.0;
  for (std::size_t r = 0; r < data.X.local_nrows(); ++r) {
    const double* row = data.X.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < data.X.ncols; ++j) dot += row[j] * model.weights[j];
    const double pred = dot >= 0.0 ? 1.0 : -1.0;  // sign(0) counts as +1
    if (pred == data.y[r]) correct += 1.0;
  }
  const double total = comm.allreduce_sum_scalar(correct);
  return total / static_cast<double>(data.X.global_nrows);
}

}  // namespace dabench::kernels
