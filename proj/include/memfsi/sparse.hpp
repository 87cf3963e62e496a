// Stencil-based sparse matrix and the in-artifact Krylov solvers (restarted GMRES
// with Jacobi preconditioning, BiCGStab fallback). Reductions are fixed-order so
// results are reproducible run to run.
#pragma once

#include <Eigen/Dense>

#include <memfsi/grid.hpp>

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace memfsi {

class StencilMatrix {
public:
  explicit StencilMatrix(int n) : n_(n), build_(n) {}

  int n() const { return n_; }

  // Exact zeros are dropped: terms carrying a vanished physical factor leave the
  // sparsity pattern (and therefore the assembled operator) untouched.
  void add(int row, int col, double coeff) {
    if (coeff == 0.0) return;
    build_[row].emplace_back(col, coeff);
  }

  void compress() {
    row_ptr_.assign(n_ + 1, 0);
    std::size_t total = 0;
    for (auto& r : build_) {
      std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.first < b.first; });
      std::size_t out = 0;
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (out > 0 && r[out - 1].first == r[k].first) {
          r[out - 1].second += r[k].second;
        } else {
          r[out++] = r[k];
        }
      }
      r.resize(out);
      total += out;
    }
    cols_.resize(total);
    vals_.resize(total);
    std::size_t pos = 0;
    for (int i = 0; i < n_; ++i) {
      row_ptr_[i] = pos;
      for (auto& [c, v] : build_[i]) {
        cols_[pos] = c;
        vals_[pos] = v;
        ++pos;
      }
    }
    row_ptr_[n_] = pos;
    build_.clear();
    build_.shrink_to_fit();
    compressed_ = true;
  }

  bool compressed() const { return compressed_; }

  std::span<const int> row_cols(int i) const {
    return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_vals(int i) const {
    return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(n_);
    parallel_for_rows(n_, [&](int i) {
      double s = 0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
      y[i] = s;
    });
    return y;
  }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < n_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        if (cols_[k] == i) d[i] += vals_[k];
    return d;
  }

private:
  int n_;
  bool compressed_ = false;
  std::vector<std::vector<std::pair<int, double>>> build_;
  std::vector<std::size_t> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct SparseSystem {
  StencilMatrix matrix;
  Eigen::VectorXd rhs;
};

class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual, int iters)
      : std::runtime_error(what), residual(residual), iterations(iters) {}
  double residual;
  int iterations;
};

struct KrylovResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double rel_residual = 0;
};

enum class KrylovMethod { Gmres, BiCgStab };

namespace detail {

inline Eigen::VectorXd jacobi_weights(const StencilMatrix& a) {
  Eigen::VectorXd d = a.diagonal();
  for (int i = 0; i < d.size(); ++i) d[i] = d[i] != 0.0 ? 1.0 / d[i] : 1.0;
  return d;
}

// right-preconditioned restarted GMRES; residual reported against ||b||
inline KrylovResult gmres(const StencilMatrix& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& guess, double tol, int max_iter, int restart) {
  const int n = a.n();
  const Eigen::VectorXd minv = jacobi_weights(a);
  const double bnorm = b.norm();
  KrylovResult res;
  res.x = guess;
  if (bnorm == 0.0) {
    res.x.setZero();
    return res;
  }

  const int m = restart;
  Eigen::MatrixXd v(n, m + 1), h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);

  while (res.iterations < max_iter) {
    Eigen::VectorXd r = b - a.apply(res.x);
    double beta = r.norm();
    res.rel_residual = beta / bnorm;
    if (res.rel_residual <= tol) return res;
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;

    int k = 0;
    for (; k < m && res.iterations < max_iter; ++k, ++res.iterations) {
      Eigen::VectorXd w = a.apply(minv.cwiseProduct(v.col(k)));
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v.col(i));
        w -= h(i, k) * v.col(i);
      }
      h(k + 1, k) = w.norm();
      const bool breakdown = h(k + 1, k) < 1e-14 * beta;
      if (!breakdown) v.col(k + 1) = w / h(k + 1, k);

      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = denom != 0.0 ? h(k, k) / denom : 1.0;
      sn[k] = denom != 0.0 ? h(k + 1, k) / denom : 0.0;
      h(k, k) = denom;
      h(k + 1, k) = 0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];

      if (breakdown || std::abs(g[k + 1]) / bnorm <= tol) {
        ++k;
        ++res.iterations;
        break;
      }
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int jj = i + 1; jj < k; ++jj) s -= h(i, jj) * y[jj];
      y[i] = s / h(i, i);
    }
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) dx += y[i] * v.col(i);
    res.x += minv.cwiseProduct(dx);

    res.rel_residual = (b - a.apply(res.x)).norm() / bnorm;
    if (res.rel_residual <= tol) return res;
  }
  throw SolverError("gmres: no convergence, residual " + format_g17(res.rel_residual) + " after " +
                        std::to_string(res.iterations) + " iterations",
                    res.rel_residual, res.iterations);
}

inline KrylovResult bicgstab(const StencilMatrix& a, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& guess, double tol, int max_iter) {
  const Eigen::VectorXd minv = jacobi_weights(a);
  const double bnorm = b.norm();
  KrylovResult res;
  res.x = guess;
  if (bnorm == 0.0) {
    res.x.setZero();
    return res;
  }

  Eigen::VectorXd r = b - a.apply(res.x);
  Eigen::VectorXd r0 = r;
  double r0_norm = r0.norm();
  double rho = 1, alpha = 1, omega = 1;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(a.n()), v = p;
  // a degenerate shadow inner product restarts the recursion from the current
  // iterate; only stagnation through max_iter remains an error
  auto restart_shadow = [&] {
    r0 = r;
    r0_norm = r0.norm();
    rho = alpha = omega = 1;
    p.setZero();
    v.setZero();
  };

  for (; res.iterations < max_iter; ++res.iterations) {
    res.rel_residual = r.norm() / bnorm;
    if (res.rel_residual <= tol) return res;
    double rho_new = r0.dot(r);
    if (std::abs(rho_new) <= 1e-28 * r0_norm * r.norm()) {
      restart_shadow();
      rho_new = r0.dot(r);
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    p = r + beta * (p - omega * v);
    const Eigen::VectorXd ph = minv.cwiseProduct(p);
    v = a.apply(ph);
    const double r0v = r0.dot(v);
    if (std::abs(r0v) <= 1e-28 * r0_norm * v.norm()) {
      restart_shadow();
      continue;
    }
    alpha = rho / r0v;
    const Eigen::VectorXd s = r - alpha * v;
    if (s.norm() / bnorm <= tol) {
      res.x += alpha * ph;
      res.rel_residual = s.norm() / bnorm;
      return res;
    }
    const Eigen::VectorXd sh = minv.cwiseProduct(s);
    const Eigen::VectorXd t = a.apply(sh);
    const double tt = t.dot(t);
    if (tt == 0.0) {
      res.x += alpha * ph;
      r = s;
      restart_shadow();
      continue;
    }
    omega = t.dot(s) / tt;
    res.x += alpha * ph + omega * sh;
    r = s - omega * t;
  }
  throw SolverError("bicgstab: no convergence, residual " + format_g17(res.rel_residual) +
                        " after " + std::to_string(res.iterations) + " iterations",
                    res.rel_residual, res.iterations);
}

}  // namespace detail

inline KrylovResult krylov_solve(const StencilMatrix& a, const Eigen::VectorXd& rhs,
                                 const Eigen::VectorXd& guess, double tol, int max_iter,
                                 KrylovMethod method = KrylovMethod::Gmres) {
  if (!a.compressed()) throw std::logic_error("krylov_solve: matrix not compressed");
  return method == KrylovMethod::Gmres ? detail::gmres(a, rhs, guess, tol, max_iter, 30)
                                       : detail::bicgstab(a, rhs, guess, tol, max_iter);
}

}  // namespace memfsi
