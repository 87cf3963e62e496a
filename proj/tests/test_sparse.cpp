#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memfsi/sparse.hpp>

#include <random>

using namespace memfsi;

namespace {

// dense tridiagonal solve, the oracle for the Laplacian test
Eigen::VectorXd thomas(Eigen::VectorXd a, Eigen::VectorXd b, Eigen::VectorXd c,
                       Eigen::VectorXd d) {
  const int n = static_cast<int>(b.size());
  for (int i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  Eigen::VectorXd x(n);
  x[n - 1] = d[n - 1] / b[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

}  // namespace

TEST_CASE("stencil matrix bookkeeping") {
  StencilMatrix m(4);
  m.add(0, 0, 1.0);
  m.add(1, 1, 2.0);
  m.add(1, 1, 0.5);   // duplicate merges
  m.add(2, 2, 0.0);   // exact zero is dropped
  m.add(2, 1, -1.0);
  m.add(3, 3, 1.0);
  m.compress();

  CHECK(m.row_cols(0).size() == 1);
  CHECK(m.row_vals(1)[0] == 2.5);
  CHECK(m.row_cols(2).size() == 1);  // only the -1 survives
  CHECK(m.row_cols(2)[0] == 1);

  Eigen::VectorXd x(4);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y = m.apply(x);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 5.0);
  CHECK(y[2] == -2.0);

  Eigen::VectorXd d = m.diagonal();
  CHECK(d[2] == 0.0);
  CHECK(d[1] == 2.5);
}

TEST_CASE("krylov on the identity converges immediately") {
  const int n = 20;
  StencilMatrix m(n);
  for (int i = 0; i < n; ++i) m.add(i, i, 1.0);
  m.compress();
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1, n);
  auto r = krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-12, 100);
  CHECK(r.iterations <= 1);
  CHECK((r.x - b).norm() < 1e-10);
}

TEST_CASE("zero right-hand side returns the zero vector") {
  StencilMatrix m(5);
  for (int i = 0; i < 5; ++i) m.add(i, i, 2.0);
  m.compress();
  auto r = krylov_solve(m, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), 1e-10, 100);
  CHECK(r.x.norm() == 0.0);
  CHECK(r.iterations == 0);
}

TEST_CASE("1d dirichlet laplacian matches the tridiagonal oracle") {
  const int n = 50;
  StencilMatrix m(n);
  for (int i = 0; i < n; ++i) {
    m.add(i, i, 2.0);
    if (i > 0) m.add(i, i - 1, -1.0);
    if (i + 1 < n) m.add(i, i + 1, -1.0);
  }
  m.compress();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-1, 1);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = dist(rng);

  Eigen::VectorXd want = thomas(Eigen::VectorXd::Constant(n, -1.0),
                                Eigen::VectorXd::Constant(n, 2.0),
                                Eigen::VectorXd::Constant(n, -1.0), b);

  for (auto method : {KrylovMethod::Gmres, KrylovMethod::BiCgStab}) {
    auto r = krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-10, 2000, method);
    CHECK((r.x - want).norm() < 1e-7 * want.norm());
  }
}

TEST_CASE("nonsymmetric convection-diffusion system solves and is deterministic") {
  const int n = 400;
  StencilMatrix m(n);
  const double h = 1.0 / (n + 1), nu = 0.05, c = 1.0;
  for (int i = 0; i < n; ++i) {
    m.add(i, i, 2 * nu / (h * h));
    if (i > 0) m.add(i, i - 1, -nu / (h * h) - c / (2 * h));
    if (i + 1 < n) m.add(i, i + 1, -nu / (h * h) + c / (2 * h));
  }
  m.compress();
  Eigen::VectorXd b = Eigen::VectorXd::Ones(n);

  auto r1 = krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-9, 2000);
  auto r2 = krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-9, 2000);
  CHECK((m.apply(r1.x) - b).norm() / b.norm() <= 1e-9);
  CHECK((r1.x - r2.x).norm() == 0.0);

  auto rb = krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-9, 4000, KrylovMethod::BiCgStab);
  CHECK((m.apply(rb.x) - b).norm() / b.norm() <= 1e-9);
}

TEST_CASE("non-convergence raises a solver error carrying the residual") {
  const int n = 30;
  StencilMatrix m(n);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1, 1);
  for (int i = 0; i < n; ++i) {
    m.add(i, i, 0.01);
    m.add(i, (i + 7) % n, dist(rng));
    m.add(i, (i + 13) % n, dist(rng));
  }
  m.compress();
  Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
  CHECK_THROWS_AS(static_cast<void>(krylov_solve(m, b, Eigen::VectorXd::Zero(n), 1e-14, 3)),
                  SolverError);
}
