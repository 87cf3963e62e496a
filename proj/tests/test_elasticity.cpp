#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memfsi/elasticity.hpp>

#include <random>

using namespace memfsi;
using M2 = Mat2<double>;
using V2 = Vec2<double>;

namespace {

// extensional flow u = (a x, -a y) stretching an initially flat-ish membrane
// y = g(x); everything below is closed form.
struct Extensional {
  double a = 0.3;
  double g0 = 0.55, gA = 0.1, gk = 2.0;
  double K = 3.0;

  double g(double x) const { return g0 + gA * std::sin(gk * x); }
  double gp(double x) const { return gA * gk * std::cos(gk * x); }

  double y1(double x, double t) const { return x * std::exp(-a * t); }
  double y2(double y, double t) const { return y * std::exp(a * t); }
  double phi(double x, double y, double t) const { return y2(y, t) - g(y1(x, t)); }
  double phi0_grad_mag(double x, double) const { return std::hypot(gp(x), 1.0); }

  V2 grad_phi(double x, double /*y*/, double t) const {
    V2 r;
    r << -gp(y1(x, t)) * std::exp(-a * t), std::exp(a * t);
    return r;
  }
  V2 normal(double x, double y, double t) const { return grad_phi(x, y, t).normalized(); }
  double z(double x, double t) const {
    const double s = gp(y1(x, t));
    const double e2 = std::exp(2 * a * t);
    return std::sqrt((s * s / e2 + e2) / (1 + s * s));
  }
  M2 sigma(double x, double y, double t) const {
    const V2 n = normal(x, y, t);
    return stress_matrix(evan_skalak(z(x, t), K).f, n);
  }
};

M2 random_spd_grad(std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-0.4, 0.4);
  M2 m;
  m << 1 + d(rng), d(rng), d(rng), 1 + d(rng);
  return m;
}

V2 random_unit(std::mt19937& rng) {
  std::uniform_real_distribution<double> d(0, 2 * std::numbers::pi);
  const double th = d(rng);
  V2 n;
  n << std::cos(th), std::sin(th);
  return n;
}

}  // namespace

TEST_CASE("grad Y from the backward map") {
  auto g = GridSpec::make(32, 32, 0, 1, 0, 1);

  SUBCASE("identity map gives the identity tensor exactly") {
    BackwardMap bm(g.nx, g.ny);
    auto gy = compute_grad_y(g, bm);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        CHECK(gy.t11(i, j) == 1.0);
        CHECK(gy.t12(i, j) == 0.0);
        CHECK(gy.t21(i, j) == 0.0);
        CHECK(gy.t22(i, j) == 1.0);
      }
  }

  SUBCASE("linear contraction Y = (x/2, y)") {
    BackwardMap bm(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) bm.wx(i, j) = -0.5 * g.xc(i);
    auto gy = compute_grad_y(g, bm);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        CHECK(gy.t11(i, j) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(gy.t22(i, j) == 1.0);
      }
  }

  SUBCASE("sheared map Y = (x + 0.1 sin y, y) to second order") {
    BackwardMap bm(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) bm.wx(i, j) = 0.1 * std::sin(g.yc(j));
    auto gy = compute_grad_y(g, bm);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        CHECK(gy.t11(i, j) == 1.0);
        CHECK(std::abs(gy.t12(i, j) - 0.1 * std::cos(g.yc(j))) < 1e-4);
      }
  }
}

TEST_CASE("B tensor") {
  CHECK((compute_b(M2(M2::Identity())) - M2::Identity()).norm() == 0.0);

  M2 gy;
  gy << 0.5, 0, 0, 1;
  M2 b = compute_b(gy);
  CHECK(b(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(b(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b(0, 1) == 0.0);

  std::mt19937 rng(3);
  for (int k = 0; k < 50; ++k) {
    M2 m = random_spd_grad(rng);
    M2 bb = compute_b(m);
    CHECK(std::abs(bb(0, 1) - bb(1, 0)) < 1e-14 * bb.norm());
    CHECK(bb.trace() > 0);
    CHECK(bb.determinant() > 0);
  }
}

TEST_CASE("surface tensor") {
  std::mt19937 rng(5);

  SUBCASE("B = I projects onto the tangent") {
    for (int k = 0; k < 20; ++k) {
      V2 n = random_unit(rng);
      M2 a = compute_a(M2(M2::Identity()), n);
      CHECK((a - (M2::Identity() - n * n.transpose())).norm() < 1e-14);
    }
  }

  SUBCASE("hand value") {
    M2 b;
    b << 4, 0, 0, 1;
    V2 n;
    n << 0, 1;
    M2 a = compute_a(b, n);
    CHECK(a(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(std::abs(a(1, 1)) < 1e-14);
    CHECK(std::abs(a(0, 1)) < 1e-14);
  }

  SUBCASE("n is the null vector and A is rank deficient") {
    for (int k = 0; k < 50; ++k) {
      M2 b = compute_b(random_spd_grad(rng));
      V2 n = random_unit(rng);
      M2 a = compute_a(b, n);
      CHECK((a * n).norm() < 1e-10 * a.norm());
      CHECK(std::abs(a.determinant()) < 1e-10 * a.norm() * a.norm());
      CHECK(std::abs(a(0, 1) - a(1, 0)) < 1e-14 * a.norm());
    }
  }
}

TEST_CASE("area variation Z") {
  SUBCASE("identity gives one") {
    V2 n;
    n << 0.6, 0.8;
    CHECK(compute_z(compute_a(M2(M2::Identity()), n)) == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("hand value and Cayley-Hamilton cross-check") {
    M2 gy;
    gy << 0.5, 0, 0, 1;
    M2 b = compute_b(gy);
    V2 n;
    n << 0, 1;
    M2 a = compute_a(b, n);
    CHECK(a.trace() == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(compute_z(a) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(a.trace() == doctest::Approx(b.determinant() / (b * n).dot(n)).epsilon(1e-12));
  }

  SUBCASE("trace equals det(B)/((Bn).n) on random inputs") {
    std::mt19937 rng(7);
    for (int k = 0; k < 50; ++k) {
      M2 b = compute_b(random_spd_grad(rng));
      V2 n = random_unit(rng);
      M2 a = compute_a(b, n);
      CHECK(a.trace() == doctest::Approx(b.determinant() / (b * n).dot(n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("dual Z formulas agree at second order on a manufactured deformation") {
  Extensional mf;
  const double t = 0.4;

  auto max_err = [&](int n) {
    auto g = GridSpec::make(n, n, 0, 1, 0, 1);
    BackwardMap bm(g.nx, g.ny);
    CellField phi(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) {
        bm.wx(i, j) = mf.y1(g.xc(i), t) - g.xc(i);
        bm.wy(i, j) = mf.y2(g.yc(j), t) - g.yc(j);
        phi(i, j) = mf.phi(g.xc(i), g.yc(j), t);
      }
    auto gy = compute_grad_y(g, bm);
    auto nrm = compute_normals(g, phi);
    auto z_alt = compute_z_alt(g, phi, bm, gy,
                               [&](double x, double y) { return mf.phi0_grad_mag(x, y); });
    const double eps = 2 * g.dx;
    double e_pair = 0, e_exact = 0;
    for (int j = 3; j < g.ny - 3; ++j)
      for (int i = 3; i < g.nx - 3; ++i) {
        if (std::abs(phi(i, j)) > 3 * eps) continue;
        V2 nv;
        nv << nrm.nx(i, j), nrm.ny(i, j);
        const double z = compute_z(compute_a(compute_b(gy.at(i, j)), nv));
        e_pair = std::max(e_pair, std::abs(z - z_alt(i, j)));
        e_exact = std::max(e_exact, std::abs(z - mf.z(g.xc(i), t)));
      }
    return std::pair{e_pair, e_exact};
  };

  auto [p32, x32] = max_err(32);
  auto [p64, x64] = max_err(64);
  CHECK(std::log2(p32 / p64) > 1.7);
  CHECK(std::log2(x32 / x64) > 1.7);
  CHECK(x64 < 1e-3);
}

TEST_CASE("Evan-Skalak law") {
  CHECK(evan_skalak(1.0, 5.0).f == 0.0);
  auto [f1, fp1] = evan_skalak(2.0, 1.0);
  CHECK(f1 == 2.0);
  CHECK(fp1 == 3.0);
  auto [f2, fp2] = evan_skalak(0.5, 4.0);
  CHECK(f2 == -1.0);
  CHECK(fp2 == 0.0);
}

TEST_CASE("membrane stress") {
  V2 n;
  n << 0, 1;
  CHECK(stress_matrix(evan_skalak(1.0, 3.0).f, n).norm() == 0.0);
  M2 s = stress_matrix(evan_skalak(2.0, 1.0).f, n);
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(s(1, 1)) < 1e-14);

  std::mt19937 rng(11);
  for (int k = 0; k < 30; ++k) {
    V2 m = random_unit(rng);
    M2 sig = stress_matrix(evan_skalak(1.7, 2.5).f, m);
    CHECK((sig * m).norm() < 1e-12 * (1 + sig.norm()));
    CHECK(std::abs(sig(0, 1) - sig(1, 0)) < 1e-14);
  }
}

TEST_CASE("elastic force at faces") {
  auto g = GridSpec::make(24, 20, 0, 1, 0, 1);
  const double eps = 2 * g.dx;

  SUBCASE("zero and constant stress give zero force") {
    SymTensorField sig(g.nx, g.ny);
    CellField phi(g.nx, g.ny);  // phi = 0: the delta is 1/eps everywhere
    auto f0 = elastic_force(g, sig, phi, eps);
    CHECK(f0.max_abs_interior() == 0.0);
    sig.xx.set_constant(3.7);
    sig.xy.set_constant(-1.2);
    sig.yy.set_constant(0.4);
    auto fc = elastic_force(g, sig, phi, eps);
    CHECK(fc.max_abs_interior() == 0.0);
  }

  SUBCASE("linear stress sigma = diag(x, 0) gives F_x = 1/eps") {
    SymTensorField sig(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) sig.xx(i, j) = g.xc(i);
    CellField phi(g.nx, g.ny);
    auto f = elastic_force(g, sig, phi, eps);
    for (int j = 0; j < g.ny; ++j)
      for (int I = 1; I < g.nx; ++I)
        CHECK(f.u(I, j) == doctest::Approx(1.0 / eps).epsilon(1e-12));
    for (int J = 1; J < g.ny; ++J)
      for (int i = 0; i < g.nx; ++i) CHECK(f.v(i, J) == 0.0);
  }

  SUBCASE("force vanishes outside the delta support") {
    SymTensorField sig(g.nx, g.ny);
    sig.xx.fill_interior([&](int i, int) { return g.xc(i) * g.xc(i); });
    CellField phi(g.nx, g.ny, 10.0);  // far from the interface
    auto f = elastic_force(g, sig, phi, eps);
    CHECK(f.max_abs_interior() == 0.0);
  }
}

TEST_CASE("stress evolution right-hand side") {
  const double K = 1.0;

  SUBCASE("no flow, rigid translation") {
    V2 n;
    n << 0, 1;
    CHECK(stress_evolution_rhs(M2(M2::Zero()), n, 2.0, K).norm() == 0.0);
  }

  SUBCASE("frozen shear example evaluates to zero") {
    M2 gu;
    gu << 0, 1, 0, 0;
    V2 n;
    n << 0, 1;
    M2 rhs = stress_evolution_rhs(gu, n, 2.0, K);
    CHECK(rhs.norm() < 1e-14);
  }

  SUBCASE("matches an independent component-wise oracle on random inputs") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int k = 0; k < 50; ++k) {
      M2 gu;
      gu << d(rng), d(rng), d(rng), d(rng);
      V2 n = random_unit(rng);
      const double z = 1.0 + 0.8 * std::abs(d(rng));
      const double Kk = 0.5 + std::abs(d(rng));
      // oracle: raw index loops, no matrix algebra shared with the implementation
      const double f = Kk * (z - 1) * z, fp = Kk * (2 * z - 1);
      double C[2][2], N[2][2];
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          N[p][q] = n(p) * n(q);
          C[p][q] = (p == q ? 1.0 : 0.0) - N[p][q];
        }
      double guC = 0, gunn = 0;
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          guC += gu(p, q) * C[p][q];
          gunn += gu(p, q) * n(q) * n(p);
        }
      M2 want;
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          double t1 = fp * z * guC * C[p][q];
          double t2 = 0;
          for (int r = 0; r < 2; ++r) t2 += gu(r, p) * N[r][q] + N[p][r] * gu(r, q);
          want(p, q) = t1 + f * (t2 - 2 * gunn * N[p][q]);
        }
      CHECK((stress_evolution_rhs(gu, n, z, Kk) - want).norm() < 1e-12);
    }
  }
}

TEST_CASE("T operator") {
  SUBCASE("zero velocity gradient") {
    V2 n;
    n << 1, 0;
    CHECK(t_operator(1.5, n, M2(M2::Zero()), 2.0).norm() == 0.0);
  }

  SUBCASE("hand value for plane strain") {
    M2 gu;
    gu << 1, 0, 0, -1;
    V2 n;
    n << 0, 1;
    M2 t = t_operator(2.0, n, gu, 1.0);
    CHECK(t(0, 0) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(t(1, 1) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(std::abs(t(0, 1)) < 1e-14);
    CHECK(std::abs(t(1, 0)) < 1e-14);
  }

  SUBCASE("decomposition rhs = T + f (gu^T N + N gu)") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int k = 0; k < 50; ++k) {
      M2 gu;
      gu << d(rng), d(rng), d(rng), d(rng);
      V2 n = random_unit(rng);
      const double z = 1.0 + 0.6 * std::abs(d(rng)), K = 0.7 + std::abs(d(rng));
      const double f = evan_skalak(z, K).f;
      M2 nn = n * n.transpose();
      M2 lhs = stress_evolution_rhs(gu, n, z, K);
      M2 rhs = t_operator(z, n, gu, K) + f * (gu.transpose() * nn + nn * gu);
      CHECK((lhs - rhs).norm() < 1e-12);
    }
  }
}

TEST_CASE("undeformed initial state carries no stress") {
  auto g = GridSpec::make(48, 48, -1, 1, -1, 1);
  BackwardMap bm(g.nx, g.ny);
  CellField phi(g.nx, g.ny);
  phi.fill_interior([&](int i, int j) { return std::hypot(g.xc(i), g.yc(j)) - 0.5; });
  fill_ghosts(phi, BoundarySpec::all_zero_gradient());
  auto gy = compute_grad_y(g, bm);
  auto nrm = compute_normals(g, phi);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      V2 n;
      n << nrm.nx(i, j), nrm.ny(i, j);
      const double z = compute_z(compute_a(compute_b(gy.at(i, j)), n));
      CHECK(std::abs(z - 1.0) < 1e-14);
      CHECK(stress_matrix(evan_skalak(z, 100.0).f, n).norm() < 1e-11);
    }
}

TEST_CASE("Z evolution residual") {
  SUBCASE("steady state with no flow") {
    auto g = GridSpec::make(16, 16, 0, 1, 0, 1);
    CellField z(g.nx, g.ny, 1.3);
    FaceVectorField vel(g.nx, g.ny);
    NormalField n{CellField(g.nx, g.ny, 0.0), CellField(g.nx, g.ny, 1.0)};
    auto r = verify_z_evolution(g, z, z, 0.1, vel, n);
    CHECK(r.max_abs_interior() == 0.0);
  }

  SUBCASE("rigid rotation leaves Z alone") {
    auto g = GridSpec::make(32, 32, -1, 1, -1, 1);
    CellField phi(g.nx, g.ny);
    phi.fill_interior([&](int i, int j) { return std::hypot(g.xc(i), g.yc(j)) - 0.5; });
    fill_ghosts(phi, BoundarySpec::all_zero_gradient());
    auto n = compute_normals(g, phi);
    CellField z(g.nx, g.ny, 1.0);
    FaceVectorField vel(g.nx, g.ny);
    const double om = 0.8;
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int I = -kGhost; I <= g.nx + kGhost; ++I) vel.u(I, j) = -om * g.yc(j);
    for (int J = -kGhost; J <= g.ny + kGhost; ++J)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) vel.v(i, J) = om * g.xc(i);
    auto r = verify_z_evolution(g, z, z, 0.05, vel, n);
    CHECK(r.max_abs_interior() < 1e-10);
  }

  SUBCASE("uniform extension matches the exponential oracle") {
    auto g = GridSpec::make(32, 32, 0, 1, 0, 1);
    const double a = 0.4, dt = 1e-3, t = 0.2, z0 = 1.0;
    CellField z_old(g.nx, g.ny, z0 * std::exp(a * t));
    CellField z_new(g.nx, g.ny, z0 * std::exp(a * (t + dt)));
    FaceVectorField vel(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int I = -kGhost; I <= g.nx + kGhost; ++I) vel.u(I, j) = a * g.xf(I);
    for (int J = -kGhost; J <= g.ny + kGhost; ++J)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) vel.v(i, J) = -a * g.yf(J);
    NormalField n{CellField(g.nx, g.ny, 0.0), CellField(g.nx, g.ny, 1.0)};
    auto r = verify_z_evolution(g, z_old, z_new, dt, vel, n);
    CHECK(r.max_abs_interior() < 1e-5);
  }
}

TEST_CASE("discrete consistency of the stress evolution under manufactured kinematics") {
  Extensional mf;
  const double t = 0.3;

  auto residual = [&](int ncell, double h) {
    auto g = GridSpec::make(ncell, ncell, 0, 1, 0, 1);
    const double eps = 2 * g.dx;
    CellField phi(g.nx, g.ny);
    SymTensorField s_old(g.nx, g.ny), s_new(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) {
        phi(i, j) = mf.phi(g.xc(i), g.yc(j), t);
        s_old.set(i, j, mf.sigma(g.xc(i), g.yc(j), t));
        s_new.set(i, j, mf.sigma(g.xc(i), g.yc(j), t + h));
      }
    FaceVectorField vel(g.nx, g.ny);
    for (int j = -kGhost; j < g.ny + kGhost; ++j)
      for (int I = -kGhost; I <= g.nx + kGhost; ++I) vel.u(I, j) = mf.a * g.xf(I);
    for (int J = -kGhost; J <= g.ny + kGhost; ++J)
      for (int i = -kGhost; i < g.nx + kGhost; ++i) vel.v(i, J) = -mf.a * g.yf(J);
    auto nrm = compute_normals(g, phi);

    double worst = 0;
    for (int j = 3; j < g.ny - 3; ++j)
      for (int i = 3; i < g.nx - 3; ++i) {
        if (std::abs(phi(i, j)) > 3 * eps) continue;
        V2 nv;
        nv << nrm.nx(i, j), nrm.ny(i, j);
        const M2 gu = velocity_gradient_at_cell(g, vel, i, j);
        const M2 rhs = stress_evolution_rhs(gu, nv, mf.z(g.xc(i), t), mf.K);
        const double uc = u_at_cell(vel, i, j), vc = v_at_cell(vel, i, j);
        M2 adv;
        adv.setZero();
        auto add_adv = [&](const CellField& comp, int p, int q) {
          const double cx = (comp(i + 1, j) - comp(i - 1, j)) / (2 * g.dx);
          const double cy = (comp(i, j + 1) - comp(i, j - 1)) / (2 * g.dy);
          adv(p, q) += uc * cx + vc * cy;
        };
        add_adv(s_old.xx, 0, 0);
        add_adv(s_old.xy, 0, 1);
        add_adv(s_old.xy, 1, 0);
        add_adv(s_old.yy, 1, 1);
        const M2 r = (s_new.at(i, j) - s_old.at(i, j)) / h + adv - rhs;
        worst = std::max(worst, r.norm());
      }
    return worst;
  };

  SUBCASE("second order in dx at small h") {
    const double r32 = residual(32, 1e-5);
    const double r64 = residual(64, 1e-5);
    CHECK(std::log2(r32 / r64) > 1.8);
  }

  SUBCASE("first order in h on a fine grid") {
    const double rA = residual(128, 0.1);
    const double rB = residual(128, 0.05);
    CHECK(rA / rB > 1.8);
  }
}
