#include <memfsi/ns_solver.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

namespace memfsi {

namespace {

std::string blow_up_message(int step, double max_u) {
  std::ostringstream os;
  os << "velocity blow-up at step " << step << " (max |u| = " << max_u << ")";
  return os.str();
}

}  // namespace

BlowUp::BlowUp(int step, double max_u)
    : std::runtime_error(blow_up_message(step, max_u)), step(step), max_u(max_u) {}

FlowState::FlowState(const GridSpec& g)
    : grid(g),
      vel(g.nx, g.ny),
      p(g.nx, g.ny),
      phi(g.nx, g.ny),
      map(g.nx, g.ny),
      rho(g.nx, g.ny, 1.0),
      mu(g.nx, g.ny, 1.0),
      z(g.nx, g.ny, 1.0),
      sigma(g.nx, g.ny),
      normals{CellField(g.nx, g.ny), CellField(g.nx, g.ny)} {}

int u_index(const GridSpec& g, int I, int j) { return j * (g.nx + 1) + I; }

int v_index(const GridSpec& g, int i, int J) { return (g.nx + 1) * g.ny + J * g.nx + i; }

Eigen::VectorXd pack_velocity(const GridSpec& g, const FaceVectorField& vel) {
  Eigen::VectorXd x((g.nx + 1) * g.ny + g.nx * (g.ny + 1));
  for (int j = 0; j < g.ny; ++j)
    for (int I = 0; I <= g.nx; ++I) x[u_index(g, I, j)] = vel.u(I, j);
  for (int J = 0; J <= g.ny; ++J)
    for (int i = 0; i < g.nx; ++i) x[v_index(g, i, J)] = vel.v(i, J);
  return x;
}

FaceVectorField unpack_velocity(const GridSpec& g, const Eigen::VectorXd& x) {
  FaceVectorField vel(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int I = 0; I <= g.nx; ++I) vel.u(I, j) = x[u_index(g, I, j)];
  for (int J = 0; J <= g.ny; ++J)
    for (int i = 0; i < g.nx; ++i) vel.v(i, J) = x[v_index(g, i, J)];
  return vel;
}

void update_material_properties(FlowState& state, const NsParams& prm) {
  const GridSpec& g = state.grid;
  const double eps = prm.eps(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double h = smooth_heaviside(state.phi(i, j), eps);
      state.rho(i, j) = h * prm.rho_outer + (1.0 - h) * prm.rho_inner;
      state.mu(i, j) = h * prm.mu_outer + (1.0 - h) * prm.mu_inner;
    }
  const BoundarySpec zg = BoundarySpec::all_zero_gradient();
  fill_ghosts(state.rho, zg);
  fill_ghosts(state.mu, zg);
}

void update_membrane_fields(FlowState& state, const NsParams& prm) {
  const GridSpec& g = state.grid;
  const double eps = prm.eps(g);
  const double band = prm.band(g);
  state.normals = compute_normals(g, state.phi);
  const Tensor2Field grad_y = compute_grad_y(g, state.map);

  int degenerate = 0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (std::abs(state.phi(i, j)) > band) {
        state.z(i, j) = 1.0;
        state.sigma.set(i, j, Mat2<double>::Zero());
        continue;
      }
      const Mat2<double> gy = grad_y.at(i, j);
      const Vec2<double> n(state.normals.nx(i, j), state.normals.ny(i, j));
      bool ok = std::abs(gy.determinant()) >= 1e-10;
      Mat2<double> b = Mat2<double>::Identity();
      double bnn = 1.0;
      if (ok) {
        b = compute_b(gy);
        bnn = n.dot(b * n);
        ok = bnn >= 1e-12;
      }
      if (!ok) {
        ++degenerate;
        if (std::abs(state.phi(i, j)) < eps)
          throw std::runtime_error("degenerate deformation gradient inside interface support at step " +
                                   std::to_string(state.step_index));
        continue;  // keep the previous tensors at this cell
      }
      const double zc = compute_z(compute_a(b, n));
      state.z(i, j) = zc;
      const auto es = evan_skalak(zc, prm.stiffness);
      state.sigma.set(i, j, stress_matrix(es.f, n));
    }
  }
  state.degenerate_last = degenerate;
  state.degenerate_total += degenerate;

  const BoundarySpec zg = BoundarySpec::all_zero_gradient();
  fill_ghosts(state.z, zg);
  fill_ghosts(state.sigma.xx, zg);
  fill_ghosts(state.sigma.xy, zg);
  fill_ghosts(state.sigma.yy, zg);
}

FaceVectorField compute_elastic_force(const FlowState& state, const NsParams& prm) {
  return elastic_force(state.grid, state.sigma, state.phi, prm.eps(state.grid));
}

namespace {

// Cell-centered coefficient fields of the semi-implicit augmentation. The s#### fields
// carry the linear response of the stress to the velocity gradient (coefficient of the
// derivative labelled by the second index pair in the tensor entry labelled by the
// first); m## is the dt-weighted rank-one viscosity addition.
struct SiFields {
  CellField m11, m12, m22;
  CellField s1111, s1112, s1122, s1212, s1222, s2222;
  CellField gxx_x, gxx_y, gxy_x, gxy_y, gyy_x, gyy_y;

  explicit SiFields(const GridSpec& g)
      : m11(g.nx, g.ny), m12(g.nx, g.ny), m22(g.nx, g.ny),
        s1111(g.nx, g.ny), s1112(g.nx, g.ny), s1122(g.nx, g.ny),
        s1212(g.nx, g.ny), s1222(g.nx, g.ny), s2222(g.nx, g.ny),
        gxx_x(g.nx, g.ny), gxx_y(g.nx, g.ny), gxy_x(g.nx, g.ny), gxy_y(g.nx, g.ny),
        gyy_x(g.nx, g.ny), gyy_y(g.nx, g.ny) {}
};

SiFields build_si_fields(const FlowState& st, const NsParams& prm) {
  const GridSpec& g = st.grid;
  SiFields f(g);
  const double eps = prm.eps(g);
  const double band = prm.band(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      f.gxx_x(i, j) = (st.sigma.xx(i + 1, j) - st.sigma.xx(i - 1, j)) / (2 * g.dx);
      f.gxx_y(i, j) = (st.sigma.xx(i, j + 1) - st.sigma.xx(i, j - 1)) / (2 * g.dy);
      f.gxy_x(i, j) = (st.sigma.xy(i + 1, j) - st.sigma.xy(i - 1, j)) / (2 * g.dx);
      f.gxy_y(i, j) = (st.sigma.xy(i, j + 1) - st.sigma.xy(i, j - 1)) / (2 * g.dy);
      f.gyy_x(i, j) = (st.sigma.yy(i + 1, j) - st.sigma.yy(i - 1, j)) / (2 * g.dx);
      f.gyy_y(i, j) = (st.sigma.yy(i, j + 1) - st.sigma.yy(i, j - 1)) / (2 * g.dy);
      if (std::abs(st.phi(i, j)) > band) continue;
      const double nx = st.normals.nx(i, j), ny = st.normals.ny(i, j);
      const double n11 = nx * nx, n12 = nx * ny, n22 = ny * ny;
      const double c11 = 1.0 - n11, c12 = -n12, c22 = 1.0 - n22;
      const double zc = st.z(i, j);
      const auto es = evan_skalak(zc, prm.stiffness);
      // raw f < 0 (compressed membrane) would flip these terms anti-dissipative;
      // the modulus keeps them damping wrinkling modes at the tension-case rate
      const double fm = std::abs(es.f);
      const double pf = std::max(es.f_prime, 0.0) * zc;
      const double q = 2.0 * fm;
      f.s1111(i, j) = pf * c11 * c11 - q * n11 * n11;
      f.s1112(i, j) = pf * c11 * c12 - q * n11 * n12;
      f.s1122(i, j) = pf * c11 * c22 - q * n11 * n22;
      f.s1212(i, j) = pf * c12 * c12 - q * n12 * n12;
      f.s1222(i, j) = pf * c12 * c22 - q * n12 * n22;
      f.s2222(i, j) = pf * c22 * c22 - q * n22 * n22;
      const double m = smooth_delta(st.phi(i, j), eps) * prm.dt * fm;
      f.m11(i, j) = m * n11;
      f.m12(i, j) = m * n12;
      f.m22(i, j) = m * n22;
    }
  }
  const BoundarySpec zg = BoundarySpec::all_zero_gradient();
  for (CellField* c : {&f.m11, &f.m12, &f.m22, &f.s1111, &f.s1112, &f.s1122, &f.s1212,
                       &f.s1222, &f.s2222, &f.gxx_x, &f.gxx_y, &f.gxy_x, &f.gxy_y,
                       &f.gyy_x, &f.gyy_y})
    fill_ghosts(*c, zg);
  return f;
}

struct MomentumAssembler {
  const FlowState& st;
  const NsParams& prm;
  const GridSpec& g;
  const FaceVectorField& force;
  const SiFields* si;
  StencilMatrix A;
  Eigen::VectorXd rhs;
  int row = 0;

  MomentumAssembler(const FlowState& st, const NsParams& prm, const FaceVectorField& force,
                    const SiFields* si)
      : st(st), prm(prm), g(st.grid), force(force), si(si),
        A((g.nx + 1) * g.ny + g.nx * (g.ny + 1)),
        rhs(Eigen::VectorXd::Zero((g.nx + 1) * g.ny + g.nx * (g.ny + 1))) {}

  [[noreturn]] static void reject_periodic() {
    throw std::invalid_argument("momentum assembly: periodic velocity walls are not supported");
  }

  // Fold a (possibly ghost) u reference into interior unknowns plus rhs constants,
  // mirroring fill_ghosts exactly.
  void add_u(int I, int j, double w) {
    if (w == 0.0) return;
    if (I < 0) {
      const BcSide& s = prm.velocity_bc.left;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_u(0, j, w); return;
        case BcKind::Dirichlet: rhs[row] -= 2.0 * s.value * w; add_u(-I, j, -w); return;
        case BcKind::MovingWall: add_u(-I, j, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (I > g.nx) {
      const BcSide& s = prm.velocity_bc.right;
      const int k = I - g.nx;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_u(g.nx, j, w); return;
        case BcKind::Dirichlet: rhs[row] -= 2.0 * s.value * w; add_u(g.nx - k, j, -w); return;
        case BcKind::MovingWall: add_u(g.nx - k, j, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (j < 0) {
      const BcSide& s = prm.velocity_bc.bottom;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_u(I, 0, w); return;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: rhs[row] -= 2.0 * s.value * w; add_u(I, -j - 1, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (j >= g.ny) {
      const BcSide& s = prm.velocity_bc.top;
      const int k = j - g.ny + 1;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_u(I, g.ny - 1, w); return;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: rhs[row] -= 2.0 * s.value * w; add_u(I, g.ny - k, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    A.add(row, u_index(g, I, j), w);
  }

  void add_v(int i, int J, double w) {
    if (w == 0.0) return;
    if (J < 0) {
      const BcSide& s = prm.velocity_bc.bottom;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_v(i, 0, w); return;
        case BcKind::Dirichlet: rhs[row] -= 2.0 * s.value * w; add_v(i, -J, -w); return;
        case BcKind::MovingWall: add_v(i, -J, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (J > g.ny) {
      const BcSide& s = prm.velocity_bc.top;
      const int k = J - g.ny;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_v(i, g.ny, w); return;
        case BcKind::Dirichlet: rhs[row] -= 2.0 * s.value * w; add_v(i, g.ny - k, -w); return;
        case BcKind::MovingWall: add_v(i, g.ny - k, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (i < 0) {
      const BcSide& s = prm.velocity_bc.left;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_v(0, J, w); return;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: rhs[row] -= 2.0 * s.value * w; add_v(-i - 1, J, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    if (i >= g.nx) {
      const BcSide& s = prm.velocity_bc.right;
      const int k = i - g.nx + 1;
      switch (s.kind) {
        case BcKind::ZeroGradient: add_v(g.nx - 1, J, w); return;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: rhs[row] -= 2.0 * s.value * w; add_v(g.nx - k, J, -w); return;
        case BcKind::Periodic: reject_periodic();
      }
    }
    A.add(row, v_index(g, i, J), w);
  }

  void add(Comp c, int a, int b, double w) {
    if (c == Comp::U)
      add_u(a, b, w);
    else
      add_v(a, b, w);
  }

  // wgt * [grad(sigma_comp) . u*] at a cell, upwind face picked by the frozen velocity
  void add_cell_flux(const CellField& gx, const CellField& gy, int ic, int jc, double wgt) {
    const double uc = u_at_cell(st.vel, ic, jc);
    const double vc = v_at_cell(st.vel, ic, jc);
    add_u(uc >= 0 ? ic : ic + 1, jc, wgt * gx(ic, jc));
    add_v(ic, vc >= 0 ? jc : jc + 1, wgt * gy(ic, jc));
  }

  // wgt * [grad(sigma_xy) . u*] at a corner (coefficients 4-point, velocities 2-point)
  void add_corner_flux(const CellField& gx, const CellField& gy, int I, int J, double wgt) {
    const double cgx = interp_cell_to_corner(gx, I, J);
    const double cgy = interp_cell_to_corner(gy, I, J);
    add_u(I, J - 1, 0.5 * wgt * cgx);
    add_u(I, J, 0.5 * wgt * cgx);
    add_v(I - 1, J, 0.5 * wgt * cgy);
    add_v(I, J, 0.5 * wgt * cgy);
  }

  void u_row(int I, int j) {
    row = u_index(g, I, j);
    const double rho_f = 0.5 * (st.rho(I - 1, j) + st.rho(I, j));
    add_u(I, j, rho_f / prm.dt);
    rhs[row] += rho_f / prm.dt * st.vel.u(I, j) - (st.p(I, j) - st.p(I - 1, j)) / g.dx +
                force.u(I, j);

    // rho_f * [d/dx(u^n u*) + d/dy(v^n u*)], centered fluxes
    const double ucr = u_at_cell(st.vel, I, j);
    const double ucl = u_at_cell(st.vel, I - 1, j);
    const double vct = v_at_corner(st.vel, I, j + 1);
    const double vcb = v_at_corner(st.vel, I, j);
    const double cx = rho_f / (2 * g.dx), cy = rho_f / (2 * g.dy);
    add_u(I, j, cx * ucr);
    add_u(I + 1, j, cx * ucr);
    add_u(I - 1, j, -cx * ucl);
    add_u(I, j, -cx * ucl);
    add_u(I, j, cy * vct);
    add_u(I, j + 1, cy * vct);
    add_u(I, j - 1, -cy * vcb);
    add_u(I, j, -cy * vcb);

    auto emit = [this](Comp c, int a, int b, double w) { add(c, a, b, w); };
    auto mu2 = [this](int a, int b) { return 2.0 * st.mu(a, b); };
    auto mu1 = [this](int a, int b) { return st.mu(a, b); };
    div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::X, Comp::U, mu2, -1.0, emit);
    div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::Y, Comp::U, mu1, -1.0, emit);
    div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::X, Comp::V, mu1, -1.0, emit);

    if (si == nullptr) return;
    auto fld = [](const CellField& f) {
      return [&f](int a, int b) { return f(a, b); };
    };
    if (prm.si_terms & kSiTensorViscosity) {
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::X, Comp::U, fld(si->m11), -2.0, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::X, Comp::V, fld(si->m12), -2.0, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::Y, Comp::U, fld(si->m11), -1.0, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::Y, Comp::V, fld(si->m12), -1.0, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::X, Comp::U, fld(si->m12), -1.0, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::X, Comp::V, fld(si->m22), -1.0, emit);
    }
    const double phi_f = 0.5 * (st.phi(I - 1, j) + st.phi(I, j));
    const double df = smooth_delta(phi_f, prm.eps(g));
    if (df == 0.0) return;
    if (prm.si_terms & kSiStressResponse) {
      const double sb = -df * prm.dt;
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::X, Comp::U, fld(si->s1111), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::Y, Comp::U, fld(si->s1112), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::X, Comp::V, fld(si->s1112), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::X, Axis::Y, Comp::V, fld(si->s1122), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::X, Comp::U, fld(si->s1112), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::Y, Comp::U, fld(si->s1212), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::X, Comp::V, fld(si->s1212), sb, emit);
      div_m_grad_stencil(g, Comp::U, I, j, Axis::Y, Axis::Y, Comp::V, fld(si->s1222), sb, emit);
    }
    if (prm.si_terms & kSiStressAdvection) {
      const double sc = df * prm.dt;
      add_cell_flux(si->gxx_x, si->gxx_y, I, j, sc / g.dx);
      add_cell_flux(si->gxx_x, si->gxx_y, I - 1, j, -sc / g.dx);
      add_corner_flux(si->gxy_x, si->gxy_y, I, j + 1, sc / g.dy);
      add_corner_flux(si->gxy_x, si->gxy_y, I, j, -sc / g.dy);
    }
  }

  void v_row(int i, int J) {
    row = v_index(g, i, J);
    const double rho_f = 0.5 * (st.rho(i, J - 1) + st.rho(i, J));
    add_v(i, J, rho_f / prm.dt);
    rhs[row] += rho_f / prm.dt * st.vel.v(i, J) - (st.p(i, J) - st.p(i, J - 1)) / g.dy +
                force.v(i, J);

    const double vct = v_at_cell(st.vel, i, J);
    const double vcb = v_at_cell(st.vel, i, J - 1);
    const double ucr = u_at_corner(st.vel, i + 1, J);
    const double ucl = u_at_corner(st.vel, i, J);
    const double cx = rho_f / (2 * g.dx), cy = rho_f / (2 * g.dy);
    add_v(i, J, cx * ucr);
    add_v(i + 1, J, cx * ucr);
    add_v(i - 1, J, -cx * ucl);
    add_v(i, J, -cx * ucl);
    add_v(i, J, cy * vct);
    add_v(i, J + 1, cy * vct);
    add_v(i, J - 1, -cy * vcb);
    add_v(i, J, -cy * vcb);

    auto emit = [this](Comp c, int a, int b, double w) { add(c, a, b, w); };
    auto mu2 = [this](int a, int b) { return 2.0 * st.mu(a, b); };
    auto mu1 = [this](int a, int b) { return st.mu(a, b); };
    div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::Y, Comp::V, mu2, -1.0, emit);
    div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::X, Comp::V, mu1, -1.0, emit);
    div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::Y, Comp::U, mu1, -1.0, emit);

    if (si == nullptr) return;
    auto fld = [](const CellField& f) {
      return [&f](int a, int b) { return f(a, b); };
    };
    if (prm.si_terms & kSiTensorViscosity) {
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::X, Comp::U, fld(si->m12), -1.0, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::X, Comp::V, fld(si->m22), -1.0, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::Y, Comp::U, fld(si->m11), -1.0, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::Y, Comp::V, fld(si->m12), -1.0, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::Y, Comp::U, fld(si->m12), -2.0, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::Y, Comp::V, fld(si->m22), -2.0, emit);
    }
    const double phi_f = 0.5 * (st.phi(i, J - 1) + st.phi(i, J));
    const double df = smooth_delta(phi_f, prm.eps(g));
    if (df == 0.0) return;
    if (prm.si_terms & kSiStressResponse) {
      const double sb = -df * prm.dt;
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::X, Comp::U, fld(si->s1112), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::Y, Comp::U, fld(si->s1212), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::X, Comp::V, fld(si->s1212), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::X, Axis::Y, Comp::V, fld(si->s1222), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::X, Comp::U, fld(si->s1122), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::Y, Comp::U, fld(si->s1222), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::X, Comp::V, fld(si->s1222), sb, emit);
      div_m_grad_stencil(g, Comp::V, i, J, Axis::Y, Axis::Y, Comp::V, fld(si->s2222), sb, emit);
    }
    if (prm.si_terms & kSiStressAdvection) {
      const double sc = df * prm.dt;
      add_cell_flux(si->gyy_x, si->gyy_y, i, J, sc / g.dy);
      add_cell_flux(si->gyy_x, si->gyy_y, i, J - 1, -sc / g.dy);
      add_corner_flux(si->gxy_x, si->gxy_y, i + 1, J, sc / g.dx);
      add_corner_flux(si->gxy_x, si->gxy_y, i, J, -sc / g.dx);
    }
  }

  void bc_row_u(int I, int j) {
    row = u_index(g, I, j);
    const BcSide& s = (I == 0) ? prm.velocity_bc.left : prm.velocity_bc.right;
    A.add(row, row, 1.0);
    switch (s.kind) {
      case BcKind::ZeroGradient: A.add(row, u_index(g, I == 0 ? 1 : g.nx - 1, j), -1.0); break;
      case BcKind::Dirichlet: rhs[row] = s.value; break;
      case BcKind::MovingWall: break;
      case BcKind::Periodic: reject_periodic();
    }
  }

  void bc_row_v(int i, int J) {
    row = v_index(g, i, J);
    const BcSide& s = (J == 0) ? prm.velocity_bc.bottom : prm.velocity_bc.top;
    A.add(row, row, 1.0);
    switch (s.kind) {
      case BcKind::ZeroGradient: A.add(row, v_index(g, i, J == 0 ? 1 : g.ny - 1), -1.0); break;
      case BcKind::Dirichlet: rhs[row] = s.value; break;
      case BcKind::MovingWall: break;
      case BcKind::Periodic: reject_periodic();
    }
  }

  SparseSystem run() {
    for (int j = 0; j < g.ny; ++j)
      for (int I = 0; I <= g.nx; ++I) {
        if (I == 0 || I == g.nx)
          bc_row_u(I, j);
        else
          u_row(I, j);
      }
    for (int J = 0; J <= g.ny; ++J)
      for (int i = 0; i < g.nx; ++i) {
        if (J == 0 || J == g.ny)
          bc_row_v(i, J);
        else
          v_row(i, J);
      }
    A.compress();
    return SparseSystem{std::move(A), std::move(rhs)};
  }
};

}  // namespace

SparseSystem assemble_momentum(const FlowState& state, const FaceVectorField& force,
                               const NsParams& prm, SchemeMode mode) {
  std::optional<SiFields> si;
  if (mode == SchemeMode::SemiImplicit) si.emplace(build_si_fields(state, prm));
  MomentumAssembler a(state, prm, force, si ? &*si : nullptr);
  return a.run();
}

SparseSystem assemble_momentum_explicit(const FlowState& state, const FaceVectorField& force,
                                        const NsParams& prm) {
  return assemble_momentum(state, force, prm, SchemeMode::Explicit);
}

SparseSystem assemble_momentum_semi_implicit(const FlowState& state, const FaceVectorField& force,
                                             const NsParams& prm) {
  return assemble_momentum(state, force, prm, SchemeMode::SemiImplicit);
}

CellField solve_poisson(const FlowState& state, const FaceVectorField& u_star, const NsParams& prm,
                        int* iterations, double* residual) {
  const GridSpec& g = state.grid;
  const int n = g.nx * g.ny;
  StencilMatrix A(n);
  Eigen::VectorXd b(n);
  const CellField div = divergence(g, u_star);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int row = j * g.nx + i;
      double diag = 0.0;
      auto flux = [&](int i2, int j2, double h) {
        const double coef = prm.dt / (0.5 * (state.rho(i, j) + state.rho(i2, j2))) / (h * h);
        A.add(row, j2 * g.nx + i2, coef);
        diag -= coef;
      };
      if (i + 1 < g.nx) flux(i + 1, j, g.dx);
      if (i > 0) flux(i - 1, j, g.dx);
      if (j + 1 < g.ny) flux(i, j + 1, g.dy);
      if (j > 0) flux(i, j - 1, g.dy);
      A.add(row, row, diag);
      b[row] = div(i, j);
    }
  }
  b.array() -= b.mean();
  A.compress();
  const KrylovResult r =
      krylov_solve(A, b, Eigen::VectorXd::Zero(n), prm.tol_poisson, prm.max_iterations, prm.method);
  if (iterations) *iterations = r.iterations;
  if (residual) *residual = r.rel_residual;
  const double mean = r.x.mean();
  CellField psi(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) psi(i, j) = r.x[j * g.nx + i] - mean;
  fill_ghosts(psi, BoundarySpec::all_zero_gradient());
  return psi;
}

void apply_correction(FlowState& state, const FaceVectorField& u_star, const CellField& psi,
                      const NsParams& prm) {
  const GridSpec& g = state.grid;
  state.vel = u_star;  // boundary faces keep their predicted (BC-pinned) values
  for (int j = 0; j < g.ny; ++j)
    for (int I = 1; I < g.nx; ++I) {
      const double rho_f = 0.5 * (state.rho(I - 1, j) + state.rho(I, j));
      state.vel.u(I, j) -= prm.dt / rho_f * (psi(I, j) - psi(I - 1, j)) / g.dx;
    }
  for (int J = 1; J < g.ny; ++J)
    for (int i = 0; i < g.nx; ++i) {
      const double rho_f = 0.5 * (state.rho(i, J - 1) + state.rho(i, J));
      state.vel.v(i, J) -= prm.dt / rho_f * (psi(i, J) - psi(i, J - 1)) / g.dy;
    }
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) state.p(i, j) += psi(i, j);
}

namespace {

// the Neumann pressure problem is only compatible when the predicted field carries no
// net boundary outflow; open (zero-gradient) faces absorb whatever imbalance the
// momentum solve left, otherwise it would persist as uniform divergence
void balance_open_flux(const GridSpec& g, FaceVectorField& us, const BoundarySpec& bc) {
  double q = 0, open_len = 0;
  for (int j = 0; j < g.ny; ++j) q += (us.u(g.nx, j) - us.u(0, j)) * g.dy;
  for (int i = 0; i < g.nx; ++i) q += (us.v(i, g.ny) - us.v(i, 0)) * g.dx;
  if (bc.left.kind == BcKind::ZeroGradient) open_len += g.ny * g.dy;
  if (bc.right.kind == BcKind::ZeroGradient) open_len += g.ny * g.dy;
  if (bc.bottom.kind == BcKind::ZeroGradient) open_len += g.nx * g.dx;
  if (bc.top.kind == BcKind::ZeroGradient) open_len += g.nx * g.dx;
  if (open_len == 0.0 || q == 0.0) return;
  const double s = q / open_len;
  if (bc.left.kind == BcKind::ZeroGradient)
    for (int j = 0; j < g.ny; ++j) us.u(0, j) += s;
  if (bc.right.kind == BcKind::ZeroGradient)
    for (int j = 0; j < g.ny; ++j) us.u(g.nx, j) -= s;
  if (bc.bottom.kind == BcKind::ZeroGradient)
    for (int i = 0; i < g.nx; ++i) us.v(i, 0) += s;
  if (bc.top.kind == BcKind::ZeroGradient)
    for (int i = 0; i < g.nx; ++i) us.v(i, g.ny) -= s;
}

}  // namespace

StepDiagnostics step(FlowState& state, const NsParams& prm) {
  const GridSpec& g = state.grid;
  StepDiagnostics d;

  fill_ghosts(state.vel, prm.velocity_bc);
  fill_ghosts(state.phi, prm.scalar_bc);
  fill_ghosts(state.map.wx, prm.scalar_bc);
  fill_ghosts(state.map.wy, prm.scalar_bc);

  update_material_properties(state, prm);
  update_membrane_fields(state, prm);
  d.degenerate = state.degenerate_last;

  const FaceVectorField force = compute_elastic_force(state, prm);
  SparseSystem sys = assemble_momentum(state, force, prm, prm.mode);
  const int sweeps =
      (prm.mode == SchemeMode::SemiImplicit && prm.stiffness > 0.0) ? std::max(1, prm.si_sweeps)
                                                                    : 1;
  Eigen::VectorXd guess = pack_velocity(g, state.vel);
  FaceVectorField u_star(g.nx, g.ny);
  CellField psi(g.nx, g.ny);
  CellField psi_prior(g.nx, g.ny);
  for (int k = 0; k < sweeps; ++k) {
    const KrylovResult mr =
        krylov_solve(sys.matrix, sys.rhs, guess, prm.tol_momentum, prm.max_iterations, prm.method);
    d.momentum_iterations += mr.iterations;
    d.momentum_residual = mr.rel_residual;
    u_star = unpack_velocity(g, mr.x);
    fill_ghosts(u_star, prm.velocity_bc);
    balance_open_flux(g, u_star, prm.velocity_bc);
    int pit = 0;
    double pres = 0.0;
    psi = solve_poisson(state, u_star, prm, &pit, &pres);
    d.poisson_iterations += pit;
    d.poisson_residual = pres;
    if (k + 1 == sweeps) break;
    for (int j = 0; j < g.ny; ++j)
      for (int I = 1; I < g.nx; ++I)
        sys.rhs[u_index(g, I, j)] -= (psi(I, j) - psi(I - 1, j)) / g.dx;
    for (int J = 1; J < g.ny; ++J)
      for (int i = 0; i < g.nx; ++i)
        sys.rhs[v_index(g, i, J)] -= (psi(i, J) - psi(i, J - 1)) / g.dy;
    guess = mr.x;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) psi_prior(i, j) += psi(i, j);
  }
  apply_correction(state, u_star, psi, prm);
  if (sweeps > 1)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) state.p(i, j) += psi_prior(i, j);
  fill_ghosts(state.vel, prm.velocity_bc);

  state.step_index += 1;
  state.t += prm.dt;

  const double band = prm.band(g);
  double z_min = 1.0, z_max = 1.0;
  bool any = false;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (std::abs(state.phi(i, j)) > band) continue;
      const double zc = state.z(i, j);
      z_min = any ? std::min(z_min, zc) : zc;
      z_max = any ? std::max(z_max, zc) : zc;
      any = true;
    }
  d.z_min = z_min;
  d.z_max = z_max;

  d.max_velocity = state.vel.max_abs_interior();
  if (!state.vel.interior_finite() || d.max_velocity > 100.0 * prm.u_ref)
    throw BlowUp(state.step_index, d.max_velocity);

  advect_rk3(g, state.phi, state.vel, prm.dt, prm.scalar_bc);
  advect_backward_map(g, state.map, state.vel, prm.dt, prm.scalar_bc);
  if (prm.reinit_every > 0 && state.step_index % prm.reinit_every == 0)
    reinitialize(g, state.phi, prm.scalar_bc, prm.reinit_steps);
  if (prm.extrap_steps > 0)
    extrapolate_backward_map(g, state.map, state.phi, prm.eps(g), prm.scalar_bc, prm.extrap_steps);

  if (prm.diag_stream) {
    *prm.diag_stream << "step=" << state.step_index << " t=" << format_g17(state.t)
                     << " mom_iters=" << d.momentum_iterations
                     << " mom_res=" << format_g17(d.momentum_residual)
                     << " poi_iters=" << d.poisson_iterations
                     << " poi_res=" << format_g17(d.poisson_residual)
                     << " max_u=" << format_g17(d.max_velocity)
                     << " z_min=" << format_g17(d.z_min) << " z_max=" << format_g17(d.z_max)
                     << " degenerate=" << d.degenerate << "\n";
  }
  return d;
}

}  // namespace memfsi
