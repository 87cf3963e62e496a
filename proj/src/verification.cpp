#include <memfsi/verification.hpp>

#include <memfsi/ns_solver.hpp>
#include <memfsi/stencils.hpp>

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace memfsi {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

double ms_exact_velocity(double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }

double ms_coefficient(double x, double y) { return 1.0 + std::sin(kPi * x * y); }

Eigen::Vector2d ms_source(double x, double y) {
  const double s = std::sin(kPi * x) * std::sin(kPi * y);
  const double sx = kPi * std::cos(kPi * x) * std::sin(kPi * y);
  const double sy = kPi * std::sin(kPi * x) * std::cos(kPi * y);
  const double sxx = -kPi * kPi * s;
  const double syy = -kPi * kPi * s;
  const double sxy = kPi * kPi * std::cos(kPi * x) * std::cos(kPi * y);

  const double cw = std::cos(kPi * x * y);
  const double sw = std::sin(kPi * x * y);
  const double m = 1.0 + sw;
  const double mx = kPi * y * cw;
  const double my = kPi * x * cw;
  const double mxx = -kPi * kPi * y * y * sw;
  const double myy = -kPi * kPi * x * x * sw;
  const double mxy = kPi * cw - kPi * kPi * x * y * sw;

  // with every entry of M equal to m and both velocity components equal to s, the
  // flux tensor collapses entrywise to combinations of m, s and their gradients
  const double t11_x = sx * (mx + my) + s * (mxx + mxy) - 4.0 * (mx * sx + m * sxx) -
                       2.0 * (2.0 * m * mx * (sx + sy) + m * m * (sxx + sxy));
  const double t12_y = sy * (mx + my) + s * (mxy + myy) - 2.0 * (my * (sx + sy) + m * (sxy + syy)) -
                       2.0 * (2.0 * m * my * (sx + sy) + m * m * (sxy + syy));
  const double t21_x = sx * (mx + my) + s * (mxx + mxy) - 2.0 * (mx * (sx + sy) + m * (sxx + sxy)) -
                       2.0 * (2.0 * m * mx * (sx + sy) + m * m * (sxx + sxy));
  const double t22_y = sy * (mx + my) + s * (mxy + myy) - 4.0 * (my * sy + m * syy) -
                       2.0 * (2.0 * m * my * (sx + sy) + m * m * (sxy + syy));

  return {10.0 * s + t11_x + t12_y, 10.0 * s + t21_x + t22_y};
}

CellField sample_ms_coefficient(const GridSpec& g) {
  CellField m(g.nx, g.ny);
  for (int j = -kGhost; j < g.ny + kGhost; ++j)
    for (int i = -kGhost; i < g.nx + kGhost; ++i) m(i, j) = ms_coefficient(g.xc(i), g.yc(j));
  return m;
}

namespace {

// Folds out-of-range face references back into the matrix row by odd reflection
// about the homogeneous boundary, the discrete image of the solution's zero trace.
struct MsAssembler {
  const GridSpec& g;
  StencilMatrix& a;
  int row = 0;

  void add_u(int I, int j, double w) {
    if (I < 0) { add_u(-I, j, -w); return; }
    if (I > g.nx) { add_u(2 * g.nx - I, j, -w); return; }
    if (j < 0) { add_u(I, -j - 1, -w); return; }
    if (j >= g.ny) { add_u(I, 2 * g.ny - 1 - j, -w); return; }
    a.add(row, u_index(g, I, j), w);
  }

  void add_v(int i, int J, double w) {
    if (J < 0) { add_v(i, -J, -w); return; }
    if (J > g.ny) { add_v(i, 2 * g.ny - J, -w); return; }
    if (i < 0) { add_v(-i - 1, J, -w); return; }
    if (i >= g.nx) { add_v(2 * g.nx - 1 - i, J, -w); return; }
    a.add(row, v_index(g, i, J), w);
  }

  void operator()(Comp c, int x, int y, double w) {
    if (c == Comp::U) add_u(x, y, w);
    else add_v(x, y, w);
  }
};

struct Piece {
  Axis outer, inner;
  Comp w;
};

// -div(M[grad u]): both rows differentiate the column sums of [grad u]
constexpr Piece kLeftPieces[] = {{Axis::X, Axis::X, Comp::U},
                                 {Axis::X, Axis::X, Comp::V},
                                 {Axis::Y, Axis::Y, Comp::U},
                                 {Axis::Y, Axis::Y, Comp::V}};
// -div([grad u]^T M): row sums, so the inner derivative follows the row component
constexpr Piece kRightPiecesU[] = {{Axis::X, Axis::X, Comp::U},
                                   {Axis::X, Axis::X, Comp::V},
                                   {Axis::Y, Axis::X, Comp::U},
                                   {Axis::Y, Axis::X, Comp::V}};
constexpr Piece kRightPiecesV[] = {{Axis::X, Axis::Y, Comp::U},
                                   {Axis::X, Axis::Y, Comp::V},
                                   {Axis::Y, Axis::Y, Comp::U},
                                   {Axis::Y, Axis::Y, Comp::V}};
// -div(([grad u]:M) M): the full contraction appears under both outer derivatives
constexpr Piece kContractionPieces[] = {{Axis::X, Axis::X, Comp::U}, {Axis::X, Axis::Y, Comp::U},
                                        {Axis::X, Axis::X, Comp::V}, {Axis::X, Axis::Y, Comp::V},
                                        {Axis::Y, Axis::X, Comp::U}, {Axis::Y, Axis::Y, Comp::U},
                                        {Axis::Y, Axis::X, Comp::V}, {Axis::Y, Axis::Y, Comp::V}};

}  // namespace

SparseSystem assemble_ms_system(const GridSpec& g, const CellField& m, unsigned terms) {
  const int n = (g.nx + 1) * g.ny + g.nx * (g.ny + 1);
  SparseSystem sys{StencilMatrix(n), Eigen::VectorXd::Zero(n)};

  CellField msq(g.nx, g.ny);
  for (int j = -kGhost; j < g.ny + kGhost; ++j)
    for (int i = -kGhost; i < g.nx + kGhost; ++i) msq(i, j) = m(i, j) * m(i, j);

  const auto mf = [&m](int i, int j) { return m(i, j); };
  const auto m2f = [&msq](int i, int j) { return msq(i, j); };
  // centered coefficient gradients at cells and their corner interpolants
  const auto gx = [&](int i, int j) { return (m(i + 1, j) - m(i - 1, j)) / (2.0 * g.dx); };
  const auto gy = [&](int i, int j) { return (m(i, j + 1) - m(i, j - 1)) / (2.0 * g.dy); };
  const auto gx_corner = [&](int I, int J) {
    return 0.25 * (gx(I - 1, J - 1) + gx(I, J - 1) + gx(I - 1, J) + gx(I, J));
  };
  const auto gy_corner = [&](int I, int J) {
    return 0.25 * (gy(I - 1, J - 1) + gy(I, J - 1) + gy(I - 1, J) + gy(I, J));
  };

  MsAssembler emit{g, sys.matrix};

  // +div((u.grad)M): flux u.grad(m) differenced around each face, with velocities
  // averaged to the flux location
  const auto cell_flux = [&](int i, int j, double c) {
    const double hu = 0.5 * gx(i, j) * c, hv = 0.5 * gy(i, j) * c;
    emit.add_u(i, j, hu);
    emit.add_u(i + 1, j, hu);
    emit.add_v(i, j, hv);
    emit.add_v(i, j + 1, hv);
  };
  const auto corner_flux = [&](int I, int J, double c) {
    const double hu = 0.5 * gx_corner(I, J) * c, hv = 0.5 * gy_corner(I, J) * c;
    emit.add_u(I, J - 1, hu);
    emit.add_u(I, J, hu);
    emit.add_v(I - 1, J, hv);
    emit.add_v(I, J, hv);
  };

  for (int j = 0; j < g.ny; ++j) {
    for (int I = 0; I <= g.nx; ++I) {
      const int row = u_index(g, I, j);
      if (I == 0 || I == g.nx) {
        sys.matrix.add(row, row, 1.0);
        continue;
      }
      emit.row = row;
      if (terms & kMsMass) sys.matrix.add(row, row, 10.0);
      if (terms & kMsLeftGradient)
        for (const Piece& p : kLeftPieces)
          div_m_grad_stencil(g, Comp::U, I, j, p.outer, p.inner, p.w, mf, -1.0, emit);
      if (terms & kMsRightGradient)
        for (const Piece& p : kRightPiecesU)
          div_m_grad_stencil(g, Comp::U, I, j, p.outer, p.inner, p.w, mf, -1.0, emit);
      if (terms & kMsContraction)
        for (const Piece& p : kContractionPieces)
          div_m_grad_stencil(g, Comp::U, I, j, p.outer, p.inner, p.w, m2f, -1.0, emit);
      if (terms & kMsAdvection) {
        cell_flux(I, j, 1.0 / g.dx);
        cell_flux(I - 1, j, -1.0 / g.dx);
        corner_flux(I, j + 1, 1.0 / g.dy);
        corner_flux(I, j, -1.0 / g.dy);
      }
      sys.rhs[row] = ms_source(g.xf(I), g.yc(j)).x();
    }
  }

  for (int J = 0; J <= g.ny; ++J) {
    for (int i = 0; i < g.nx; ++i) {
      const int row = v_index(g, i, J);
      if (J == 0 || J == g.ny) {
        sys.matrix.add(row, row, 1.0);
        continue;
      }
      emit.row = row;
      if (terms & kMsMass) sys.matrix.add(row, row, 10.0);
      if (terms & kMsLeftGradient)
        for (const Piece& p : kLeftPieces)
          div_m_grad_stencil(g, Comp::V, i, J, p.outer, p.inner, p.w, mf, -1.0, emit);
      if (terms & kMsRightGradient)
        for (const Piece& p : kRightPiecesV)
          div_m_grad_stencil(g, Comp::V, i, J, p.outer, p.inner, p.w, mf, -1.0, emit);
      if (terms & kMsContraction)
        for (const Piece& p : kContractionPieces)
          div_m_grad_stencil(g, Comp::V, i, J, p.outer, p.inner, p.w, m2f, -1.0, emit);
      if (terms & kMsAdvection) {
        corner_flux(i + 1, J, 1.0 / g.dx);
        corner_flux(i, J, -1.0 / g.dx);
        cell_flux(i, J, 1.0 / g.dy);
        cell_flux(i, J - 1, -1.0 / g.dy);
      }
      sys.rhs[row] = ms_source(g.xc(i), g.yf(J)).y();
    }
  }

  sys.matrix.compress();
  return sys;
}

SparseSystem assemble_ms_system(const GridSpec& g, unsigned terms) {
  return assemble_ms_system(g, sample_ms_coefficient(g), terms);
}

MsSolution solve_ms_case(const GridSpec& g, double tol, int max_iter, KrylovMethod method) {
  SparseSystem sys = assemble_ms_system(g);
  const Eigen::VectorXd guess = Eigen::VectorXd::Zero(sys.rhs.size());
  const KrylovResult r = krylov_solve(sys.matrix, sys.rhs, guess, tol, max_iter, method);
  return {unpack_velocity(g, r.x), r.iterations, r.rel_residual};
}

double ms_l2_error(const GridSpec& g, const FaceVectorField& vel) {
  double acc = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int I = 0; I <= g.nx; ++I) {
      const double e = vel.u(I, j) - ms_exact_velocity(g.xf(I), g.yc(j));
      acc += e * e;
    }
  for (int J = 0; J <= g.ny; ++J)
    for (int i = 0; i < g.nx; ++i) {
      const double e = vel.v(i, J) - ms_exact_velocity(g.xc(i), g.yf(J));
      acc += e * e;
    }
  return std::sqrt(acc * g.dx * g.dy);
}

std::vector<double> convergence_orders(const std::vector<double>& errors,
                                       const std::vector<int>& meshes) {
  if (errors.size() != meshes.size() || errors.size() < 2)
    throw std::invalid_argument("convergence_orders: need matching lists of at least 2 meshes");
  std::vector<double> orders;
  orders.reserve(errors.size() - 1);
  for (std::size_t k = 0; k + 1 < errors.size(); ++k)
    orders.push_back(std::log(errors[k] / errors[k + 1]) /
                     std::log(double(meshes[k + 1]) / double(meshes[k])));
  return orders;
}

std::vector<MsSweepRow> run_ms_sweep(const std::vector<int>& meshes, double tol, int max_iter,
                                     KrylovMethod method, std::ostream* diag) {
  std::vector<MsSweepRow> rows;
  rows.reserve(meshes.size());
  for (int elem : meshes) {
    const GridSpec g = GridSpec::make(elem, elem, 0, 1, 0, 1);
    const MsSolution sol = solve_ms_case(g, tol, max_iter, method);
    rows.push_back({elem, ms_l2_error(g, sol.vel), sol.iterations});
    if (diag)
      *diag << "elem=" << elem << " error=" << format_g17(rows.back().error)
            << " iterations=" << sol.iterations << " residual=" << format_g17(sol.rel_residual)
            << '\n';
  }
  return rows;
}

void write_ms_csv(std::ostream& os, const std::vector<MsSweepRow>& rows) {
  os << "elem,error\n";
  for (const MsSweepRow& r : rows) os << r.elem << ',' << format_g17(r.error) << '\n';
}

}  // namespace memfsi
