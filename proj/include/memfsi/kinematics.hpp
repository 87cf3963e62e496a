// Interface kinematics: smoothed interface functions, level-set normals, HJ-WENO5
// upwind transport with SSP-RK3, PDE reinitialization and constant-normal-derivative
// extrapolation of the backward characteristics.
#pragma once

#include <memfsi/grid.hpp>

#include <cmath>
#include <numbers>

namespace memfsi {

// ---------------------------------------------------------------------------
// Smoothed delta / Heaviside (cosine kernel, support [-eps, eps])

template <class Scalar>
Scalar zeta(Scalar r) {
  if (r <= Scalar(-1) || r >= Scalar(1)) return Scalar(0);
  return Scalar(0.5) * (Scalar(1) + std::cos(Scalar(std::numbers::pi) * r));
}

template <class Scalar>
Scalar smooth_delta(Scalar phi, Scalar eps) {
  return zeta(phi / eps) / eps;
}

// Exact antiderivative of the kernel, so H' = delta holds discretely as well.
template <class Scalar>
Scalar smooth_heaviside(Scalar phi, Scalar eps) {
  const Scalar r = phi / eps;
  if (r <= Scalar(-1)) return Scalar(0);
  if (r >= Scalar(1)) return Scalar(1);
  const Scalar pi = Scalar(std::numbers::pi);
  return Scalar(0.5) * (Scalar(1) + r + std::sin(pi * r) / pi);
}

// ---------------------------------------------------------------------------
// Normals n = grad(phi)/|grad(phi)| by central differences.

template <class Scalar>
struct NormalFieldT {
  CellFieldT<Scalar> nx, ny;
};
using NormalField = NormalFieldT<double>;

// Cells where |grad(phi)| collapses below the floor borrow the averaged normal of
// their non-degenerate neighbours (axis fallback if all four collapse too).
template <class Scalar>
NormalFieldT<Scalar> compute_normals(const GridSpec& g, const CellFieldT<Scalar>& phi) {
  const Scalar floor_mag = Scalar(1e-8);
  NormalFieldT<Scalar> n{CellFieldT<Scalar>(g.nx, g.ny), CellFieldT<Scalar>(g.nx, g.ny)};
  CellFieldT<Scalar> ok(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Scalar gx = (phi(i + 1, j) - phi(i - 1, j)) / (Scalar(2) * Scalar(g.dx));
      const Scalar gy = (phi(i, j + 1) - phi(i, j - 1)) / (Scalar(2) * Scalar(g.dy));
      const Scalar mag = std::sqrt(gx * gx + gy * gy);
      if (mag >= floor_mag) {
        n.nx(i, j) = gx / mag;
        n.ny(i, j) = gy / mag;
        ok(i, j) = 1;
      }
    }
  }
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (ok(i, j) != Scalar(0)) continue;
      Scalar sx = 0, sy = 0;
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int ii = i + di[k], jj = j + dj[k];
        if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny || ok(ii, jj) == Scalar(0)) continue;
        sx += n.nx(ii, jj);
        sy += n.ny(ii, jj);
      }
      const Scalar mag = std::sqrt(sx * sx + sy * sy);
      if (mag >= floor_mag) {
        n.nx(i, j) = sx / mag;
        n.ny(i, j) = sy / mag;
      } else {
        n.nx(i, j) = 1;
        n.ny(i, j) = 0;
      }
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// HJ-WENO5 building block: biased derivative from five consecutive first
// differences (v3 spans the target node).

template <class Scalar>
Scalar weno5_biased(Scalar v1, Scalar v2, Scalar v3, Scalar v4, Scalar v5) {
  const Scalar e = Scalar(1e-6);
  const Scalar c13 = Scalar(13) / Scalar(12), c14 = Scalar(0.25);
  const Scalar s1 = c13 * (v1 - 2 * v2 + v3) * (v1 - 2 * v2 + v3) +
                    c14 * (v1 - 4 * v2 + 3 * v3) * (v1 - 4 * v2 + 3 * v3);
  const Scalar s2 = c13 * (v2 - 2 * v3 + v4) * (v2 - 2 * v3 + v4) +
                    c14 * (v2 - v4) * (v2 - v4);
  const Scalar s3 = c13 * (v3 - 2 * v4 + v5) * (v3 - 2 * v4 + v5) +
                    c14 * (3 * v3 - 4 * v4 + v5) * (3 * v3 - 4 * v4 + v5);
  const Scalar a1 = Scalar(0.1) / ((s1 + e) * (s1 + e));
  const Scalar a2 = Scalar(0.6) / ((s2 + e) * (s2 + e));
  const Scalar a3 = Scalar(0.3) / ((s3 + e) * (s3 + e));
  const Scalar w1 = a1 / (a1 + a2 + a3), w2 = a2 / (a1 + a2 + a3), w3 = a3 / (a1 + a2 + a3);
  const Scalar q1 = v1 / Scalar(3) - Scalar(7) * v2 / Scalar(6) + Scalar(11) * v3 / Scalar(6);
  const Scalar q2 = -v2 / Scalar(6) + Scalar(5) * v3 / Scalar(6) + v4 / Scalar(3);
  const Scalar q3 = v3 / Scalar(3) + Scalar(5) * v4 / Scalar(6) - v5 / Scalar(6);
  return w1 * q1 + w2 * q2 + w3 * q3;
}

namespace detail {

template <class Scalar>
Scalar weno5_dx_minus(const CellFieldT<Scalar>& q, int i, int j, Scalar dx) {
  return weno5_biased((q(i - 2, j) - q(i - 3, j)) / dx, (q(i - 1, j) - q(i - 2, j)) / dx,
                      (q(i, j) - q(i - 1, j)) / dx, (q(i + 1, j) - q(i, j)) / dx,
                      (q(i + 2, j) - q(i + 1, j)) / dx);
}

template <class Scalar>
Scalar weno5_dx_plus(const CellFieldT<Scalar>& q, int i, int j, Scalar dx) {
  return weno5_biased((q(i + 3, j) - q(i + 2, j)) / dx, (q(i + 2, j) - q(i + 1, j)) / dx,
                      (q(i + 1, j) - q(i, j)) / dx, (q(i, j) - q(i - 1, j)) / dx,
                      (q(i - 1, j) - q(i - 2, j)) / dx);
}

template <class Scalar>
Scalar weno5_dy_minus(const CellFieldT<Scalar>& q, int i, int j, Scalar dy) {
  return weno5_biased((q(i, j - 2) - q(i, j - 3)) / dy, (q(i, j - 1) - q(i, j - 2)) / dy,
                      (q(i, j) - q(i, j - 1)) / dy, (q(i, j + 1) - q(i, j)) / dy,
                      (q(i, j + 2) - q(i, j + 1)) / dy);
}

template <class Scalar>
Scalar weno5_dy_plus(const CellFieldT<Scalar>& q, int i, int j, Scalar dy) {
  return weno5_biased((q(i, j + 3) - q(i, j + 2)) / dy, (q(i, j + 2) - q(i, j + 1)) / dy,
                      (q(i, j + 1) - q(i, j)) / dy, (q(i, j) - q(i, j - 1)) / dy,
                      (q(i, j - 1) - q(i, j - 2)) / dy);
}

// WENO5 one-sided derivatives drop to first order within three cells of a
// non-periodic boundary where the wide stencil would read extrapolated ghosts.
template <class Scalar>
struct UpwindCtx {
  const GridSpec* g;
  bool periodic_x, periodic_y;

  bool fb_x(int i) const { return !periodic_x && (i < 3 || i >= g->nx - 3); }
  bool fb_y(int j) const { return !periodic_y && (j < 3 || j >= g->ny - 3); }

  Scalar dx_minus(const CellFieldT<Scalar>& q, int i, int j) const {
    return fb_x(i) ? (q(i, j) - q(i - 1, j)) / Scalar(g->dx) : weno5_dx_minus(q, i, j, Scalar(g->dx));
  }
  Scalar dx_plus(const CellFieldT<Scalar>& q, int i, int j) const {
    return fb_x(i) ? (q(i + 1, j) - q(i, j)) / Scalar(g->dx) : weno5_dx_plus(q, i, j, Scalar(g->dx));
  }
  Scalar dy_minus(const CellFieldT<Scalar>& q, int i, int j) const {
    return fb_y(j) ? (q(i, j) - q(i, j - 1)) / Scalar(g->dy) : weno5_dy_minus(q, i, j, Scalar(g->dy));
  }
  Scalar dy_plus(const CellFieldT<Scalar>& q, int i, int j) const {
    return fb_y(j) ? (q(i, j + 1) - q(i, j)) / Scalar(g->dy) : weno5_dy_plus(q, i, j, Scalar(g->dy));
  }
};

template <class Scalar>
UpwindCtx<Scalar> make_ctx(const GridSpec& g, const BoundarySpec& bc) {
  return {&g, bc.left.kind == BcKind::Periodic, bc.bottom.kind == BcKind::Periodic};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Upwind transport dq/dt + (u . grad) q = source, SSP-RK3 in pseudo-time of one dt.
// The advecting velocity and the optional source stay frozen across the stages.

template <class Scalar>
void advect_rk3(const GridSpec& g, CellFieldT<Scalar>& q, const FaceVectorFieldT<Scalar>& vel,
                Scalar dt, const BoundarySpec& bc, const CellFieldT<Scalar>* source = nullptr) {
  const auto ctx = detail::make_ctx<Scalar>(g, bc);
  CellFieldT<Scalar> uc(g.nx, g.ny), vc(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      uc(i, j) = u_at_cell(vel, i, j);
      vc(i, j) = v_at_cell(vel, i, j);
    }

  auto rhs = [&](const CellFieldT<Scalar>& f, CellFieldT<Scalar>& out) {
    parallel_for_rows(g.ny, [&](int j) {
      for (int i = 0; i < g.nx; ++i) {
        const Scalar u = uc(i, j), v = vc(i, j);
        const Scalar qx = u > 0 ? ctx.dx_minus(f, i, j) : (u < 0 ? ctx.dx_plus(f, i, j) : Scalar(0));
        const Scalar qy = v > 0 ? ctx.dy_minus(f, i, j) : (v < 0 ? ctx.dy_plus(f, i, j) : Scalar(0));
        out(i, j) = -(u * qx + v * qy) + (source ? (*source)(i, j) : Scalar(0));
      }
    });
  };

  CellFieldT<Scalar> L(g.nx, g.ny), s1(g.nx, g.ny), s2(g.nx, g.ny);
  fill_ghosts(q, bc);
  rhs(q, L);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) s1(i, j) = q(i, j) + dt * L(i, j);
  fill_ghosts(s1, bc);
  rhs(s1, L);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      s2(i, j) = Scalar(0.75) * q(i, j) + Scalar(0.25) * (s1(i, j) + dt * L(i, j));
  fill_ghosts(s2, bc);
  rhs(s2, L);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      q(i, j) = q(i, j) / Scalar(3) + Scalar(2) / Scalar(3) * (s2(i, j) + dt * L(i, j));
  fill_ghosts(q, bc);
}

// ---------------------------------------------------------------------------
// Backward characteristics, stored as the displacement field W = Y - x so the
// quiescent state is represented exactly by zeros and outflow ghosts stay benign.

template <class Scalar>
struct BackwardMapT {
  CellFieldT<Scalar> wx, wy;

  BackwardMapT() = default;
  BackwardMapT(int nx, int ny) : wx(nx, ny), wy(nx, ny) {}

  Scalar y1(const GridSpec& g, int i, int j) const { return Scalar(g.xc(i)) + wx(i, j); }
  Scalar y2(const GridSpec& g, int i, int j) const { return Scalar(g.yc(j)) + wy(i, j); }
};
using BackwardMap = BackwardMapT<double>;

// dW/dt + (u . grad) W = -u  (equivalent to transporting Y as material labels)
template <class Scalar>
void advect_backward_map(const GridSpec& g, BackwardMapT<Scalar>& bm,
                         const FaceVectorFieldT<Scalar>& vel, Scalar dt, const BoundarySpec& bc) {
  CellFieldT<Scalar> sx(g.nx, g.ny), sy(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      sx(i, j) = -u_at_cell(vel, i, j);
      sy(i, j) = -v_at_cell(vel, i, j);
    }
  advect_rk3(g, bm.wx, vel, dt, bc, &sx);
  advect_rk3(g, bm.wy, vel, dt, bc, &sy);
}

// ---------------------------------------------------------------------------
// PDE reinitialization: d(phi)/dtau + S(phi0) (|grad phi| - 1) = 0, Godunov flux,
// WENO5 one-sided gradients, smoothed sign frozen at entry.

template <class Scalar>
void reinitialize(const GridSpec& g, CellFieldT<Scalar>& phi, const BoundarySpec& bc,
                  int steps = 5, Scalar dtau_factor = Scalar(0.3)) {
  const auto ctx = detail::make_ctx<Scalar>(g, bc);
  const Scalar h = Scalar(std::min(g.dx, g.dy));
  const Scalar dtau = dtau_factor * h;

  fill_ghosts(phi, bc);

  // Cells straddling the entry zero contour evolve toward the subcell distance
  // estimate D instead of the PDE update, pinning the contour where it started;
  // everywhere else the Godunov Hamiltonian with the smoothed entry sign applies.
  //
  // D = h phi / denom, where denom is the largest of the central gradient norm
  // and the four one-sided differences so thin features cannot collapse it.
  // A cell whose entry value already agrees with D to within half a percent of
  // a cell keeps the entry value: a settled field is then a fixed point of the
  // anchor and repeated redistancing cannot make the enclosed area creep, while
  // corrections of any real size still apply in full.
  CellFieldT<Scalar> sgn(g.nx, g.ny);
  CellFieldT<char> interface_cell(g.nx, g.ny);
  CellFieldT<Scalar> dist(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Scalar p = phi(i, j);
      sgn(i, j) = p / std::sqrt(p * p + h * h);
      const bool cut = p == Scalar(0) || p * phi(i + 1, j) < 0 || p * phi(i - 1, j) < 0 ||
                       p * phi(i, j + 1) < 0 || p * phi(i, j - 1) < 0;
      interface_cell(i, j) = cut ? 1 : 0;
      if (!cut) continue;
      const Scalar gx = (phi(i + 1, j) - phi(i - 1, j)) / 2;
      const Scalar gy = (phi(i, j + 1) - phi(i, j - 1)) / 2;
      Scalar denom = std::sqrt(gx * gx + gy * gy);
      denom = std::max(denom, std::abs(phi(i + 1, j) - p));
      denom = std::max(denom, std::abs(p - phi(i - 1, j)));
      denom = std::max(denom, std::abs(phi(i, j + 1) - p));
      denom = std::max(denom, std::abs(p - phi(i, j - 1)));
      denom = std::max(denom, Scalar(1e-12));
      const Scalar d = h * p / denom;
      dist(i, j) = std::abs(p - d) <= Scalar(5e-3) * h ? p : d;
    }

  CellFieldT<Scalar> upd(g.nx, g.ny);
  for (int s = 0; s < steps; ++s) {
    parallel_for_rows(g.ny, [&](int j) {
      for (int i = 0; i < g.nx; ++i) {
        if (interface_cell(i, j)) {
          const Scalar sr = sgn(i, j) >= 0 ? Scalar(1) : Scalar(-1);
          upd(i, j) = -(dtau / h) * (sr * std::abs(phi(i, j)) - dist(i, j));
          continue;
        }
        const Scalar a = ctx.dx_minus(phi, i, j), b = ctx.dx_plus(phi, i, j);
        const Scalar c = ctx.dy_minus(phi, i, j), d = ctx.dy_plus(phi, i, j);
        Scalar gx2, gy2;
        if (sgn(i, j) >= 0) {
          gx2 = std::max(std::max(a, Scalar(0)) * std::max(a, Scalar(0)),
                         std::min(b, Scalar(0)) * std::min(b, Scalar(0)));
          gy2 = std::max(std::max(c, Scalar(0)) * std::max(c, Scalar(0)),
                         std::min(d, Scalar(0)) * std::min(d, Scalar(0)));
        } else {
          gx2 = std::max(std::min(a, Scalar(0)) * std::min(a, Scalar(0)),
                         std::max(b, Scalar(0)) * std::max(b, Scalar(0)));
          gy2 = std::max(std::min(c, Scalar(0)) * std::min(c, Scalar(0)),
                         std::max(d, Scalar(0)) * std::max(d, Scalar(0)));
        }
        upd(i, j) = -dtau * sgn(i, j) * (std::sqrt(gx2 + gy2) - Scalar(1));
      }
    });
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) phi(i, j) += upd(i, j);
    fill_ghosts(phi, bc);
  }
}

// ---------------------------------------------------------------------------
// Two-pass extrapolation of W across the interface: first transport the normal
// derivative outward to steady state, then transport W itself with that
// derivative as source. Updates act only where H(phi/eps) > 0, so the region
// phi <= -eps is untouched bit for bit.

namespace detail {

template <class Scalar>
void extrapolate_component(const GridSpec& g, CellFieldT<Scalar>& w, const CellFieldT<Scalar>& gate,
                           const NormalFieldT<Scalar>& n, const BoundarySpec& bc, int steps,
                           Scalar dtau) {
  // one-sided derivative against the direction information comes from
  auto dir_deriv = [&](const CellFieldT<Scalar>& f, int i, int j) {
    const Scalar nx = n.nx(i, j), ny = n.ny(i, j);
    const Scalar fx = nx > 0 ? (f(i, j) - f(i - 1, j)) / Scalar(g.dx)
                             : (f(i + 1, j) - f(i, j)) / Scalar(g.dx);
    const Scalar fy = ny > 0 ? (f(i, j) - f(i, j - 1)) / Scalar(g.dy)
                             : (f(i, j + 1) - f(i, j)) / Scalar(g.dy);
    return nx * fx + ny * fy;
  };

  CellFieldT<Scalar> yn(g.nx, g.ny);
  fill_ghosts(w, bc);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      yn(i, j) = n.nx(i, j) * (w(i + 1, j) - w(i - 1, j)) / (Scalar(2) * Scalar(g.dx)) +
                 n.ny(i, j) * (w(i, j + 1) - w(i, j - 1)) / (Scalar(2) * Scalar(g.dy));
  fill_ghosts(yn, bc);

  CellFieldT<Scalar> upd(g.nx, g.ny);
  for (int s = 0; s < steps; ++s) {
    parallel_for_rows(g.ny, [&](int j) {
      for (int i = 0; i < g.nx; ++i)
        upd(i, j) = gate(i, j) > 0 ? -dtau * gate(i, j) * dir_deriv(yn, i, j) : Scalar(0);
    });
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (upd(i, j) != Scalar(0)) yn(i, j) += upd(i, j);
    fill_ghosts(yn, bc);
  }
  for (int s = 0; s < steps; ++s) {
    parallel_for_rows(g.ny, [&](int j) {
      for (int i = 0; i < g.nx; ++i)
        upd(i, j) =
            gate(i, j) > 0 ? -dtau * gate(i, j) * (dir_deriv(w, i, j) - yn(i, j)) : Scalar(0);
    });
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (upd(i, j) != Scalar(0)) w(i, j) += upd(i, j);
    fill_ghosts(w, bc);
  }
}

}  // namespace detail

template <class Scalar>
void extrapolate_backward_map(const GridSpec& g, BackwardMapT<Scalar>& bm,
                              const CellFieldT<Scalar>& phi, Scalar eps, const BoundarySpec& bc,
                              int steps = 10, Scalar dtau_factor = Scalar(0.3)) {
  const auto n = compute_normals(g, phi);
  CellFieldT<Scalar> gate(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) gate(i, j) = smooth_heaviside(phi(i, j), eps);
  const Scalar dtau = dtau_factor * Scalar(std::min(g.dx, g.dy));
  detail::extrapolate_component(g, bm.wx, gate, n, bc, steps, dtau);
  detail::extrapolate_component(g, bm.wy, gate, n, bc, steps, dtau);
}

}  // namespace memfsi
