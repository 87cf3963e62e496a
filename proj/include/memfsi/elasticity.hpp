// Membrane elasticity: deformation tensors from the backward map, the area-variation
// measure Z (trace formula and level-set formula), Evan-Skalak stress, the smoothed
// elastic force at faces, and the stress-evolution pieces used by the semi-implicit
// scheme.
#pragma once

#include <memfsi/grid.hpp>
#include <memfsi/kinematics.hpp>

#include <Eigen/Dense>

namespace memfsi {

template <class Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <class Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

// cell-centered 2x2 tensor field, component-of-arrays layout
template <class Scalar>
struct Tensor2FieldT {
  CellFieldT<Scalar> t11, t12, t21, t22;
  Tensor2FieldT() = default;
  Tensor2FieldT(int nx, int ny) : t11(nx, ny), t12(nx, ny), t21(nx, ny), t22(nx, ny) {}
  Mat2<Scalar> at(int i, int j) const {
    Mat2<Scalar> m;
    m << t11(i, j), t12(i, j), t21(i, j), t22(i, j);
    return m;
  }
  void set(int i, int j, const Mat2<Scalar>& m) {
    t11(i, j) = m(0, 0);
    t12(i, j) = m(0, 1);
    t21(i, j) = m(1, 0);
    t22(i, j) = m(1, 1);
  }
};

template <class Scalar>
struct SymTensorFieldT {
  CellFieldT<Scalar> xx, xy, yy;
  SymTensorFieldT() = default;
  SymTensorFieldT(int nx, int ny) : xx(nx, ny), xy(nx, ny), yy(nx, ny) {}
  Mat2<Scalar> at(int i, int j) const {
    Mat2<Scalar> m;
    m << xx(i, j), xy(i, j), xy(i, j), yy(i, j);
    return m;
  }
  void set(int i, int j, const Mat2<Scalar>& m) {
    xx(i, j) = m(0, 0);
    xy(i, j) = Scalar(0.5) * (m(0, 1) + m(1, 0));
    yy(i, j) = m(1, 1);
  }
  void set_zero() {
    xx.set_constant(0);
    xy.set_constant(0);
    yy.set_constant(0);
  }
};
using Tensor2Field = Tensor2FieldT<double>;
using SymTensorField = SymTensorFieldT<double>;

// ---------------------------------------------------------------------------
// Deformation pipeline, per cell.  Convention throughout: [G]_ij = dG_i/dx_j.

template <class Scalar>
Tensor2FieldT<Scalar> compute_grad_y(const GridSpec& g, const BackwardMapT<Scalar>& bm) {
  Tensor2FieldT<Scalar> gy(g.nx, g.ny);
  const Scalar hx = Scalar(2) * Scalar(g.dx), hy = Scalar(2) * Scalar(g.dy);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      gy.t11(i, j) = Scalar(1) + (bm.wx(i + 1, j) - bm.wx(i - 1, j)) / hx;
      gy.t12(i, j) = (bm.wx(i, j + 1) - bm.wx(i, j - 1)) / hy;
      gy.t21(i, j) = (bm.wy(i + 1, j) - bm.wy(i - 1, j)) / hx;
      gy.t22(i, j) = Scalar(1) + (bm.wy(i, j + 1) - bm.wy(i, j - 1)) / hy;
    }
  return gy;
}

// left Cauchy-Green tensor of the inverse deformation: B = [grad Y]^-1 [grad Y]^-T
template <class Scalar>
Mat2<Scalar> compute_b(const Mat2<Scalar>& grad_y) {
  const Mat2<Scalar> inv = grad_y.inverse();
  return inv * inv.transpose();
}

// surface tensor: B with the (Bn) direction projected out; n is its null vector
template <class Scalar>
Mat2<Scalar> compute_a(const Mat2<Scalar>& b, const Vec2<Scalar>& n) {
  const Vec2<Scalar> bn = b * n;
  return b - (bn * bn.transpose()) / bn.dot(n);
}

template <class Scalar>
Scalar compute_z(const Mat2<Scalar>& a) {
  return std::sqrt(std::max(a.trace(), Scalar(0)));
}

// level-set route: Z = J |grad phi| / |grad phi0(Y)|, J = 1/det(grad Y)
template <class Scalar, class GradMag0>
CellFieldT<Scalar> compute_z_alt(const GridSpec& g, const CellFieldT<Scalar>& phi,
                                 const BackwardMapT<Scalar>& bm,
                                 const Tensor2FieldT<Scalar>& grad_y, GradMag0&& grad_phi0_mag) {
  CellFieldT<Scalar> z(g.nx, g.ny, Scalar(1));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Scalar det = grad_y.t11(i, j) * grad_y.t22(i, j) - grad_y.t12(i, j) * grad_y.t21(i, j);
      const Scalar gx = (phi(i + 1, j) - phi(i - 1, j)) / (Scalar(2) * Scalar(g.dx));
      const Scalar gy = (phi(i, j + 1) - phi(i, j - 1)) / (Scalar(2) * Scalar(g.dy));
      const Scalar denom = grad_phi0_mag(bm.y1(g, i, j), bm.y2(g, i, j));
      z(i, j) = std::sqrt(gx * gx + gy * gy) / (det * denom);
    }
  return z;
}

template <class Scalar>
struct EvanSkalak {
  Scalar f, f_prime;
};

template <class Scalar>
EvanSkalak<Scalar> evan_skalak(Scalar z, Scalar stiffness) {
  return {stiffness * (z - Scalar(1)) * z, stiffness * (Scalar(2) * z - Scalar(1))};
}

template <class Scalar>
Mat2<Scalar> stress_matrix(Scalar f, const Vec2<Scalar>& n) {
  return f * (Mat2<Scalar>::Identity() - n * n.transpose());
}

// ---------------------------------------------------------------------------
// Elastic force at velocity faces: F = delta_eps(phi at face) * div(sigma).
// The off-diagonal stress is taken through corner interpolation so the divergence
// lands naturally on the staggered face.

template <class Scalar>
FaceVectorFieldT<Scalar> elastic_force(const GridSpec& g, const SymTensorFieldT<Scalar>& sigma,
                                       const CellFieldT<Scalar>& phi, Scalar eps) {
  FaceVectorFieldT<Scalar> f(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int I = 1; I < g.nx; ++I) {
      const Scalar phi_f = Scalar(0.5) * (phi(I - 1, j) + phi(I, j));
      const Scalar delta = smooth_delta(phi_f, eps);
      if (delta == Scalar(0)) continue;
      const Scalar dxx = (sigma.xx(I, j) - sigma.xx(I - 1, j)) / Scalar(g.dx);
      const Scalar dxy = (interp_cell_to_corner(sigma.xy, I, j + 1) -
                          interp_cell_to_corner(sigma.xy, I, j)) /
                         Scalar(g.dy);
      f.u(I, j) = delta * (dxx + dxy);
    }
  for (int J = 1; J < g.ny; ++J)
    for (int i = 0; i < g.nx; ++i) {
      const Scalar phi_f = Scalar(0.5) * (phi(i, J - 1) + phi(i, J));
      const Scalar delta = smooth_delta(phi_f, eps);
      if (delta == Scalar(0)) continue;
      const Scalar dyy = (sigma.yy(i, J) - sigma.yy(i, J - 1)) / Scalar(g.dy);
      const Scalar dxy = (interp_cell_to_corner(sigma.xy, i + 1, J) -
                          interp_cell_to_corner(sigma.xy, i, J)) /
                         Scalar(g.dx);
      f.v(i, J) = delta * (dyy + dxy);
    }
  return f;
}

// ---------------------------------------------------------------------------
// Stress evolution (material frame): D(sigma)/Dt = rhs, advection handled by caller.

template <class Scalar>
Mat2<Scalar> stress_evolution_rhs(const Mat2<Scalar>& grad_u, const Vec2<Scalar>& n, Scalar z,
                                  Scalar stiffness) {
  const auto [f, fp] = evan_skalak(z, stiffness);
  const Mat2<Scalar> nn = n * n.transpose();
  const Mat2<Scalar> c = Mat2<Scalar>::Identity() - nn;
  const Scalar gu_c = grad_u.cwiseProduct(c).sum();
  const Scalar gunn = (grad_u * n).dot(n);
  return (fp * z * gu_c) * c +
         f * (grad_u.transpose() * nn + nn * grad_u - Scalar(2) * gunn * nn);
}

// the part of the evolution kept implicit in u by the semi-implicit scheme
template <class Scalar>
Mat2<Scalar> t_operator(Scalar z, const Vec2<Scalar>& n, const Mat2<Scalar>& grad_u,
                        Scalar stiffness) {
  const auto [f, fp] = evan_skalak(z, stiffness);
  const Mat2<Scalar> nn = n * n.transpose();
  const Mat2<Scalar> c = Mat2<Scalar>::Identity() - nn;
  const Scalar gu_c = grad_u.cwiseProduct(c).sum();
  const Scalar gunn = (grad_u * n).dot(n);
  return (fp * z * gu_c) * c - Scalar(2) * f * gunn * nn;
}

// MAC-natural velocity gradient at a cell center
template <class Scalar>
Mat2<Scalar> velocity_gradient_at_cell(const GridSpec& g, const FaceVectorFieldT<Scalar>& vel,
                                       int i, int j) {
  Mat2<Scalar> gu;
  gu(0, 0) = (vel.u(i + 1, j) - vel.u(i, j)) / Scalar(g.dx);
  gu(1, 1) = (vel.v(i, j + 1) - vel.v(i, j)) / Scalar(g.dy);
  gu(0, 1) = (u_at_cell(vel, i, j + 1) - u_at_cell(vel, i, j - 1)) / (Scalar(2) * Scalar(g.dy));
  gu(1, 0) = (v_at_cell(vel, i + 1, j) - v_at_cell(vel, i - 1, j)) / (Scalar(2) * Scalar(g.dx));
  return gu;
}

// Residual of the area-variation transport equation dZ/dt + u.grad Z = Z (grad u : C)
// on two consecutive states; diagnostic for manufactured-flow tests.
template <class Scalar>
CellFieldT<Scalar> verify_z_evolution(const GridSpec& g, const CellFieldT<Scalar>& z_old,
                                      const CellFieldT<Scalar>& z_new, Scalar dt,
                                      const FaceVectorFieldT<Scalar>& vel,
                                      const NormalFieldT<Scalar>& n) {
  CellFieldT<Scalar> res(g.nx, g.ny);
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) {
      const Scalar zm = Scalar(0.5) * (z_old(i, j) + z_new(i, j));
      const Scalar zx =
          (Scalar(0.5) * (z_old(i + 1, j) + z_new(i + 1, j)) -
           Scalar(0.5) * (z_old(i - 1, j) + z_new(i - 1, j))) /
          (Scalar(2) * Scalar(g.dx));
      const Scalar zy =
          (Scalar(0.5) * (z_old(i, j + 1) + z_new(i, j + 1)) -
           Scalar(0.5) * (z_old(i, j - 1) + z_new(i, j - 1))) /
          (Scalar(2) * Scalar(g.dy));
      const Mat2<Scalar> gu = velocity_gradient_at_cell(g, vel, i, j);
      Vec2<Scalar> nv;
      nv << n.nx(i, j), n.ny(i, j);
      const Mat2<Scalar> c = Mat2<Scalar>::Identity() - nv * nv.transpose();
      const Scalar gu_c = gu.cwiseProduct(c).sum();
      res(i, j) = (z_new(i, j) - z_old(i, j)) / dt + u_at_cell(vel, i, j) * zx +
                  v_at_cell(vel, i, j) * zy - zm * gu_c;
    }
  return res;
}

}  // namespace memfsi
