// Validation harness for the discretized coupling operators: assemble
//   10 u + div( (u.grad)M - M[grad u] - [grad u]^T M - ([grad u]:M) M ) = S
// on the unit square with a known smooth solution, solve, and measure the
// convergence of the face-based discretization. The +10 mass term mirrors the
// diagonal contributions that are always present in the full momentum system.
#pragma once

#include <Eigen/Dense>

#include <memfsi/grid.hpp>
#include <memfsi/sparse.hpp>

#include <iosfwd>
#include <vector>

namespace memfsi {

// term groups of the validation operator, combinable as a mask
enum MsTerms : unsigned {
  kMsMass = 1u,           // +10 u
  kMsAdvection = 2u,      // +div((u.grad)M)
  kMsLeftGradient = 4u,   // -div(M[grad u])
  kMsRightGradient = 8u,  // -div([grad u]^T M)
  kMsContraction = 16u,   // -div(([grad u]:M) M)
  kMsAll = 31u,
};

// exact solution: both velocity components equal sin(pi x) sin(pi y)
double ms_exact_velocity(double x, double y);
// coefficient shared by every entry of M: 1 + sin(pi x y)
double ms_coefficient(double x, double y);
// manufactured source, closed form (cross-checked against a high-order
// finite-difference oracle in the tests before freezing)
Eigen::Vector2d ms_source(double x, double y);

// cell samples of ms_coefficient including the full ghost ring
CellField sample_ms_coefficient(const GridSpec& g);

// Staggered assembly over the packed face unknowns (same layout as the momentum
// system). Boundary faces are pinned to the exact value 0 by identity rows; ghost
// references fold back by odd reflection, which is exact for the chosen solution.
// m must have its ghost ring populated; the rhs always samples ms_source.
SparseSystem assemble_ms_system(const GridSpec& g, const CellField& m, unsigned terms = kMsAll);
SparseSystem assemble_ms_system(const GridSpec& g, unsigned terms = kMsAll);

struct MsSolution {
  FaceVectorField vel;
  int iterations = 0;
  double rel_residual = 0;
};

MsSolution solve_ms_case(const GridSpec& g, double tol = 1e-11, int max_iter = 100000,
                         KrylovMethod method = KrylovMethod::BiCgStab);

// cell-area-weighted L2 norm of the face-sampled difference to the exact solution
double ms_l2_error(const GridSpec& g, const FaceVectorField& vel);

// observed orders between successive meshes: log(e_k/e_{k+1}) / log(h_k/h_{k+1})
std::vector<double> convergence_orders(const std::vector<double>& errors,
                                       const std::vector<int>& meshes);

struct MsSweepRow {
  int elem = 0;
  double error = 0;
  int iterations = 0;
};

std::vector<MsSweepRow> run_ms_sweep(const std::vector<int>& meshes, double tol = 1e-11,
                                     int max_iter = 100000,
                                     KrylovMethod method = KrylovMethod::BiCgStab,
                                     std::ostream* diag = nullptr);

// "elem,error" rows consumed by the convergence plot
void write_ms_csv(std::ostream& os, const std::vector<MsSweepRow>& rows);

}  // namespace memfsi
