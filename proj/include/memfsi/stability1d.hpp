#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

namespace memfsi {

// linearized 1D membrane model on a periodic grid: du/dt - mu u_xx = -(K/eps) Y_xx,
// dY/dt + u = 0, with Y stored as the displacement w = Y - x so that the field is
// periodic and the flat state is exactly w = 0
struct Model1DParams {
  double mu = 1.0;
  double stiffness = 1.0;
  double eps = 0.1;
  double dx = 0.1;
  double dt = 0.01;
  int n_cells = 32;
};

enum class Scheme1D { Explicit, Implicit, SemiImplicit };
enum class Stability { Stable, Unstable };

struct State1D {
  Eigen::VectorXd u, w;
};

struct AmplificationPair {
  double alpha = 1.0;
  double beta = 0.0;
  Eigen::Matrix2d a_matrix, b_matrix;
};

// largest time step for which the explicit coupling is provably stable
double explicit_dt_bound(const Model1DParams& prm);

// Von Neumann amplification pair of the semi-implicit scheme at mode angle theta
AmplificationPair amplification(const Model1DParams& prm, double theta);

// max |lambda| of A^-1 B from the closed-form quadratic
double spectral_radius_semi_implicit(const Model1DParams& prm, double theta);

State1D flat_state(const Model1DParams& prm);

// one step of the selected coupling; the viscous part is implicit in every scheme
void step_1d(State1D& st, const Model1DParams& prm, Scheme1D scheme);

// marches a single Fourier mode and fits the two-term recurrence of its DFT
// coefficient, returning the measured per-step amplification
double measure_amplification(const Model1DParams& prm, Scheme1D scheme, int mode, int steps);

// empirical classification from a sine-mode march: stable when the amplitude never
// exceeds 1e6 x initial and the end energy stays below 10 x initial
Stability classify_stability(const Model1DParams& prm, Scheme1D scheme, int horizon_steps);

void write_spectral_radius_csv(std::ostream& os, const std::vector<Model1DParams>& cases,
                               int n_theta);
void write_classification_csv(std::ostream& os, const std::vector<Model1DParams>& cases,
                              Scheme1D scheme, int horizon_steps);

}  // namespace memfsi
