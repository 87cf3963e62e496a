// Shear-flow benchmark driver: nondimensional case setup (Re, Ca -> rho, mu, K),
// run orchestration with contour/area tracking, marching-squares isoline extraction,
// Hausdorff comparison of membrane shapes, and maximum-stable-dt bisection.
#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <memfsi/ns_solver.hpp>

namespace memfsi {

struct CaseConfig {
  int nx = 128;
  int ny = 64;
  double x_min = -4.0, x_max = 4.0;
  double y_min = -2.0, y_max = 2.0;
  double a = 0.5;          // membrane radius
  double gamma_dot = 1.0;  // wall shear rate
  double rho = 1.0;
  double reynolds = 0.1;   // rho a^2 gamma_dot / mu1
  double capillary = 0.01;       // mu1 a gamma_dot / K
  double viscosity_ratio = 1.0;  // mu_inner / mu_outer
  // direct physics overrides for degenerate nondimensional input (gamma_dot = 0);
  // negative means derive from reynolds and capillary
  double mu_direct = -1.0;
  double k_direct = -1.0;
  double dt = 1e-2;
  double t_final = 1.5;
  SchemeMode mode = SchemeMode::Explicit;
  double snapshot_every = 0.1;  // <= 0 disables scheduled snapshots
  int reinit_every = 1;
  // 0 = auto: enough pseudo-steps to rebuild the distance field across the whole
  // domain, which erases transport noise in the far field where the wall-speed
  // CFL number exceeds the explicit transport stability limit
  int reinit_steps = 0;
  int extrap_steps = 10;
  double tol_momentum = 1e-8;
  double tol_poisson = 1e-10;
  int max_iterations = 20000;
  KrylovMethod method = KrylovMethod::BiCgStab;

  double mu1() const { return mu_direct >= 0.0 ? mu_direct : rho * a * a * gamma_dot / reynolds; }
  double stiffness() const { return k_direct >= 0.0 ? k_direct : mu1() * a * gamma_dot / capillary; }
  GridSpec grid() const { return GridSpec::make(nx, ny, x_min, x_max, y_min, y_max); }
  NsParams params() const;
};

struct ContourPolyline {
  std::vector<Eigen::Vector2d> vertices;  // counterclockwise; last connects back to first
  bool closed = false;
  double enclosed_area = 0.0;
};

class ContourError : public std::runtime_error {
 public:
  ContourError(const std::string& what, int component_count);
  int components;  // 0 when the isoline is open
};

FlowState init_shear_case(const CaseConfig& cfg);

struct RunReport {
  explicit RunReport(FlowState s) : state(std::move(s)) {}

  FlowState state;
  std::vector<double> times;
  std::vector<double> areas;
  std::vector<StepDiagnostics> diagnostics;
  ContourPolyline final_contour;
  double initial_area = 0.0;
  int steps = 0;
};

// Steps to t_final tracking the contour area each step; scheduled field snapshots go
// under out_dir when it is non-empty. BlowUp, solver failures and contour breakup
// propagate to the caller.
RunReport run_case(const CaseConfig& cfg, const std::string& out_dir = std::string(),
                   std::ostream* diag = nullptr);

ContourPolyline extract_contour(const GridSpec& g, const CellField& phi);

double hausdorff_distance(const ContourPolyline& c1, const ContourPolyline& c2);

// bilinear sample of the staggered velocity at an arbitrary in-domain point
Eigen::Vector2d sample_velocity(const GridSpec& g, const FaceVectorField& vel, double x, double y);

// Bisects on "run completes and the final contour is simple and closed" between a
// verified stable dt_lo and unstable dt_hi; returns the largest passing dt once the
// bracket is narrower than rel_tol * lo.
double max_stable_dt_search(const CaseConfig& config_template, SchemeMode scheme, double dt_lo,
                            double dt_hi, double rel_tol = 0.1, std::ostream* diag = nullptr);

struct DtTableRow {
  int nx = 0;
  int ny = 0;
  double capillary = 0.0;
  SchemeMode mode = SchemeMode::Explicit;
  double max_dt = 0.0;
};

const char* scheme_name(SchemeMode mode);

// columns mesh,ca,scheme,max_dt,ratio; ratio = SI max_dt / EX max_dt for the matching
// (mesh, ca) pair, printed on both rows of the pair and empty for unpaired rows
void write_dt_table_csv(std::ostream& os, const std::vector<DtTableRow>& rows);

void write_contour_csv(std::ostream& os, const ContourPolyline& c);
ContourPolyline read_contour_csv(std::istream& is);

void write_area_series_csv(std::ostream& os, const std::vector<double>& times,
                           const std::vector<double>& areas);

}  // namespace memfsi
