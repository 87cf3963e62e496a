#include <memfsi/stability1d.hpp>

#include <memfsi/grid.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace memfsi {

namespace {

// cyclic second difference / dx^2
Eigen::VectorXd laplacian_1d(const Eigen::VectorXd& f, double dx) {
  const int n = static_cast<int>(f.size());
  Eigen::VectorXd out(n);
  const double s = 1.0 / (dx * dx);
  for (int j = 0; j < n; ++j) {
    const double fp = f[(j + 1) % n], fm = f[(j + n - 1) % n];
    out[j] = (fp - 2.0 * f[j] + fm) * s;
  }
  return out;
}

// solves (diag d, off-diagonals o, cyclic corners o) x = r by Sherman-Morrison
// around a plain Thomas sweep
Eigen::VectorXd cyclic_thomas(int n, double d, double o, const Eigen::VectorXd& r) {
  if (n < 3) throw std::invalid_argument("cyclic tridiagonal solve needs at least 3 unknowns");
  const double gamma = -d;
  Eigen::VectorXd b(n);
  b.setConstant(d);
  b[0] = d - gamma;
  b[n - 1] = d - o * o / gamma;

  auto thomas = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd c(n), x(n);
    double beta = b[0];
    if (beta == 0.0) throw std::runtime_error("singular tridiagonal system");
    x[0] = rhs[0] / beta;
    for (int j = 1; j < n; ++j) {
      c[j] = o / beta;
      beta = b[j] - o * c[j];
      if (beta == 0.0) throw std::runtime_error("singular tridiagonal system");
      x[j] = (rhs[j] - o * x[j - 1]) / beta;
    }
    for (int j = n - 2; j >= 0; --j) x[j] -= c[j + 1] * x[j + 1];
    return x;
  };

  const Eigen::VectorXd y = thomas(r);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  u[0] = gamma;
  u[n - 1] = o;
  const Eigen::VectorXd z = thomas(u);
  const double vy = y[0] + o / gamma * y[n - 1];
  const double vz = z[0] + o / gamma * z[n - 1];
  return y - z * (vy / (1.0 + vz));
}

double mode_factor(const Model1DParams& prm, double theta) {
  const double s = std::sin(0.5 * theta);
  return 4.0 * prm.dt / (prm.dx * prm.dx) * s * s;
}

}  // namespace

double explicit_dt_bound(const Model1DParams& prm) {
  const double me = prm.mu * prm.eps;
  const double se = std::sqrt(prm.stiffness * prm.eps) * prm.dx;
  return (me + std::max(me, se)) / prm.stiffness;
}

AmplificationPair amplification(const Model1DParams& prm, double theta) {
  AmplificationPair p;
  const double f = mode_factor(prm, theta);
  p.alpha = 1.0 + f * (prm.mu + prm.dt * prm.stiffness / prm.eps);
  p.beta = f * prm.stiffness / prm.eps;
  p.a_matrix << p.alpha, 0.0, prm.dt, 1.0;
  p.b_matrix << 1.0, p.beta, 0.0, 1.0;
  return p;
}

double spectral_radius_semi_implicit(const Model1DParams& prm, double theta) {
  // alpha l^2 - (1 + alpha - dt beta) l + 1 = 0 with alpha = 1 + f mu + h and
  // dt beta = h; the trace is 2 + f mu and the discriminant (f mu)^2 - 4h, which
  // avoids the cancellation of the naive quadratic-formula evaluation
  const double f = mode_factor(prm, theta);
  const double fmu = f * prm.mu;
  const double h = prm.dt * f * prm.stiffness / prm.eps;
  const double alpha = 1.0 + fmu + h;
  const double d2 = fmu * fmu - 4.0 * h;
  if (d2 <= 0.0) return 1.0 / std::sqrt(alpha);
  return (2.0 + fmu + std::sqrt(d2)) / (2.0 * alpha);
}

State1D flat_state(const Model1DParams& prm) {
  State1D st;
  st.u = Eigen::VectorXd::Zero(prm.n_cells);
  st.w = Eigen::VectorXd::Zero(prm.n_cells);
  return st;
}

void step_1d(State1D& st, const Model1DParams& prm, Scheme1D scheme) {
  const int n = prm.n_cells;
  const double ke = prm.stiffness / prm.eps;

  if (scheme == Scheme1D::Implicit) {
    // coupled 2-block system: (I/dt - mu L) u + ke L w_new = u/dt;  dt u + w_new = w
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::VectorXd r(2 * n);
    const double s = 1.0 / (prm.dx * prm.dx);
    for (int j = 0; j < n; ++j) {
      const int jp = (j + 1) % n, jm = (j + n - 1) % n;
      a(j, j) = 1.0 / prm.dt + 2.0 * prm.mu * s;
      a(j, jp) -= prm.mu * s;
      a(j, jm) -= prm.mu * s;
      a(j, n + j) -= 2.0 * ke * s;
      a(j, n + jp) += ke * s;
      a(j, n + jm) += ke * s;
      a(n + j, j) = prm.dt;
      a(n + j, n + j) = 1.0;
      r[j] = st.u[j] / prm.dt;
      r[n + j] = st.w[j];
    }
    const Eigen::VectorXd x = a.partialPivLu().solve(r);
    st.u = x.head(n);
    st.w = x.tail(n);
    return;
  }

  const double nu =
      scheme == Scheme1D::SemiImplicit ? prm.mu + prm.dt * ke : prm.mu;
  const Eigen::VectorXd rhs = st.u / prm.dt - ke * laplacian_1d(st.w, prm.dx);
  const double s = nu / (prm.dx * prm.dx);
  st.u = cyclic_thomas(n, 1.0 / prm.dt + 2.0 * s, -s, rhs);
  st.w -= prm.dt * st.u;
}

double measure_amplification(const Model1DParams& prm, Scheme1D scheme, int mode, int steps) {
  const int n = prm.n_cells;
  if (steps < 4) throw std::invalid_argument("amplification fit needs a longer march");
  State1D st = flat_state(prm);
  const double theta = 2.0 * std::numbers::pi * mode / n;
  for (int j = 0; j < n; ++j) st.u[j] = std::sin(theta * j);

  auto coefficient = [&]() {
    std::complex<double> c(0.0, 0.0);
    for (int j = 0; j < n; ++j)
      c += st.u[j] * std::exp(std::complex<double>(0.0, -theta * j));
    return c;
  };

  // the march stops once the mode coefficient leaves the window where it still
  // dominates the other-mode roundoff noise; the recurrence fit weights itself
  // toward the clean large-magnitude part of the trajectory
  std::vector<std::complex<double>> c;
  c.push_back(coefficient());
  const double c0 = std::abs(c.front());
  if (c0 == 0.0) return 0.0;
  for (int s = 0; s < steps; ++s) {
    step_1d(st, prm, scheme);
    c.push_back(coefficient());
    const double mag = std::abs(c.back());
    if (c.size() >= 5 && (mag < 1e-12 * c0 || mag > 1e30 * c0)) break;
  }

  double scale = 0.0;
  for (const auto& v : c) scale = std::max(scale, std::abs(v));
  for (auto& v : c) v /= scale;

  // the mode coefficient obeys c_{s+2} = p c_{s+1} + q c_s with real p, q
  const int rows = static_cast<int>(c.size()) - 2;
  Eigen::MatrixXd a(2 * rows, 2);
  Eigen::VectorXd b(2 * rows);
  for (int s = 0; s < rows; ++s) {
    a(2 * s, 0) = c[s + 1].real();
    a(2 * s, 1) = c[s].real();
    b[2 * s] = c[s + 2].real();
    a(2 * s + 1, 0) = c[s + 1].imag();
    a(2 * s + 1, 1) = c[s].imag();
    b[2 * s + 1] = c[s + 2].imag();
  }
  const auto qr = a.colPivHouseholderQr();
  if (qr.rank() < 2) {
    // pure geometric decay: a single surviving mode
    return std::abs(c.back() / c[c.size() - 2]);
  }
  const Eigen::Vector2d pq = qr.solve(b);
  const std::complex<double> disc = std::sqrt(std::complex<double>(pq[0] * pq[0] + 4.0 * pq[1]));
  const double l1 = std::abs((pq[0] + disc) / 2.0);
  const double l2 = std::abs((pq[0] - disc) / 2.0);
  return std::max(l1, l2);
}

Stability classify_stability(const Model1DParams& prm, Scheme1D scheme, int horizon_steps) {
  const int n = prm.n_cells;
  State1D st = flat_state(prm);
  const double length = n * prm.dx;
  for (int j = 0; j < n; ++j)
    st.u[j] = std::sin(2.0 * std::numbers::pi * j * prm.dx / length);

  auto energy = [&]() {
    double e = st.u.squaredNorm();
    const double ke = prm.stiffness / prm.eps;
    for (int j = 0; j < n; ++j) {
      const double dw = (st.w[(j + 1) % n] - st.w[j]) / prm.dx;
      e += ke * dw * dw;
    }
    return e;
  };

  const double amp0 = st.u.cwiseAbs().maxCoeff();
  const double e0 = energy();
  for (int s = 0; s < horizon_steps; ++s) {
    step_1d(st, prm, scheme);
    const double amp = st.u.cwiseAbs().maxCoeff();
    if (!std::isfinite(amp) || amp > 1e6 * amp0) return Stability::Unstable;
  }
  return energy() <= 10.0 * e0 ? Stability::Stable : Stability::Unstable;
}

void write_spectral_radius_csv(std::ostream& os, const std::vector<Model1DParams>& cases,
                               int n_theta) {
  os << "theta,dt,dx,mu,K,eps,rho_semi_implicit\n";
  for (const Model1DParams& prm : cases) {
    for (int t = 0; t < n_theta; ++t) {
      const double theta = 2.0 * std::numbers::pi * t / n_theta;
      os << format_g17(theta) << ',' << format_g17(prm.dt) << ',' << format_g17(prm.dx) << ','
         << format_g17(prm.mu) << ',' << format_g17(prm.stiffness) << ',' << format_g17(prm.eps)
         << ',' << format_g17(spectral_radius_semi_implicit(prm, theta)) << '\n';
    }
  }
}

void write_classification_csv(std::ostream& os, const std::vector<Model1DParams>& cases,
                              Scheme1D scheme, int horizon_steps) {
  const char* tag = scheme == Scheme1D::Explicit     ? "explicit"
                    : scheme == Scheme1D::Implicit   ? "implicit"
                                                     : "semi_implicit";
  os << "scheme,dt,dx,mu,K,eps,result\n";
  for (const Model1DParams& prm : cases) {
    const Stability r = classify_stability(prm, scheme, horizon_steps);
    os << tag << ',' << format_g17(prm.dt) << ',' << format_g17(prm.dx) << ','
       << format_g17(prm.mu) << ',' << format_g17(prm.stiffness) << ',' << format_g17(prm.eps)
       << ',' << (r == Stability::Stable ? "stable" : "unstable") << '\n';
  }
}

}  // namespace memfsi
