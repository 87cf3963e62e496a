// Uniform staggered (MAC) Cartesian grid: cell-centered scalar fields, face-centered
// velocity components, ghost layers, boundary filling, interpolations and the discrete
// divergence/gradient operators shared by the rest of the solver.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace memfsi {

// Ghost width used by every field (WENO5 needs 3).
inline constexpr int kGhost = 3;

struct GridSpec {
  int nx = 0, ny = 0;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  double dx = 0, dy = 0;

  static GridSpec make(int nx, int ny, double x_min, double x_max, double y_min, double y_max) {
    if (nx <= 0 || ny <= 0 || x_max <= x_min || y_max <= y_min)
      throw std::invalid_argument("GridSpec: bad extents");
    GridSpec g;
    g.nx = nx; g.ny = ny;
    g.x_min = x_min; g.x_max = x_max; g.y_min = y_min; g.y_max = y_max;
    g.dx = (x_max - x_min) / nx;
    g.dy = (y_max - y_min) / ny;
    return g;
  }

  // cell centers
  double xc(int i) const { return x_min + (i + 0.5) * dx; }
  double yc(int j) const { return y_min + (j + 0.5) * dy; }
  // face / corner coordinates
  double xf(int i) const { return x_min + i * dx; }
  double yf(int j) const { return y_min + j * dy; }
};

namespace detail {
template <class Scalar>
using Array2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

// Scalar field at cell centers, index range [-g, n+g) per axis, x fastest in memory.
template <class Scalar>
class CellFieldT {
public:
  CellFieldT() = default;
  CellFieldT(int nx, int ny, Scalar init = Scalar(0))
      : nx_(nx), ny_(ny),
        data_(detail::Array2<Scalar>::Constant(ny + 2 * kGhost, nx + 2 * kGhost, init)) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }

  Scalar& operator()(int i, int j) { return data_(j + kGhost, i + kGhost); }
  const Scalar& operator()(int i, int j) const { return data_(j + kGhost, i + kGhost); }

  detail::Array2<Scalar>& raw() { return data_; }
  const detail::Array2<Scalar>& raw() const { return data_; }

  void set_constant(Scalar c) { data_.setConstant(c); }

  template <class Fn>
  void fill_interior(Fn&& fn) {
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) (*this)(i, j) = fn(i, j);
  }

  Scalar max_abs_interior() const {
    Scalar m = 0;
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }

  bool interior_finite() const {
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (!std::isfinite((*this)(i, j))) return false;
    return true;
  }

private:
  int nx_ = 0, ny_ = 0;
  detail::Array2<Scalar> data_;
};

// Velocity on faces: u on vertical faces (nx+1 per row), v on horizontal faces (ny+1 per column).
template <class Scalar>
class FaceVectorFieldT {
public:
  FaceVectorFieldT() = default;
  FaceVectorFieldT(int nx, int ny, Scalar init = Scalar(0))
      : nx_(nx), ny_(ny),
        u_(detail::Array2<Scalar>::Constant(ny + 2 * kGhost, nx + 1 + 2 * kGhost, init)),
        v_(detail::Array2<Scalar>::Constant(ny + 1 + 2 * kGhost, nx + 2 * kGhost, init)) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }

  // u(I, j): face x = xf(I), cell row j.  I in [-g, nx+g], j in [-g, ny+g).
  Scalar& u(int I, int j) { return u_(j + kGhost, I + kGhost); }
  const Scalar& u(int I, int j) const { return u_(j + kGhost, I + kGhost); }
  // v(i, J): cell column i, face y = yf(J).
  Scalar& v(int i, int J) { return v_(J + kGhost, i + kGhost); }
  const Scalar& v(int i, int J) const { return v_(J + kGhost, i + kGhost); }

  void set_constant(Scalar cu, Scalar cv) { u_.setConstant(cu); v_.setConstant(cv); }

  Scalar max_abs_interior() const {
    Scalar m = 0;
    for (int j = 0; j < ny_; ++j)
      for (int I = 0; I <= nx_; ++I) m = std::max(m, std::abs(u(I, j)));
    for (int J = 0; J <= ny_; ++J)
      for (int i = 0; i < nx_; ++i) m = std::max(m, std::abs(v(i, J)));
    return m;
  }

  bool interior_finite() const {
    for (int j = 0; j < ny_; ++j)
      for (int I = 0; I <= nx_; ++I)
        if (!std::isfinite(u(I, j))) return false;
    for (int J = 0; J <= ny_; ++J)
      for (int i = 0; i < nx_; ++i)
        if (!std::isfinite(v(i, J))) return false;
    return true;
  }

private:
  int nx_ = 0, ny_ = 0;
  detail::Array2<Scalar> u_, v_;
};

using CellField = CellFieldT<double>;
using FaceVectorField = FaceVectorFieldT<double>;

// ---------------------------------------------------------------------------
// Boundary conditions

enum class BcKind { ZeroGradient, Dirichlet, MovingWall, Periodic };

struct BcSide {
  BcKind kind = BcKind::ZeroGradient;
  double value = 0.0;  // Dirichlet value or moving-wall tangential speed
};

struct BoundarySpec {
  BcSide left, right, bottom, top;

  static BoundarySpec all_zero_gradient() { return {}; }
  static BoundarySpec all_periodic() {
    BoundarySpec b;
    b.left.kind = b.right.kind = b.bottom.kind = b.top.kind = BcKind::Periodic;
    return b;
  }
};

// Scalar-field ghost filling. Dirichlet reflects linearly through the wall value;
// MovingWall has no scalar meaning and is rejected.
template <class Scalar>
void fill_ghosts(CellFieldT<Scalar>& f, const BoundarySpec& bc) {
  const int nx = f.nx(), ny = f.ny();
  auto bad = [] { throw std::invalid_argument("fill_ghosts: MovingWall is not a scalar condition"); };

  for (int i = 0; i < nx; ++i) {
    for (int k = 1; k <= kGhost; ++k) {
      switch (bc.bottom.kind) {
        case BcKind::ZeroGradient: f(i, -k) = f(i, 0); break;
        case BcKind::Dirichlet: f(i, -k) = Scalar(2) * Scalar(bc.bottom.value) - f(i, k - 1); break;
        case BcKind::Periodic: f(i, -k) = f(i, ny - k); break;
        case BcKind::MovingWall: bad();
      }
      switch (bc.top.kind) {
        case BcKind::ZeroGradient: f(i, ny - 1 + k) = f(i, ny - 1); break;
        case BcKind::Dirichlet: f(i, ny - 1 + k) = Scalar(2) * Scalar(bc.top.value) - f(i, ny - k); break;
        case BcKind::Periodic: f(i, ny - 1 + k) = f(i, k - 1); break;
        case BcKind::MovingWall: bad();
      }
    }
  }
  for (int j = -kGhost; j < ny + kGhost; ++j) {
    for (int k = 1; k <= kGhost; ++k) {
      switch (bc.left.kind) {
        case BcKind::ZeroGradient: f(-k, j) = f(0, j); break;
        case BcKind::Dirichlet: f(-k, j) = Scalar(2) * Scalar(bc.left.value) - f(k - 1, j); break;
        case BcKind::Periodic: f(-k, j) = f(nx - k, j); break;
        case BcKind::MovingWall: bad();
      }
      switch (bc.right.kind) {
        case BcKind::ZeroGradient: f(nx - 1 + k, j) = f(nx - 1, j); break;
        case BcKind::Dirichlet: f(nx - 1 + k, j) = Scalar(2) * Scalar(bc.right.value) - f(nx - k, j); break;
        case BcKind::Periodic: f(nx - 1 + k, j) = f(k - 1, j); break;
        case BcKind::MovingWall: bad();
      }
    }
  }
}

// Velocity-family ghost filling. Per side: ZeroGradient copies the boundary value
// outward; Dirichlet pins the normal component on the wall face and reflects the
// tangential one through the value; MovingWall is an impermeable wall with a
// tangential speed (normal face value 0, tangential ghost = 2*speed - interior).
template <class Scalar>
void fill_ghosts(FaceVectorFieldT<Scalar>& vel, const BoundarySpec& bc) {
  const int nx = vel.nx(), ny = vel.ny();

  // bottom/top: u tangential, v normal
  for (int k = 1; k <= kGhost; ++k) {
    for (int I = 0; I <= nx; ++I) {
      switch (bc.bottom.kind) {
        case BcKind::ZeroGradient: vel.u(I, -k) = vel.u(I, 0); break;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: vel.u(I, -k) = Scalar(2) * Scalar(bc.bottom.value) - vel.u(I, k - 1); break;
        case BcKind::Periodic: vel.u(I, -k) = vel.u(I, ny - k); break;
      }
      switch (bc.top.kind) {
        case BcKind::ZeroGradient: vel.u(I, ny - 1 + k) = vel.u(I, ny - 1); break;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: vel.u(I, ny - 1 + k) = Scalar(2) * Scalar(bc.top.value) - vel.u(I, ny - k); break;
        case BcKind::Periodic: vel.u(I, ny - 1 + k) = vel.u(I, k - 1); break;
      }
    }
    for (int i = 0; i < nx; ++i) {
      switch (bc.bottom.kind) {
        case BcKind::ZeroGradient: vel.v(i, -k) = vel.v(i, 0); break;
        case BcKind::Dirichlet:
          if (k == 1) vel.v(i, 0) = Scalar(bc.bottom.value);
          vel.v(i, -k) = Scalar(2) * Scalar(bc.bottom.value) - vel.v(i, k);
          break;
        case BcKind::MovingWall:
          if (k == 1) vel.v(i, 0) = Scalar(0);
          vel.v(i, -k) = -vel.v(i, k);
          break;
        case BcKind::Periodic: vel.v(i, -k) = vel.v(i, ny - k); break;
      }
      switch (bc.top.kind) {
        case BcKind::ZeroGradient: vel.v(i, ny + k) = vel.v(i, ny); break;
        case BcKind::Dirichlet:
          if (k == 1) vel.v(i, ny) = Scalar(bc.top.value);
          vel.v(i, ny + k) = Scalar(2) * Scalar(bc.top.value) - vel.v(i, ny - k);
          break;
        case BcKind::MovingWall:
          if (k == 1) vel.v(i, ny) = Scalar(0);
          vel.v(i, ny + k) = -vel.v(i, ny - k);
          break;
        case BcKind::Periodic: vel.v(i, ny + k) = vel.v(i, k); break;
      }
    }
  }
  if (bc.bottom.kind == BcKind::Periodic)
    for (int i = 0; i < nx; ++i) vel.v(i, ny) = vel.v(i, 0);

  // left/right: u normal, v tangential (sweep ghost rows too so corners resolve)
  for (int k = 1; k <= kGhost; ++k) {
    for (int j = -kGhost; j < ny + kGhost; ++j) {
      switch (bc.left.kind) {
        case BcKind::ZeroGradient: vel.u(-k, j) = vel.u(0, j); break;
        case BcKind::Dirichlet:
          if (k == 1) vel.u(0, j) = Scalar(bc.left.value);
          vel.u(-k, j) = Scalar(2) * Scalar(bc.left.value) - vel.u(k, j);
          break;
        case BcKind::MovingWall:
          if (k == 1) vel.u(0, j) = Scalar(0);
          vel.u(-k, j) = -vel.u(k, j);
          break;
        case BcKind::Periodic: vel.u(-k, j) = vel.u(nx - k, j); break;
      }
      switch (bc.right.kind) {
        case BcKind::ZeroGradient: vel.u(nx + k, j) = vel.u(nx, j); break;
        case BcKind::Dirichlet:
          if (k == 1) vel.u(nx, j) = Scalar(bc.right.value);
          vel.u(nx + k, j) = Scalar(2) * Scalar(bc.right.value) - vel.u(nx - k, j);
          break;
        case BcKind::MovingWall:
          if (k == 1) vel.u(nx, j) = Scalar(0);
          vel.u(nx + k, j) = -vel.u(nx - k, j);
          break;
        case BcKind::Periodic: vel.u(nx + k, j) = vel.u(k, j); break;
      }
    }
    for (int J = -kGhost; J < ny + 1 + kGhost; ++J) {
      switch (bc.left.kind) {
        case BcKind::ZeroGradient: vel.v(-k, J) = vel.v(0, J); break;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: vel.v(-k, J) = Scalar(2) * Scalar(bc.left.value) - vel.v(k - 1, J); break;
        case BcKind::Periodic: vel.v(-k, J) = vel.v(nx - k, J); break;
      }
      switch (bc.right.kind) {
        case BcKind::ZeroGradient: vel.v(nx - 1 + k, J) = vel.v(nx - 1, J); break;
        case BcKind::Dirichlet:
        case BcKind::MovingWall: vel.v(nx - 1 + k, J) = Scalar(2) * Scalar(bc.right.value) - vel.v(nx - k, J); break;
        case BcKind::Periodic: vel.v(nx - 1 + k, J) = vel.v(k - 1, J); break;
      }
    }
  }
  if (bc.left.kind == BcKind::Periodic)
    for (int j = -kGhost; j < ny + kGhost; ++j) vel.u(nx, j) = vel.u(0, j);
}

// ---------------------------------------------------------------------------
// Interpolations between staggering locations (all arithmetic 4- or 2-point means,
// exact on affine fields).

template <class Scalar>
Scalar interp_cell_to_corner(const CellFieldT<Scalar>& m, int I, int J) {
  return Scalar(0.25) * (m(I - 1, J - 1) + m(I, J - 1) + m(I - 1, J) + m(I, J));
}

// u interpolated to a horizontal-face location (cell column i, face row J)
template <class Scalar>
Scalar u_at_hface(const FaceVectorFieldT<Scalar>& vel, int i, int J) {
  return Scalar(0.25) * (vel.u(i, J - 1) + vel.u(i + 1, J - 1) + vel.u(i, J) + vel.u(i + 1, J));
}

// v interpolated to a vertical-face location (face column I, cell row j)
template <class Scalar>
Scalar v_at_vface(const FaceVectorFieldT<Scalar>& vel, int I, int j) {
  return Scalar(0.25) * (vel.v(I - 1, j) + vel.v(I - 1, j + 1) + vel.v(I, j) + vel.v(I, j + 1));
}

template <class Scalar>
Scalar u_at_cell(const FaceVectorFieldT<Scalar>& vel, int i, int j) {
  return Scalar(0.5) * (vel.u(i, j) + vel.u(i + 1, j));
}

template <class Scalar>
Scalar v_at_cell(const FaceVectorFieldT<Scalar>& vel, int i, int j) {
  return Scalar(0.5) * (vel.v(i, j) + vel.v(i, j + 1));
}

template <class Scalar>
Scalar u_at_corner(const FaceVectorFieldT<Scalar>& vel, int I, int J) {
  return Scalar(0.5) * (vel.u(I, J - 1) + vel.u(I, J));
}

template <class Scalar>
Scalar v_at_corner(const FaceVectorFieldT<Scalar>& vel, int I, int J) {
  return Scalar(0.5) * (vel.v(I - 1, J) + vel.v(I, J));
}

// ---------------------------------------------------------------------------
// Discrete operators

template <class Scalar>
CellFieldT<Scalar> divergence(const GridSpec& g, const FaceVectorFieldT<Scalar>& vel) {
  CellFieldT<Scalar> out(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) = (vel.u(i + 1, j) - vel.u(i, j)) / Scalar(g.dx) +
                  (vel.v(i, j + 1) - vel.v(i, j)) / Scalar(g.dy);
  return out;
}

// Central difference of adjacent cells onto every face (uses ghosts at boundary faces).
template <class Scalar>
FaceVectorFieldT<Scalar> gradient_at_faces(const GridSpec& g, const CellFieldT<Scalar>& p) {
  FaceVectorFieldT<Scalar> out(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int I = 0; I <= g.nx; ++I)
      out.u(I, j) = (p(I, j) - p(I - 1, j)) / Scalar(g.dx);
  for (int J = 0; J <= g.ny; ++J)
    for (int i = 0; i < g.nx; ++i)
      out.v(i, J) = (p(i, J) - p(i, J - 1)) / Scalar(g.dy);
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot format: "# nx ny x_min x_max y_min y_max t" then row-major values.

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <class Scalar>
void write_cell_snapshot(const std::string& path, const GridSpec& g,
                         const CellFieldT<Scalar>& f, double t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# " << g.nx << ' ' << g.ny << ' ' << format_g17(g.x_min) << ' ' << format_g17(g.x_max)
      << ' ' << format_g17(g.y_min) << ' ' << format_g17(g.y_max) << ' ' << format_g17(t) << '\n';
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) out << format_g17(f(i, j)) << (i + 1 < g.nx ? ' ' : '\n');
  }
}

inline CellField read_cell_snapshot(const std::string& path, GridSpec* grid_out, double* t_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string hash;
  int nx, ny;
  double x0, x1, y0, y1, t;
  in >> hash >> nx >> ny >> x0 >> x1 >> y0 >> y1 >> t;
  if (hash != "#" || !in) throw std::runtime_error("bad snapshot header in " + path);
  GridSpec g = GridSpec::make(nx, ny, x0, x1, y0, y1);
  CellField f(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (!(in >> f(i, j))) throw std::runtime_error("short snapshot data in " + path);
  if (grid_out) *grid_out = g;
  if (t_out) *t_out = t;
  return f;
}

// Face-component snapshots share the format; the header carries the component's own dims.
template <class Scalar>
void write_face_snapshots(const std::string& path_u, const std::string& path_v,
                          const GridSpec& g, const FaceVectorFieldT<Scalar>& vel, double t) {
  {
    std::ofstream out(path_u);
    if (!out) throw std::runtime_error("cannot open " + path_u);
    out << "# " << (g.nx + 1) << ' ' << g.ny << ' ' << format_g17(g.x_min) << ' '
        << format_g17(g.x_max) << ' ' << format_g17(g.y_min) << ' ' << format_g17(g.y_max) << ' '
        << format_g17(t) << '\n';
    for (int j = 0; j < g.ny; ++j)
      for (int I = 0; I <= g.nx; ++I) out << format_g17(vel.u(I, j)) << (I < g.nx ? ' ' : '\n');
  }
  {
    std::ofstream out(path_v);
    if (!out) throw std::runtime_error("cannot open " + path_v);
    out << "# " << g.nx << ' ' << (g.ny + 1) << ' ' << format_g17(g.x_min) << ' '
        << format_g17(g.x_max) << ' ' << format_g17(g.y_min) << ' ' << format_g17(g.y_max) << ' '
        << format_g17(t) << '\n';
    for (int J = 0; J <= g.ny; ++J)
      for (int i = 0; i < g.nx; ++i) out << format_g17(vel.v(i, J)) << (i + 1 < g.nx ? ' ' : '\n');
  }
}

// ---------------------------------------------------------------------------
// Row-parallel helper. Deterministic: each index is written by exactly one worker
// and no reductions cross rows.

inline int& global_thread_count() {
  static int n = 1;
  return n;
}

template <class Fn>
void parallel_for_rows(int n, Fn&& fn) {
  const int threads = std::min(global_thread_count(), n);
  if (threads <= 1) {
    for (int r = 0; r < n; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int tid = 0; tid < threads; ++tid) {
    pool.emplace_back([=, &fn] {
      for (int r = tid; r < n; r += threads) fn(r);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace memfsi
