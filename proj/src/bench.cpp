#include <memfsi/bench.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace memfsi {

NsParams CaseConfig::params() const {
  NsParams prm;
  prm.rho_outer = prm.rho_inner = rho;
  prm.mu_outer = mu1();
  prm.mu_inner = viscosity_ratio * mu1();
  prm.stiffness = stiffness();
  prm.dt = dt;
  prm.mode = mode;
  prm.velocity_bc.left = {BcKind::ZeroGradient, 0.0};
  prm.velocity_bc.right = {BcKind::ZeroGradient, 0.0};
  prm.velocity_bc.bottom = {BcKind::MovingWall, gamma_dot * y_min};
  prm.velocity_bc.top = {BcKind::MovingWall, gamma_dot * y_max};
  prm.scalar_bc = BoundarySpec::all_zero_gradient();
  prm.reinit_every = reinit_every;
  prm.reinit_steps = reinit_steps;
  if (prm.reinit_steps <= 0) {
    const GridSpec g0 = grid();
    const double reach = std::hypot(std::max(std::abs(x_min), std::abs(x_max)),
                                    std::max(std::abs(y_min), std::abs(y_max)));
    prm.reinit_steps = static_cast<int>(std::ceil(reach / (0.3 * std::min(g0.dx, g0.dy))));
  }
  prm.extrap_steps = extrap_steps;
  const double u_star = a * gamma_dot;
  prm.u_ref = u_star > 0.0 ? u_star : 1.0;
  prm.tol_momentum = tol_momentum;
  prm.tol_poisson = tol_poisson;
  prm.max_iterations = max_iterations;
  prm.method = method;
  return prm;
}

ContourError::ContourError(const std::string& what, int component_count)
    : std::runtime_error(what), components(component_count) {}

FlowState init_shear_case(const CaseConfig& cfg) {
  const GridSpec g = cfg.grid();
  if (std::abs(g.dx - g.dy) > 1e-12 * g.dx)
    throw std::invalid_argument("init_shear_case: nx/ny does not match the domain aspect ratio");
  if (!(cfg.rho > 0.0) || !(cfg.mu1() > 0.0) || !(cfg.stiffness() > 0.0) ||
      !(cfg.viscosity_ratio > 0.0))
    throw std::invalid_argument("init_shear_case: derived physics must be positive");
  if (!(cfg.a > 0.0) || cfg.a >= 0.5 * std::min(g.x_max - g.x_min, g.y_max - g.y_min))
    throw std::invalid_argument("init_shear_case: membrane radius does not fit the domain");

  FlowState st(g);
  for (int j = 0; j < g.ny; ++j)
    for (int I = 0; I <= g.nx; ++I) st.vel.u(I, j) = cfg.gamma_dot * g.yc(j);
  st.phi.fill_interior([&](int i, int j) {
    return std::hypot(g.xc(i), g.yc(j)) - cfg.a;
  });

  const NsParams prm = cfg.params();
  fill_ghosts(st.vel, prm.velocity_bc);
  fill_ghosts(st.phi, prm.scalar_bc);
  fill_ghosts(st.map.wx, prm.scalar_bc);
  fill_ghosts(st.map.wy, prm.scalar_bc);
  update_material_properties(st, prm);
  update_membrane_fields(st, prm);
  return st;
}

// ---------------------------------------------------------------------------
// Contour extraction

ContourPolyline extract_contour(const GridSpec& g, const CellField& phi) {
  const int nx = g.nx, ny = g.ny;
  const long nh = static_cast<long>(nx - 1) * ny;
  auto h_edge = [&](int i, int j) { return static_cast<long>(j) * (nx - 1) + i; };
  auto v_edge = [&](int i, int j) { return nh + static_cast<long>(j) * nx + i; };
  auto inside = [&](int i, int j) { return phi(i, j) < 0.0; };

  std::vector<Eigen::Vector2d> verts;
  std::vector<std::array<int, 2>> adj;
  std::vector<int> deg;
  std::unordered_map<long, int> vertex_of;

  auto vertex_at = [&](long id, int ia, int ja, int ib, int jb) {
    auto it = vertex_of.find(id);
    if (it != vertex_of.end()) return it->second;
    const double fa = phi(ia, ja), fb = phi(ib, jb);
    const double t = fa / (fa - fb);
    verts.emplace_back(g.xc(ia) + t * (g.xc(ib) - g.xc(ia)),
                       g.yc(ja) + t * (g.yc(jb) - g.yc(ja)));
    adj.push_back({-1, -1});
    deg.push_back(0);
    const int idx = static_cast<int>(verts.size()) - 1;
    vertex_of.emplace(id, idx);
    return idx;
  };
  auto link = [&](int p, int q) {
    adj[p][deg[p]++] = q;
    adj[q][deg[q]++] = p;
  };

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const bool a = inside(i, j);
      const int code = (a ? 1 : 0) | (inside(i + 1, j) ? 2 : 0) | (inside(i + 1, j + 1) ? 4 : 0) |
                       (inside(i, j + 1) ? 8 : 0);
      if (code == 0 || code == 15) continue;
      auto bottom = [&] { return vertex_at(h_edge(i, j), i, j, i + 1, j); };
      auto top = [&] { return vertex_at(h_edge(i, j + 1), i, j + 1, i + 1, j + 1); };
      auto left = [&] { return vertex_at(v_edge(i, j), i, j, i, j + 1); };
      auto right = [&] { return vertex_at(v_edge(i + 1, j), i + 1, j, i + 1, j + 1); };
      switch (code) {
        case 1: case 14: link(bottom(), left()); break;
        case 2: case 13: link(bottom(), right()); break;
        case 4: case 11: link(right(), top()); break;
        case 8: case 7: link(top(), left()); break;
        case 3: case 12: link(left(), right()); break;
        case 6: case 9: link(bottom(), top()); break;
        default: {  // both diagonals cut; the cell-average sign picks the pairing
          const double center =
              0.25 * (phi(i, j) + phi(i + 1, j) + phi(i + 1, j + 1) + phi(i, j + 1));
          if ((center < 0.0) == a) {
            link(bottom(), right());
            link(top(), left());
          } else {
            link(bottom(), left());
            link(top(), right());
          }
          break;
        }
      }
    }
  }

  if (verts.empty()) throw ContourError("contour extraction found no isoline", 0);
  for (size_t k = 0; k < verts.size(); ++k)
    if (deg[k] != 2)
      throw ContourError("contour extraction found an open isoline (0 closed components)", 0);

  std::vector<char> used(verts.size(), 0);
  std::vector<std::vector<int>> cycles;
  for (int s = 0; s < static_cast<int>(verts.size()); ++s) {
    if (used[s]) continue;
    std::vector<int> cyc{s};
    used[s] = 1;
    int prev = s, cur = adj[s][0];
    while (cur != s) {
      used[cur] = 1;
      cyc.push_back(cur);
      const int nxt = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
      prev = cur;
      cur = nxt;
    }
    cycles.push_back(std::move(cyc));
  }
  if (cycles.size() != 1)
    throw ContourError(
        "contour extraction found " + std::to_string(cycles.size()) + " closed components",
        static_cast<int>(cycles.size()));

  const std::vector<int>& cyc = cycles.front();
  double area2 = 0.0;
  for (size_t k = 0; k < cyc.size(); ++k) {
    const Eigen::Vector2d& p = verts[cyc[k]];
    const Eigen::Vector2d& q = verts[cyc[(k + 1) % cyc.size()]];
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  ContourPolyline out;
  out.vertices.reserve(cyc.size());
  if (area2 >= 0.0)
    for (size_t k = 0; k < cyc.size(); ++k) out.vertices.push_back(verts[cyc[k]]);
  else
    for (size_t k = cyc.size(); k-- > 0;) out.vertices.push_back(verts[cyc[k]]);
  out.enclosed_area = 0.5 * std::abs(area2);
  out.closed = true;
  return out;
}

// ---------------------------------------------------------------------------
// Shape comparison

namespace {

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

double directed_hausdorff(const ContourPolyline& from, const ContourPolyline& to) {
  double worst = 0.0;
  const size_t m = to.vertices.size();
  for (const Eigen::Vector2d& p : from.vertices) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < m; ++k)
      best = std::min(best, point_segment_distance(p, to.vertices[k], to.vertices[(k + 1) % m]));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff_distance(const ContourPolyline& c1, const ContourPolyline& c2) {
  if (!c1.closed || !c2.closed || c1.vertices.empty() || c2.vertices.empty())
    throw std::invalid_argument("hausdorff_distance: both contours must be closed");
  return std::max(directed_hausdorff(c1, c2), directed_hausdorff(c2, c1));
}

Eigen::Vector2d sample_velocity(const GridSpec& g, const FaceVectorField& vel, double x, double y) {
  const double sx = (x - g.x_min) / g.dx;
  const double sy = (y - g.y_min) / g.dy;
  auto bilinear = [](double f00, double f10, double f01, double f11, double ax, double ay) {
    return (1.0 - ay) * ((1.0 - ax) * f00 + ax * f10) + ay * ((1.0 - ax) * f01 + ax * f11);
  };
  const double fi_u = sx, fj_u = sy - 0.5;
  const int I0 = static_cast<int>(std::floor(fi_u)), j0 = static_cast<int>(std::floor(fj_u));
  const double u = bilinear(vel.u(I0, j0), vel.u(I0 + 1, j0), vel.u(I0, j0 + 1),
                            vel.u(I0 + 1, j0 + 1), fi_u - I0, fj_u - j0);
  const double fi_v = sx - 0.5, fj_v = sy;
  const int i0 = static_cast<int>(std::floor(fi_v)), J0 = static_cast<int>(std::floor(fj_v));
  const double v = bilinear(vel.v(i0, J0), vel.v(i0 + 1, J0), vel.v(i0, J0 + 1),
                            vel.v(i0 + 1, J0 + 1), fi_v - i0, fj_v - J0);
  return {u, v};
}

// ---------------------------------------------------------------------------
// Run orchestration

RunReport run_case(const CaseConfig& cfg, const std::string& out_dir, std::ostream* diag) {
  RunReport rep(init_shear_case(cfg));
  FlowState& st = rep.state;
  const GridSpec& g = st.grid;
  NsParams prm = cfg.params();
  prm.diag_stream = diag;

  const bool writing = !out_dir.empty();
  if (writing) std::filesystem::create_directories(out_dir);
  int snap_index = 0;
  auto snapshot = [&] {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "%04d", snap_index++);
    const std::string base = out_dir + "/";
    write_cell_snapshot(base + "phi_" + tag + ".dat", g, st.phi, st.t);
    write_cell_snapshot(base + "p_" + tag + ".dat", g, st.p, st.t);
    write_face_snapshots(base + "u_" + tag + ".dat", base + "v_" + tag + ".dat", g, st.vel, st.t);
  };

  {
    const ContourPolyline c0 = extract_contour(g, st.phi);
    rep.initial_area = c0.enclosed_area;
    rep.times.push_back(st.t);
    rep.areas.push_back(c0.enclosed_area);
  }
  const bool scheduled = writing && cfg.snapshot_every > 0.0;
  if (scheduled) snapshot();

  const int n_steps = static_cast<int>(std::ceil(cfg.t_final / cfg.dt - 1e-9));
  if (n_steps <= 0) throw std::invalid_argument("run_case: t_final and dt give no steps");
  rep.diagnostics.reserve(n_steps);
  int emitted = 1;
  for (int s = 0; s < n_steps; ++s) {
    rep.diagnostics.push_back(step(st, prm));
    const ContourPolyline c = extract_contour(g, st.phi);
    rep.times.push_back(st.t);
    rep.areas.push_back(c.enclosed_area);
    if (s + 1 == n_steps) rep.final_contour = c;
    if (scheduled && st.t >= emitted * cfg.snapshot_every - 1e-12) {
      snapshot();
      ++emitted;
    }
  }
  rep.steps = n_steps;

  if (writing) {
    std::ofstream cf(out_dir + "/contour_final.csv");
    if (!cf) throw std::runtime_error("cannot open " + out_dir + "/contour_final.csv");
    write_contour_csv(cf, rep.final_contour);
    std::ofstream af(out_dir + "/area_series.csv");
    if (!af) throw std::runtime_error("cannot open " + out_dir + "/area_series.csv");
    write_area_series_csv(af, rep.times, rep.areas);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Stability search

namespace {

bool probe_stable(CaseConfig cfg, double dt, std::ostream* diag) {
  cfg.dt = dt;
  cfg.snapshot_every = 0.0;
  bool ok = false;
  std::string reason;
  try {
    run_case(cfg);
    ok = true;
  } catch (const BlowUp& e) {
    reason = e.what();
  } catch (const SolverError& e) {
    reason = e.what();
  } catch (const ContourError& e) {
    reason = e.what();
  }
  if (diag) {
    *diag << "probe dt=" << format_g17(dt) << (ok ? " stable" : " unstable");
    if (!reason.empty()) *diag << " (" << reason << ")";
    *diag << '\n';
  }
  return ok;
}

}  // namespace

double max_stable_dt_search(const CaseConfig& config_template, SchemeMode scheme, double dt_lo,
                            double dt_hi, double rel_tol, std::ostream* diag) {
  if (!(dt_lo > 0.0) || !(dt_hi > dt_lo))
    throw std::invalid_argument("max_stable_dt_search: need 0 < dt_lo < dt_hi");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("max_stable_dt_search: rel_tol must be positive");
  CaseConfig cfg = config_template;
  cfg.mode = scheme;
  if (!probe_stable(cfg, dt_lo, diag))
    throw std::invalid_argument("max_stable_dt_search: dt_lo is not stable");
  if (probe_stable(cfg, dt_hi, diag))
    throw std::invalid_argument("max_stable_dt_search: dt_hi is not unstable");
  double lo = dt_lo, hi = dt_hi;
  while (hi - lo > rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    (probe_stable(cfg, mid, diag) ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Report emission

const char* scheme_name(SchemeMode mode) {
  return mode == SchemeMode::Explicit ? "Explicit" : "SemiImplicit";
}

void write_dt_table_csv(std::ostream& os, const std::vector<DtTableRow>& rows) {
  os << "mesh,ca,scheme,max_dt,ratio\n";
  for (const DtTableRow& r : rows) {
    double ratio = 0.0;
    bool paired = false;
    for (const DtTableRow& o : rows) {
      if (o.nx != r.nx || o.ny != r.ny || o.capillary != r.capillary || o.mode == r.mode) continue;
      const double si = r.mode == SchemeMode::SemiImplicit ? r.max_dt : o.max_dt;
      const double ex = r.mode == SchemeMode::Explicit ? r.max_dt : o.max_dt;
      ratio = si / ex;
      paired = true;
      break;
    }
    os << r.nx << 'x' << r.ny << ',' << format_g17(r.capillary) << ',' << scheme_name(r.mode)
       << ',' << format_g17(r.max_dt) << ',';
    if (paired) os << format_g17(ratio);
    os << '\n';
  }
}

void write_contour_csv(std::ostream& os, const ContourPolyline& c) {
  os << "x,y\n";
  for (const Eigen::Vector2d& p : c.vertices)
    os << format_g17(p.x()) << ',' << format_g17(p.y()) << '\n';
}

ContourPolyline read_contour_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "x,y")
    throw std::runtime_error("contour CSV: bad header");
  ContourPolyline c;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("contour CSV: bad row " + line);
    c.vertices.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  if (c.vertices.size() < 3) throw std::runtime_error("contour CSV: too few vertices");
  double area2 = 0.0;
  for (size_t k = 0; k < c.vertices.size(); ++k) {
    const Eigen::Vector2d& p = c.vertices[k];
    const Eigen::Vector2d& q = c.vertices[(k + 1) % c.vertices.size()];
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  c.enclosed_area = 0.5 * std::abs(area2);
  c.closed = true;
  return c;
}

void write_area_series_csv(std::ostream& os, const std::vector<double>& times,
                           const std::vector<double>& areas) {
  if (times.size() != areas.size())
    throw std::invalid_argument("area series: times and areas differ in length");
  os << "t,area\n";
  for (size_t k = 0; k < times.size(); ++k)
    os << format_g17(times[k]) << ',' << format_g17(areas[k]) << '\n';
}

}  // namespace memfsi
