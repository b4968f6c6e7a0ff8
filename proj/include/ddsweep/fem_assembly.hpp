#pragma once

// Per-subdomain assembly of the Helmholtz system with Padé auxiliary edge
// fields, corner couplings, data injection and trace extraction.

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ddsweep/core.hpp"
#include "ddsweep/geometry_mesh.hpp"
#include "ddsweep/habc.hpp"
#include "ddsweep/sparse_linalg.hpp"

namespace ddsweep {

enum class SideKind { Exterior, Transmission, Dummy };

struct BoundarySetup {
  std::array<SideKind, 4> kinds{SideKind::Dummy, SideKind::Dummy, SideKind::Dummy, SideKind::Dummy};
  PadeParams exterior = pade_coefficients(0, 0.0);
  PadeParams transmission = pade_coefficients(0, 0.0);

  SideKind kind(Side s) const { return kinds[index(s)]; }
  const PadeParams& params(Side s) const { return kind(s) == SideKind::Exterior ? exterior : transmission; }
  bool has_condition(Side s) const { return kind(s) != SideKind::Dummy; }
  bool has_aux(Side s) const { return has_condition(s) && params(s).n_aux > 0; }
  int n_aux(Side s) const { return has_aux(s) ? params(s).n_aux : 0; }
};

struct PointSource {
  Point where;
  Complex amplitude{1.0, 0.0};
};

struct SubdomainProblem {
  std::shared_ptr<const SubdomainMesh> mesh;
  WavenumberField k;
  BoundarySetup boundary;
  // Values on the obstacle boundary; zero when empty.
  std::function<Complex(Point)> dirichlet;
  std::vector<PointSource> sources;
};

struct DofLayout {
  int num_nodes = 0;
  int num_volume = 0;  // free volume unknowns
  int total = 0;
  std::vector<int> node_dof;  // -1 on Dirichlet nodes
  std::vector<int> dirichlet_nodes;
  std::array<int, 4> trace_len{};
  std::array<int, 4> aux_count{};
  std::array<int, 4> aux_base{-1, -1, -1, -1};

  // Unknown of the i-th (1-based) auxiliary field of side s at trace position t.
  int aux_dof(Side s, int i, int t) const { return aux_base[index(s)] + (i - 1) * trace_len[index(s)] + t; }
};

// Incoming transmission data for one side: trace values plus the corner
// scalars at the first and last endpoints (each empty or one per Padé term of
// the perpendicular side).
struct SideData {
  std::span<const Complex> trace;
  std::span<const Complex> corner_first;
  std::span<const Complex> corner_last;
};

namespace detail {

// Quadrature on the reference triangle in barycentric coordinates; weights
// sum to one.
struct TriQuad {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

inline const TriQuad& tri_quadrature(int order) {
  static const TriQuad p1 = [] {
    TriQuad q;
    q.points = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return q;
  }();
  static const TriQuad p2 = [] {
    // Six-point rule, exact for degree 4.
    const double a1 = 0.445948490915965, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, w2 = 0.109951743655322;
    TriQuad q;
    q.points = {{a1, a1, 1 - 2 * a1}, {a1, 1 - 2 * a1, a1}, {1 - 2 * a1, a1, a1},
                {a2, a2, 1 - 2 * a2}, {a2, 1 - 2 * a2, a2}, {1 - 2 * a2, a2, a2}};
    q.weights = {w1, w1, w1, w2, w2, w2};
    return q;
  }();
  return order == 1 ? p1 : p2;
}

// Basis values and barycentric-gradient coefficients at a point.
// grad phi_a = sum_m dl[a][m] * grad lambda_m.
inline void basis(int order, const std::array<double, 3>& l, std::array<double, 6>& val,
                  std::array<std::array<double, 3>, 6>& dl) {
  for (auto& d : dl) d = {0.0, 0.0, 0.0};
  if (order == 1) {
    for (int a = 0; a < 3; ++a) {
      val[a] = l[a];
      dl[a][a] = 1.0;
    }
    return;
  }
  for (int a = 0; a < 3; ++a) {
    val[a] = l[a] * (2.0 * l[a] - 1.0);
    dl[a][a] = 4.0 * l[a] - 1.0;
  }
  const int e[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int m = 0; m < 3; ++m) {
    const int a = e[m][0], b = e[m][1];
    val[3 + m] = 4.0 * l[a] * l[b];
    dl[3 + m][a] = 4.0 * l[b];
    dl[3 + m][b] = 4.0 * l[a];
  }
}

// 1D mass and stiffness on a trace element of length h (P1: 2 nodes,
// P2: end, middle, end).
inline void line_matrices(int order, double h, std::vector<std::vector<double>>& mass,
                          std::vector<std::vector<double>>& stiff) {
  if (order == 1) {
    mass = {{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}};
    stiff = {{1.0 / h, -1.0 / h}, {-1.0 / h, 1.0 / h}};
  } else {
    const double m = h / 30.0;
    mass = {{4 * m, 2 * m, -m}, {2 * m, 16 * m, 2 * m}, {-m, 2 * m, 4 * m}};
    const double s = 1.0 / (3.0 * h);
    stiff = {{7 * s, -8 * s, s}, {-8 * s, 16 * s, -8 * s}, {s, -8 * s, 7 * s}};
  }
}

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace detail

class SubdomainSystem {
 public:
  const DofLayout& layout() const { return layout_; }
  const SparseMatrix& matrix() const { return matrix_; }
  const Factorization& factorization() const { return *lu_; }
  const SubdomainMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const SubdomainMesh> mesh_ptr() const { return mesh_; }
  const BoundarySetup& boundary() const { return boundary_; }
  double side_k(Side s) const { return side_k_[index(s)]; }
  // Wavenumber at an endpoint of side s; corner data are exchanged with it so
  // that all cells meeting at a cross-point agree.
  double corner_k(Side s, int endpoint) const { return corner_k_[index(s)][endpoint]; }
  int trace_length(Side s) const { return layout_.trace_len[index(s)]; }
  int size() const { return layout_.total; }

  // Whether the auxiliary fields of side s carry a corner condition at the
  // given endpoint (both sides meeting there have auxiliary fields).
  bool corner_term(Side s, int endpoint) const {
    return boundary_.has_aux(s) && boundary_.has_aux(perpendicular_at(s, endpoint));
  }

  // Physical sources plus Dirichlet lifting.
  const CVector& source_rhs() const { return source_; }

  void inject(std::span<Complex> rhs, Side s, const SideData& data) const {
    if (!boundary_.has_condition(s)) throw InvalidArgument(std::string("no transmission condition on side ") + to_string(s));
    const auto& tr = mesh_->traces[index(s)];
    if (data.trace.size() != tr.size()) throw InvalidArgument("trace data length mismatch");
    const SparseMatrix& m = trace_mass_[index(s)];
    for (int a = 0; a < m.rows; ++a) {
      Complex acc{};
      for (int p = m.row_ptr[a]; p < m.row_ptr[a + 1]; ++p) acc += m.values[p] * data.trace[m.col_idx[p]];
      rhs[layout_.node_dof[tr[a]]] += acc;
    }
    inject_corner(rhs, s, 0, data.corner_first);
    inject_corner(rhs, s, 1, data.corner_last);
  }

  CVector solve(std::span<const Complex> rhs) const { return lu_->solve(rhs); }

  // Solves with the given incoming data (sides without data are skipped).
  CVector solve(const std::array<SideData, 4>& incoming, bool use_source) const {
    CVector rhs = use_source ? source_ : CVector(static_cast<std::size_t>(layout_.total));
    for (int s = 0; s < kNumSides; ++s) {
      const auto& d = incoming[s];
      if (d.trace.empty() && d.corner_first.empty() && d.corner_last.empty()) continue;
      inject(rhs, static_cast<Side>(s), d);
    }
    return solve(rhs);
  }

  // Number of corner scalars exchanged at an endpoint of side s.
  int corner_count(Side s, int endpoint) const {
    const Side y = perpendicular_at(s, endpoint);
    return corner_term(y, endpoint_towards(y, s)) ? boundary_.n_aux(y) : 0;
  }

  // Outgoing data 2B(u, phi) on the trace of side s and 2B(phi_y, psi) at its
  // endpoints. Corner spans may be empty to skip them.
  void extract(std::span<const Complex> local, Side s, std::span<Complex> trace, std::span<Complex> corner_first,
               std::span<Complex> corner_last) const {
    if (boundary_.kind(s) != SideKind::Transmission)
      throw InvalidArgument(std::string("extraction requires a transmission side, got ") + to_string(s));
    const auto& tr = mesh_->traces[index(s)];
    if (trace.size() != tr.size()) throw InvalidArgument("trace output length mismatch");
    const PadeParams& p = boundary_.params(s);
    const int n = boundary_.n_aux(s);
    const double k = side_k(s);
    std::vector<Complex> phis(static_cast<std::size_t>(p.n_aux));
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const Complex u = local[layout_.node_dof[tr[t]]];
      for (int i = 1; i <= p.n_aux; ++i)
        phis[i - 1] = n > 0 ? local[layout_.aux_dof(s, i, static_cast<int>(t))] : Complex{};
      trace[t] = 2.0 * eval_B(p, k, u, phis);
    }
    extract_corner(local, s, 0, corner_first);
    extract_corner(local, s, 1, corner_last);
  }

  // Nodal volume field; Dirichlet nodes take the obstacle data when
  // `with_dirichlet` is set and zero otherwise.
  CVector nodal_field(std::span<const Complex> local, bool with_dirichlet) const {
    CVector u(static_cast<std::size_t>(layout_.num_nodes));
    for (int n = 0; n < layout_.num_nodes; ++n) {
      const int d = layout_.node_dof[n];
      u[n] = d >= 0 ? local[d] : Complex{};
    }
    if (with_dirichlet)
      for (std::size_t i = 0; i < layout_.dirichlet_nodes.size(); ++i) u[layout_.dirichlet_nodes[i]] = dirichlet_values_[i];
    return u;
  }

 private:
  friend SubdomainSystem assemble_subdomain(const SubdomainProblem& problem);

  void inject_corner(std::span<Complex> rhs, Side x, int endpoint, std::span<const Complex> data) const {
    if (data.empty()) return;
    const Side y = perpendicular_at(x, endpoint);
    const int ey = endpoint_towards(y, x);
    if (!corner_term(y, ey) || static_cast<int>(data.size()) != boundary_.n_aux(y))
      throw InvalidArgument("corner data does not match the corner layout");
    const int t = ey == 0 ? 0 : layout_.trace_len[index(y)] - 1;
    const PadeParams& p = boundary_.params(y);
    const double k = corner_k(y, ey);
    for (int j = 1; j <= p.n_aux; ++j) rhs[layout_.aux_dof(y, j, t)] += aux_row_scale(p, j, k) * data[j - 1];
  }

  void extract_corner(std::span<const Complex> local, Side x, int endpoint, std::span<Complex> out) const {
    if (out.empty()) return;
    const Side y = perpendicular_at(x, endpoint);
    const int ey = endpoint_towards(y, x);
    if (!corner_term(y, ey) || static_cast<int>(out.size()) != boundary_.n_aux(y))
      throw InvalidArgument("corner output does not match the corner layout");
    const PadeParams& p = boundary_.params(y);
    const int ty = ey == 0 ? 0 : layout_.trace_len[index(y)] - 1;
    const int tx = endpoint == 0 ? 0 : layout_.trace_len[index(x)] - 1;
    std::vector<Complex> psi(static_cast<std::size_t>(p.n_aux));
    for (int j = 1; j <= p.n_aux; ++j) {
      const Complex phi_y = local[layout_.aux_dof(y, j, ty)];
      for (int i = 1; i <= p.n_aux; ++i) psi[i - 1] = corner_psi(p, i, j, local[layout_.aux_dof(x, i, tx)], phi_y);
      out[j - 1] = 2.0 * eval_B(p, corner_k(y, ey), phi_y, psi);
    }
  }

  std::shared_ptr<const SubdomainMesh> mesh_;
  BoundarySetup boundary_;
  DofLayout layout_;
  SparseMatrix matrix_;
  std::shared_ptr<const Factorization> lu_;
  std::array<double, 4> side_k_{};
  std::array<std::array<double, 2>, 4> corner_k_{};
  std::array<SparseMatrix, 4> trace_mass_;
  CVector source_;
  CVector dirichlet_values_;
};

inline SubdomainSystem assemble_subdomain(const SubdomainProblem& problem) {
  if (!problem.mesh) throw InvalidArgument("subdomain problem without mesh");
  const SubdomainMesh& mesh = *problem.mesh;
  const BoundarySetup& bc = problem.boundary;
  SubdomainSystem sys;
  sys.mesh_ = problem.mesh;
  sys.boundary_ = bc;
  DofLayout& L = sys.layout_;

  // Corner couplings need both sides to share one set of Padé parameters.
  for (int s = 0; s < kNumSides; ++s) {
    const Side side = static_cast<Side>(s);
    for (int e = 0; e < 2; ++e) {
      const Side perp = perpendicular_at(side, e);
      if (bc.has_aux(side) && bc.has_aux(perp) && !(bc.params(side) == bc.params(perp)))
        throw InvalidArgument("sides meeting at a corner use different Padé parameters");
    }
  }

  // Degrees of freedom.
  L.num_nodes = static_cast<int>(mesh.nodes.size());
  L.node_dof.assign(static_cast<std::size_t>(L.num_nodes), 0);
  for (int n : mesh.obstacle_boundary_nodes) L.node_dof[n] = -1;
  for (int n = 0; n < L.num_nodes; ++n) {
    if (L.node_dof[n] < 0) {
      L.dirichlet_nodes.push_back(n);
      continue;
    }
    L.node_dof[n] = L.num_volume++;
  }
  int next = L.num_volume;
  for (int s = 0; s < kNumSides; ++s) {
    const Side side = static_cast<Side>(s);
    L.trace_len[s] = static_cast<int>(mesh.traces[s].size());
    L.aux_count[s] = bc.n_aux(side);
    if (L.aux_count[s] > 0) {
      L.aux_base[s] = next;
      next += L.aux_count[s] * L.trace_len[s];
    }
    for (int n : mesh.traces[s])
      if (L.node_dof[n] < 0) throw AssemblyError("Dirichlet node on a subdomain side");
  }
  L.total = next;

  sys.dirichlet_values_.resize(L.dirichlet_nodes.size());
  for (std::size_t i = 0; i < L.dirichlet_nodes.size(); ++i)
    sys.dirichlet_values_[i] = problem.dirichlet ? problem.dirichlet(mesh.nodes[L.dirichlet_nodes[i]]) : Complex{};
  std::vector<int> dir_index(static_cast<std::size_t>(L.num_nodes), -1);
  for (std::size_t i = 0; i < L.dirichlet_nodes.size(); ++i) dir_index[L.dirichlet_nodes[i]] = static_cast<int>(i);

  TripletBuilder tb(L.total, L.total);
  sys.source_.assign(static_cast<std::size_t>(L.total), Complex{});

  // Volume terms.
  const int order = mesh.order;
  const int npe = mesh.nodes_per_element();
  const auto& quad = detail::tri_quadrature(order);
  std::array<double, 6> val{};
  std::array<std::array<double, 3>, 6> dl{};
  std::vector<double> kmat(static_cast<std::size_t>(npe * npe));
  std::vector<double> mmat(static_cast<std::size_t>(npe * npe));
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& el = mesh.elements[e];
    const auto& tri = mesh.triangles[e];
    const Point p0 = mesh.nodes[tri[0]], p1 = mesh.nodes[tri[1]], p2 = mesh.nodes[tri[2]];
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    const double area = 0.5 * det;
    if (!(area > 0.0)) throw AssemblyError("degenerate or inverted triangle");
    // Gradients of barycentric coordinates.
    const std::array<std::array<double, 2>, 3> gl = {{{(p1.y - p2.y) / det, (p2.x - p1.x) / det},
                                                      {(p2.y - p0.y) / det, (p0.x - p2.x) / det},
                                                      {(p0.y - p1.y) / det, (p1.x - p0.x) / det}}};
    std::fill(kmat.begin(), kmat.end(), 0.0);
    std::fill(mmat.begin(), mmat.end(), 0.0);
    for (std::size_t q = 0; q < quad.weights.size(); ++q) {
      const auto& l = quad.points[q];
      const Point xq{l[0] * p0.x + l[1] * p1.x + l[2] * p2.x, l[0] * p0.y + l[1] * p1.y + l[2] * p2.y};
      const double kq = problem.k(xq);
      const double w = quad.weights[q] * area;
      detail::basis(order, l, val, dl);
      std::array<std::array<double, 2>, 6> g{};
      for (int a = 0; a < npe; ++a)
        for (int m = 0; m < 3; ++m) {
          g[a][0] += dl[a][m] * gl[m][0];
          g[a][1] += dl[a][m] * gl[m][1];
        }
      for (int a = 0; a < npe; ++a)
        for (int b = 0; b < npe; ++b) {
          kmat[a * npe + b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
          mmat[a * npe + b] += w * kq * kq * val[a] * val[b];
        }
    }
    for (int a = 0; a < npe; ++a) {
      const int ra = L.node_dof[el[a]];
      if (ra < 0) continue;
      for (int b = 0; b < npe; ++b) {
        const double v = kmat[a * npe + b] - mmat[a * npe + b];
        const int cb = L.node_dof[el[b]];
        if (cb >= 0) {
          tb.add(ra, cb, v);
        } else {
          sys.source_[ra] -= v * sys.dirichlet_values_[dir_index[el[b]]];
        }
      }
    }
  }

  // Boundary and transmission conditions with their auxiliary fields.
  for (int s = 0; s < kNumSides; ++s) {
    const Side side = static_cast<Side>(s);
    const auto& tr = mesh.traces[s];
    const int len = static_cast<int>(tr.size());
    const Point a = mesh.nodes[tr.front()], b = mesh.nodes[tr.back()];
    const double k = problem.k({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    sys.side_k_[s] = k;
    sys.corner_k_[s] = {problem.k(a), problem.k(b)};

    TripletBuilder mass(len, len), stiff(len, len);
    std::vector<std::vector<double>> lm, ls;
    const int step = order;  // trace nodes per element minus one
    for (int t0 = 0; t0 + step < len; t0 += step) {
      const double h = detail::distance(mesh.nodes[tr[t0]], mesh.nodes[tr[t0 + step]]);
      detail::line_matrices(order, h, lm, ls);
      for (int i = 0; i <= step; ++i)
        for (int j = 0; j <= step; ++j) {
          mass.add(t0 + i, t0 + j, lm[i][j]);
          stiff.add(t0 + i, t0 + j, ls[i][j]);
        }
    }
    const SparseMatrix ms = mass.build();
    const SparseMatrix ss = stiff.build();
    sys.trace_mass_[s] = ms;
    if (!bc.has_condition(side)) continue;

    const PadeParams& p = bc.params(side);
    const Complex ika = -kI * k * p.alpha;
    const double two_m = 2.0 / p.order;
    double csum = 0.0;
    for (int i = 1; i <= p.n_aux; ++i) csum += p.c(i);
    const bool aux = bc.has_aux(side);
    for (int r = 0; r < len; ++r)
      for (int q = ms.row_ptr[r]; q < ms.row_ptr[r + 1]; ++q) {
        const int c = ms.col_idx[q];
        const double m = ms.values[q].real();
        const int ur = L.node_dof[tr[r]], uc = L.node_dof[tr[c]];
        tb.add(ur, uc, ika * (1.0 + two_m * csum) * m);
        if (!aux) continue;
        for (int i = 1; i <= p.n_aux; ++i) {
          const Complex sigma = aux_row_scale(p, i, k);
          const auto [reaction, coupling] = aux_equation_coefficients(p, i, k);
          const int fr = L.aux_dof(side, i, r), fc = L.aux_dof(side, i, c);
          tb.add(ur, fc, ika * two_m * p.c(i) * m);
          tb.add(fr, uc, -sigma * coupling * m);
          tb.add(fr, fc, -sigma * reaction * m);
        }
      }
    if (aux)
      for (int r = 0; r < len; ++r)
        for (int q = ss.row_ptr[r]; q < ss.row_ptr[r + 1]; ++q)
          for (int i = 1; i <= p.n_aux; ++i)
            tb.add(L.aux_dof(side, i, r), L.aux_dof(side, i, ss.col_idx[q]), aux_row_scale(p, i, k) * ss.values[q].real());
  }

  // Corner conditions closing the auxiliary equations: in the rows of side y
  // at corner P shared with side x, add sigma_j * B(phi_{y,j}, {psi_ij}).
  for (int s = 0; s < kNumSides; ++s) {
    const Side y = static_cast<Side>(s);
    for (int e = 0; e < 2; ++e) {
      if (!sys.corner_term(y, e)) continue;
      const Side x = perpendicular_at(y, e);
      const int ty = e == 0 ? 0 : L.trace_len[s] - 1;
      const int ex = endpoint_towards(x, y);
      const int tx = ex == 0 ? 0 : L.trace_len[index(x)] - 1;
      if (mesh.traces[s][ty] != mesh.traces[index(x)][tx]) throw AssemblyError("corner nodes of adjacent sides differ");
      const PadeParams& p = bc.params(y);
      const double k = sys.corner_k_[s][e];
      const Complex ika = -kI * k * p.alpha;
      const Complex a2 = p.alpha * p.alpha;
      const double two_m = 2.0 / p.order;
      for (int j = 1; j <= p.n_aux; ++j) {
        const Complex sigma = aux_row_scale(p, j, k);
        const int row = L.aux_dof(y, j, ty);
        Complex self = 1.0;
        for (int i = 1; i <= p.n_aux; ++i) {
          const Complex den = corner_denominator(p, i, j);
          self += two_m * p.c(i) * (1.0 - a2 * (p.c(i) + 1.0) / den);
          tb.add(row, L.aux_dof(x, i, tx), sigma * ika * two_m * p.c(i) * (-a2 * (p.c(j) + 1.0) / den));
        }
        tb.add(row, row, sigma * ika * self);
      }
    }
  }

  // Point loads at the nearest free node; ties go to the lowest (y, x) so the
  // choice does not depend on node numbering.
  for (const auto& src : problem.sources) {
    int best = -1;
    double dist = 0.0;
    for (int n = 0; n < L.num_nodes; ++n) {
      const double d = detail::distance(mesh.nodes[n], src.where);
      const Point& pn = mesh.nodes[n];
      const bool tie_wins = best >= 0 && d == dist &&
                            std::pair{pn.y, pn.x} < std::pair{mesh.nodes[best].y, mesh.nodes[best].x};
      if (best < 0 || d < dist || tie_wins) {
        best = n;
        dist = d;
      }
    }
    if (best < 0 || L.node_dof[best] < 0) throw InvalidArgument("point source does not map to a free node");
    sys.source_[L.node_dof[best]] += src.amplitude;
  }

  sys.matrix_ = tb.build();
  try {
    sys.lu_ = std::make_shared<const Factorization>(factorize(sys.matrix_));
  } catch (const SingularMatrix& e) {
    throw AssemblyError(std::string("subdomain factorization failed: ") + e.what());
  }
  return sys;
}

}  // namespace ddsweep
