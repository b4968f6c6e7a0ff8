#pragma once

// Checkerboard partitions, structured subdomain meshes and wavenumber fields.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ddsweep/core.hpp"

namespace ddsweep {

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

struct CheckerboardPartition {
  int n_rows = 0;
  int n_cols = 0;
  Rect bounds;
  std::vector<double> xs;    // n_cols + 1 vertical lines
  std::vector<double> ys;    // n_rows + 1 horizontal lines
  std::vector<bool> active;  // indexed by id(r, c)

  int num_domains() const { return n_rows * n_cols; }
  int id(int r, int c) const { return r * n_cols + c; }
  int row_of(int id) const { return id / n_cols; }
  int col_of(int id) const { return id % n_cols; }
  bool is_active(int id) const { return active[static_cast<std::size_t>(id)]; }

  int num_active() const {
    int n = 0;
    for (bool a : active) n += a ? 1 : 0;
    return n;
  }

  Rect cell(int id) const {
    const int r = row_of(id);
    const int c = col_of(id);
    return {xs[c], ys[r], xs[c + 1], ys[r + 1]};
  }

  // Id of the cell across side `s`, or -1 outside the lattice.
  int neighbor(int id, Side s) const {
    const int r = row_of(id);
    const int c = col_of(id);
    switch (s) {
      case Side::Left: return c > 0 ? id - 1 : -1;
      case Side::Right: return c + 1 < n_cols ? id + 1 : -1;
      case Side::Bottom: return r > 0 ? id - n_cols : -1;
      case Side::Top: return r + 1 < n_rows ? id + n_cols : -1;
    }
    return -1;
  }

  // Cell containing p; points on a shared line go to the upper/right cell.
  int locate(Point p) const {
    if (!bounds.contains(p)) return -1;
    int c = 0;
    while (c + 1 < n_cols && p.x >= xs[c + 1]) ++c;
    int r = 0;
    while (r + 1 < n_rows && p.y >= ys[r + 1]) ++r;
    return id(r, c);
  }
};

// `mask` is indexed by id(r, c) = r * n_cols + c with rows counted from the
// bottom of `bounds`.
inline CheckerboardPartition build_partition(const Rect& bounds, int n_rows, int n_cols,
                                             const std::optional<std::vector<bool>>& mask = std::nullopt) {
  if (n_rows < 1 || n_cols < 1) throw InvalidArgument("partition needs at least one row and one column");
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) throw InvalidArgument("partition bounds must have positive size");
  CheckerboardPartition p;
  p.n_rows = n_rows;
  p.n_cols = n_cols;
  p.bounds = bounds;
  p.xs.resize(static_cast<std::size_t>(n_cols) + 1);
  p.ys.resize(static_cast<std::size_t>(n_rows) + 1);
  for (int c = 0; c <= n_cols; ++c)
    p.xs[c] = c == n_cols ? bounds.x1 : bounds.x0 + c * bounds.width() / n_cols;
  for (int r = 0; r <= n_rows; ++r)
    p.ys[r] = r == n_rows ? bounds.y1 : bounds.y0 + r * bounds.height() / n_rows;
  if (mask) {
    if (mask->size() != static_cast<std::size_t>(n_rows * n_cols))
      throw InvalidArgument("mask size does not match the partition grid");
    p.active = *mask;
  } else {
    p.active.assign(static_cast<std::size_t>(n_rows * n_cols), true);
  }
  if (p.num_active() == 0) throw InvalidArgument("partition has no active cell");
  return p;
}

// ---------------------------------------------------------------------------
// Interface topology
// ---------------------------------------------------------------------------

struct DirectedEdge {
  int from = -1;  // owner I: the cell whose side carries the edge
  int to = -1;    // neighbor J
  Side side = Side::Left;  // side of `from`
  bool dummy = false;      // touches a null cell
};

struct CrossPoint {
  Point where;
  std::vector<int> edges;  // indices into InterfaceTopology::undirected
  bool interior = false;   // shared by four cells
};

struct InterfaceTopology {
  std::vector<DirectedEdge> directed;
  std::vector<std::pair<int, int>> undirected;  // (lower id, higher id)
  std::vector<CrossPoint> cross_points;

  int num_interior_cross_points() const {
    int n = 0;
    for (const auto& cp : cross_points) n += cp.interior ? 1 : 0;
    return n;
  }
  int num_boundary_cross_points() const {
    return static_cast<int>(cross_points.size()) - num_interior_cross_points();
  }
};

inline InterfaceTopology interface_topology(const CheckerboardPartition& p) {
  InterfaceTopology t;
  std::map<std::pair<int, int>, int> und;
  for (int id = 0; id < p.num_domains(); ++id) {
    for (int s = 0; s < kNumSides; ++s) {
      const Side side = static_cast<Side>(s);
      const int nb = p.neighbor(id, side);
      if (nb < 0) continue;
      t.directed.push_back({id, nb, side, !p.is_active(id) || !p.is_active(nb)});
      const auto key = std::minmax(id, nb);
      if (!und.count(key)) {
        und[key] = static_cast<int>(t.undirected.size());
        t.undirected.push_back(key);
      }
    }
  }
  // Lattice points other than the four outer corners are cross-points.
  for (int r = 0; r <= p.n_rows; ++r) {
    for (int c = 0; c <= p.n_cols; ++c) {
      const bool row_edge = r == 0 || r == p.n_rows;
      const bool col_edge = c == 0 || c == p.n_cols;
      if (row_edge && col_edge) continue;
      CrossPoint cp;
      cp.where = {p.xs[c], p.ys[r]};
      cp.interior = !row_edge && !col_edge;
      // Vertical interface segments below/above and horizontal left/right.
      auto add = [&](int a, int b) {
        if (a < 0 || b < 0) return;
        cp.edges.push_back(und.at(std::minmax(a, b)));
      };
      if (c > 0 && c < p.n_cols) {
        if (r > 0) add(p.id(r - 1, c - 1), p.id(r - 1, c));
        if (r < p.n_rows) add(p.id(r, c - 1), p.id(r, c));
      }
      if (r > 0 && r < p.n_rows) {
        if (c > 0) add(p.id(r - 1, c - 1), p.id(r, c - 1));
        if (c < p.n_cols) add(p.id(r - 1, c), p.id(r, c));
      }
      t.cross_points.push_back(std::move(cp));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Wavenumber fields
// ---------------------------------------------------------------------------

class WavenumberField {
 public:
  WavenumberField() : WavenumberField(2.0 * kPi) {}
  explicit WavenumberField(double k) : fn_([k](Point) { return k; }), constant_(k) {
    if (!(k > 0.0)) throw InvalidArgument("wavenumber must be positive");
  }
  explicit WavenumberField(std::function<double(Point)> fn) : fn_(std::move(fn)) {}

  // Horizontal layers: k = values[i] for tops[i-1] <= y < tops[i]; the last
  // value extends upward indefinitely.
  static WavenumberField layered(std::vector<double> tops, std::vector<double> values) {
    if (values.empty() || tops.size() + 1 != values.size())
      throw InvalidArgument("layered wavenumber needs one more value than interfaces");
    for (double v : values)
      if (!(v > 0.0)) throw InvalidArgument("wavenumber must be positive");
    return WavenumberField([tops = std::move(tops), values = std::move(values)](Point p) {
      std::size_t i = 0;
      while (i < tops.size() && p.y >= tops[i]) ++i;
      return values[i];
    });
  }

  double operator()(Point p) const {
    const double k = fn_(p);
    if (!(k > 0.0)) throw InvalidArgument("wavenumber field is not positive at a sample point");
    return k;
  }

  std::optional<double> constant() const { return constant_; }

 private:
  std::function<double(Point)> fn_;
  std::optional<double> constant_;
};

// ---------------------------------------------------------------------------
// Subdomain mesh
// ---------------------------------------------------------------------------

// Number of uniform intervals on a side of the given length.
inline int side_intervals(double length, double target_h) {
  if (!(target_h > 0.0)) throw InvalidArgument("target mesh size must be positive");
  return std::max(1, static_cast<int>(std::ceil(length / target_h - 1e-9)));
}

// Coordinate of node i out of n intervals on [a, b]. The end points are
// reproduced exactly so neighbors agree bitwise.
inline double lattice_coord(double a, double b, int i, int n) {
  return i == n ? b : a + i * (b - a) / n;
}

struct SubdomainMesh {
  int order = 1;  // 1 = P1, 2 = P2
  Rect cell;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;  // vertex triples, counter-clockwise
  // Element connectivity: 3 vertices for P1; 3 vertices then the midpoints of
  // edges (v0,v1), (v1,v2), (v2,v0) for P2.
  std::vector<std::vector<int>> elements;
  std::array<std::vector<int>, 4> traces;  // ordered along each side
  std::vector<int> obstacle_boundary_nodes;
  std::optional<Rect> hole;  // snapped obstacle

  int nodes_per_element() const { return order == 1 ? 3 : 6; }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point& a = nodes[tri[0]];
    const Point& b = nodes[tri[1]];
    const Point& c = nodes[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }

  double total_area() const {
    double s = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
    return s;
  }
};

namespace detail {

inline SubdomainMesh elevate_to_p2(SubdomainMesh m) {
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const Point& pa = m.nodes[key.first];
    const Point& pb = m.nodes[key.second];
    // Trace nodes of both neighbors hold identical end points, so the
    // midpoint is bitwise identical as well.
    m.nodes.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    const int id = static_cast<int>(m.nodes.size()) - 1;
    mid.emplace(key, id);
    return id;
  };
  for (auto& e : m.elements) {
    const int v0 = e[0], v1 = e[1], v2 = e[2];
    e = {v0, v1, v2, midpoint(v0, v1), midpoint(v1, v2), midpoint(v2, v0)};
  }
  for (auto& tr : m.traces) {
    std::vector<int> out;
    out.reserve(tr.size() * 2);
    for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
      out.push_back(tr[i]);
      out.push_back(midpoint(tr[i], tr[i + 1]));
    }
    out.push_back(tr.back());
    tr = std::move(out);
  }
  if (!m.obstacle_boundary_nodes.empty()) {
    std::vector<bool> on(m.nodes.size(), false);
    for (int n : m.obstacle_boundary_nodes) on[n] = true;
    std::vector<int> extra;
    for (const auto& [key, id] : mid)
      if (on[key.first] && on[key.second]) {
        // Both ends on the hole boundary; the edge lies on it only if it is
        // axis-aligned along a hole side.
        const Point& p = m.nodes[id];
        const Rect& h = *m.hole;
        if (p.x == h.x0 || p.x == h.x1 || p.y == h.y0 || p.y == h.y1) extra.push_back(id);
      }
    std::sort(extra.begin(), extra.end());
    m.obstacle_boundary_nodes.insert(m.obstacle_boundary_nodes.end(), extra.begin(), extra.end());
  }
  m.order = 2;
  return m;
}

}  // namespace detail

// Structured grid split into right triangles along the (i,j)-(i+1,j+1)
// diagonal. A hole is snapped to the nearest grid lines.
inline SubdomainMesh build_subdomain_mesh(const Rect& cell, double target_h,
                                          const std::optional<Rect>& obstacle = std::nullopt,
                                          int order = 1) {
  if (order != 1 && order != 2) throw InvalidArgument("element order must be 1 or 2");
  const int nx = side_intervals(cell.width(), target_h);
  const int ny = side_intervals(cell.height(), target_h);
  auto gx = [&](int i) { return lattice_coord(cell.x0, cell.x1, i, nx); };
  auto gy = [&](int j) { return lattice_coord(cell.y0, cell.y1, j, ny); };

  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
  SubdomainMesh m;
  m.cell = cell;
  if (obstacle) {
    if (!cell.strictly_contains(*obstacle))
      throw UnsupportedGeometry("obstacle must lie strictly inside its cell");
    i0 = static_cast<int>(std::lround((obstacle->x0 - cell.x0) / cell.width() * nx));
    i1 = static_cast<int>(std::lround((obstacle->x1 - cell.x0) / cell.width() * nx));
    j0 = static_cast<int>(std::lround((obstacle->y0 - cell.y0) / cell.height() * ny));
    j1 = static_cast<int>(std::lround((obstacle->y1 - cell.y0) / cell.height() * ny));
    if (i0 < 1 || j0 < 1 || i1 > nx - 1 || j1 > ny - 1 || i1 <= i0 || j1 <= j0)
      throw UnsupportedGeometry("obstacle does not resolve to a hole strictly inside the mesh");
    m.hole = Rect{gx(i0), gy(j0), gx(i1), gy(j1)};
  }
  auto in_hole_cell = [&](int i, int j) { return obstacle && i >= i0 && i < i1 && j >= j0 && j < j1; };
  auto strictly_in_hole = [&](int i, int j) { return obstacle && i > i0 && i < i1 && j > j0 && j < j1; };

  std::vector<int> id((nx + 1) * (ny + 1), -1);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      if (strictly_in_hole(i, j)) continue;
      id[j * (nx + 1) + i] = static_cast<int>(m.nodes.size());
      m.nodes.push_back({gx(i), gy(j)});
      if (obstacle && i >= i0 && i <= i1 && j >= j0 && j <= j1) m.obstacle_boundary_nodes.push_back(id[j * (nx + 1) + i]);
    }
  auto node = [&](int i, int j) { return id[j * (nx + 1) + i]; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (in_hole_cell(i, j)) continue;
      const int a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1), d = node(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  for (const auto& t : m.triangles) m.elements.push_back({t[0], t[1], t[2]});
  for (int j = 0; j <= ny; ++j) {
    m.traces[index(Side::Left)].push_back(node(0, j));
    m.traces[index(Side::Right)].push_back(node(nx, j));
  }
  for (int i = 0; i <= nx; ++i) {
    m.traces[index(Side::Bottom)].push_back(node(i, 0));
    m.traces[index(Side::Top)].push_back(node(i, ny));
  }
  if (order == 2) return detail::elevate_to_p2(std::move(m));
  return m;
}

// Legacy ASCII VTK dump of the vertex triangulation.
inline void write_mesh_vtk(std::ostream& os, const SubdomainMesh& m) {
  os << "# vtk DataFile Version 3.0\nsubdomain mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.nodes.size() << " double\n";
  for (const auto& p : m.nodes) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << m.triangles.size() << ' ' << 4 * m.triangles.size() << '\n';
  for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << m.triangles.size() << '\n';
  for (std::size_t t = 0; t < m.triangles.size(); ++t) os << "5\n";
}

}  // namespace ddsweep
