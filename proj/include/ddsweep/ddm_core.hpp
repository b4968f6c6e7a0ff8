#pragma once

// Global transmission layout and the matrix-free operators A and F = I - A.

#include <array>
#include <algorithm>
#include <functional>
#include <limits>
#include <mutex>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ddsweep/core.hpp"
#include "ddsweep/fem_assembly.hpp"
#include "ddsweep/geometry_mesh.hpp"
#include "ddsweep/habc.hpp"

namespace ddsweep {

enum class NullCellMode {
  Masked,       // null cells carry no system
  ZeroCoupled,  // null cells carry a decoupled system solved with zero data
};

struct Obstacle {
  Rect rect;
  // Dirichlet data on the obstacle boundary (typically -u_inc).
  std::function<Complex(Point)> data;
};

struct DdmSetup {
  CheckerboardPartition partition;
  WavenumberField k;
  PadeParams exterior = pade_coefficients(8, kPi / 3.0);
  PadeParams transmission = pade_coefficients(8, kPi / 3.0);
  double target_h = 1.0 / 15.0;
  int order = 1;
  std::vector<PointSource> sources;
  std::vector<Obstacle> obstacles;  // at most one per cell
  NullCellMode null_mode = NullCellMode::Masked;
  int threads = 1;
};

// One block g_IJ: data received by `owner` on its side facing `neighbor`,
// laid out as [trace; corner scalars at first endpoint; at last endpoint].
struct TransmissionBlock {
  int owner = -1;
  int neighbor = -1;
  Side side = Side::Left;
  bool dummy = false;
  int offset = 0;
  int trace_len = 0;
  std::array<int, 2> corners{0, 0};

  int size() const { return trace_len + corners[0] + corners[1]; }
  int corner_offset(int endpoint) const { return offset + trace_len + (endpoint == 0 ? 0 : corners[0]); }
};

struct TransmissionLayout {
  std::vector<TransmissionBlock> blocks;
  std::vector<std::array<int, 4>> block_of;  // (cell, side) -> block index or -1
  int total = 0;

  int find(int cell, Side s) const { return block_of[static_cast<std::size_t>(cell)][index(s)]; }

  // Block of the reverse directed edge.
  int reverse(int b) const {
    const auto& blk = blocks[static_cast<std::size_t>(b)];
    return find(blk.neighbor, opposite(blk.side));
  }

  std::span<Complex> view(std::span<Complex> g, int b) const {
    const auto& blk = blocks[static_cast<std::size_t>(b)];
    return g.subspan(static_cast<std::size_t>(blk.offset), static_cast<std::size_t>(blk.size()));
  }
  std::span<const Complex> view(std::span<const Complex> g, int b) const {
    const auto& blk = blocks[static_cast<std::size_t>(b)];
    return g.subspan(static_cast<std::size_t>(blk.offset), static_cast<std::size_t>(blk.size()));
  }
};

// Side kinds of a cell: transmission towards active neighbors, exterior
// elsewhere. Null cells have only dummy sides.
inline std::array<SideKind, 4> cell_side_kinds(const CheckerboardPartition& p, int id) {
  std::array<SideKind, 4> kinds{};
  for (int s = 0; s < kNumSides; ++s) {
    if (!p.is_active(id)) {
      kinds[s] = SideKind::Dummy;
      continue;
    }
    const int nb = p.neighbor(id, static_cast<Side>(s));
    kinds[s] = (nb >= 0 && p.is_active(nb)) ? SideKind::Transmission : SideKind::Exterior;
  }
  return kinds;
}

inline BoundarySetup cell_boundary(const DdmSetup& setup, int id) {
  BoundarySetup b;
  b.kinds = cell_side_kinds(setup.partition, id);
  b.exterior = setup.exterior;
  b.transmission = setup.transmission;
  return b;
}

inline TransmissionLayout build_transmission_layout(const DdmSetup& setup) {
  const auto& p = setup.partition;
  const InterfaceTopology topo = interface_topology(p);
  TransmissionLayout lay;
  lay.block_of.assign(static_cast<std::size_t>(p.num_domains()), {-1, -1, -1, -1});
  int offset = 0;
  for (const auto& e : topo.directed) {
    TransmissionBlock b;
    b.owner = e.from;
    b.neighbor = e.to;
    b.side = e.side;
    b.dummy = e.dummy;
    const Rect c = p.cell(e.from);
    const double len = is_vertical(e.side) ? c.height() : c.width();
    b.trace_len = side_intervals(len, setup.target_h) * setup.order + 1;
    if (!b.dummy) {
      const BoundarySetup bi = cell_boundary(setup, e.from);
      const BoundarySetup bj = cell_boundary(setup, e.to);
      for (int ep = 0; ep < 2; ++ep) {
        const Side y = perpendicular_at(e.side, ep);
        if (bi.has_aux(e.side) && bi.has_aux(y) && bj.has_aux(y)) b.corners[ep] = setup.transmission.n_aux;
      }
    }
    b.offset = offset;
    offset += b.size();
    lay.block_of[static_cast<std::size_t>(e.from)][index(e.side)] = static_cast<int>(lay.blocks.size());
    lay.blocks.push_back(b);
  }
  lay.total = offset;
  return lay;
}

struct JumpReport {
  double max_relative = 0.0;  // largest per-edge RMS jump over the global RMS of u
  double global_rms = 0.0;
};

class DdmOperator {
 public:
  explicit DdmOperator(DdmSetup setup) : setup_(std::move(setup)) {
    const auto& p = setup_.partition;
    layout_ = build_transmission_layout(setup_);
    obstacle_of_.assign(static_cast<std::size_t>(p.num_domains()), -1);
    for (std::size_t o = 0; o < setup_.obstacles.size(); ++o) {
      const Rect& rect = setup_.obstacles[o].rect;
      const int cell = p.locate(rect.center());
      if (cell < 0 || !p.cell(cell).strictly_contains(rect))
        throw UnsupportedGeometry("obstacle must lie strictly inside one cell");
      if (!p.is_active(cell)) throw InvalidArgument("obstacle placed in a null cell");
      if (obstacle_of_[cell] >= 0) throw UnsupportedGeometry("more than one obstacle in a cell");
      obstacle_of_[cell] = static_cast<int>(o);
    }
    source_cells_.assign(static_cast<std::size_t>(p.num_domains()), {});
    for (const auto& s : setup_.sources) {
      const int id = p.locate(s.where);
      if (id < 0 || !p.is_active(id)) throw InvalidArgument("point source outside the active domain");
      source_cells_[static_cast<std::size_t>(id)].push_back(s);
    }
    systems_.resize(static_cast<std::size_t>(p.num_domains()));
    parallel_for(systems_.size(), setup_.threads, [&](std::size_t i) {
      const int id = static_cast<int>(i);
      if (!p.is_active(id) && setup_.null_mode == NullCellMode::Masked) return;
      systems_[i] = std::make_shared<const SubdomainSystem>(assemble_subdomain(cell_problem(id)));
    });
  }

  const DdmSetup& setup() const { return setup_; }
  const CheckerboardPartition& partition() const { return setup_.partition; }
  const TransmissionLayout& layout() const { return layout_; }
  int size() const { return layout_.total; }
  int threads() const { return setup_.threads; }
  void set_threads(int n) { setup_.threads = n; }
  const SubdomainSystem* system(int id) const { return systems_[static_cast<std::size_t>(id)].get(); }

  // Test hook: when disabled, the 2B(u) contributions are omitted from A.
  void set_extraction_enabled(bool on) { extraction_enabled_ = on; }

  SubdomainProblem cell_problem(int id) const {
    SubdomainProblem prob;
    const int o = obstacle_of_[static_cast<std::size_t>(id)];
    const bool with_hole = o >= 0;
    prob.mesh = std::make_shared<const SubdomainMesh>(build_subdomain_mesh(
        setup_.partition.cell(id), setup_.target_h,
        with_hole ? std::optional<Rect>(setup_.obstacles[o].rect) : std::nullopt, setup_.order));
    prob.k = setup_.k;
    prob.boundary = cell_boundary(setup_, id);
    if (with_hole) prob.dirichlet = setup_.obstacles[o].data;
    if (setup_.partition.is_active(id)) prob.sources = source_cells_[static_cast<std::size_t>(id)];
    return prob;
  }

  // Solves cell `id` with the blocks it owns, keeping only those for which
  // include(block index) holds.
  template <class Include>
  CVector solve_cell(int id, std::span<const Complex> g, bool use_source, Include&& include) const {
    const SubdomainSystem& sys = *systems_[static_cast<std::size_t>(id)];
    std::array<SideData, 4> in{};
    if (setup_.partition.is_active(id)) {
      for (int s = 0; s < kNumSides; ++s) {
        const int b = layout_.find(id, static_cast<Side>(s));
        if (b < 0 || layout_.blocks[b].dummy || !include(b)) continue;
        in[s] = side_data(g, b);
      }
    }
    return sys.solve(in, use_source);
  }

  CVector solve_cell(int id, std::span<const Complex> g, bool use_source) const {
    return solve_cell(id, g, use_source, [](int) { return true; });
  }

  // Writes 2B(u_J) of cell J = blocks[b].neighbor into `out` (block-sized).
  void outgoing(int b, std::span<const Complex> local_j, std::span<Complex> out) const {
    const auto& blk = layout_.blocks[static_cast<std::size_t>(b)];
    const SubdomainSystem& sys = *systems_[static_cast<std::size_t>(blk.neighbor)];
    if (!extraction_enabled_) {
      std::fill(out.begin(), out.end(), Complex{});
      return;
    }
    sys.extract(local_j, opposite(blk.side), out.first(static_cast<std::size_t>(blk.trace_len)),
                out.subspan(static_cast<std::size_t>(blk.trace_len), static_cast<std::size_t>(blk.corners[0])),
                out.subspan(static_cast<std::size_t>(blk.trace_len + blk.corners[0]),
                            static_cast<std::size_t>(blk.corners[1])));
  }

  // Blocks (I -> J) fed by cell J, i.e. the data J sends to its neighbors.
  std::vector<int> fed_by(int j) const {
    std::vector<int> out;
    for (int s = 0; s < kNumSides; ++s) {
      const int own = layout_.find(j, static_cast<Side>(s));
      if (own < 0) continue;
      const int b = layout_.reverse(own);
      if (!layout_.blocks[b].dummy) out.push_back(b);
    }
    return out;
  }

  CVector apply_A(std::span<const Complex> g) const {
    check(g);
    CVector out(static_cast<std::size_t>(layout_.total));
    const auto& p = setup_.partition;
    parallel_for(static_cast<std::size_t>(p.num_domains()), setup_.threads, [&](std::size_t i) {
      const int j = static_cast<int>(i);
      if (!systems_[i]) return;
      const CVector local = solve_cell(j, g, false);
      if (!p.is_active(j)) return;
      for (int b : fed_by(j)) {
        auto dst = layout_.view(std::span<Complex>(out), b);
        outgoing(b, local, dst);
        const auto src = layout_.view(g, layout_.reverse(b));
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] -= src[t];
      }
    });
    return out;
  }

  CVector apply_F(std::span<const Complex> g) const {
    CVector out = apply_A(g);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] - out[i];
    return out;
  }

  CVector compute_rhs() const {
    CVector b(static_cast<std::size_t>(layout_.total));
    const CVector zero(static_cast<std::size_t>(layout_.total));
    const auto& p = setup_.partition;
    parallel_for(static_cast<std::size_t>(p.num_domains()), setup_.threads, [&](std::size_t i) {
      const int j = static_cast<int>(i);
      if (!p.is_active(j)) return;
      const CVector local = solve_cell(j, zero, true);
      for (int blk : fed_by(j)) outgoing(blk, local, layout_.view(std::span<Complex>(b), blk));
    });
    return b;
  }

  const CVector& rhs() const {
    std::call_once(rhs_once_->flag, [&] { rhs_once_->value = compute_rhs(); });
    return rhs_once_->value;
  }

  // Nodal fields per cell (empty for null cells) with sources and data g.
  std::vector<CVector> reconstruct_solution(std::span<const Complex> g) const {
    check(g);
    const auto& p = setup_.partition;
    std::vector<CVector> fields(static_cast<std::size_t>(p.num_domains()));
    parallel_for(fields.size(), setup_.threads, [&](std::size_t i) {
      const int j = static_cast<int>(i);
      if (!p.is_active(j)) return;
      const CVector local = solve_cell(j, g, true);
      fields[i] = systems_[i]->nodal_field(local, true);
    });
    return fields;
  }

  JumpReport interface_jumps(const std::vector<CVector>& fields) const {
    const auto& p = setup_.partition;
    JumpReport r;
    double sum = 0.0;
    std::size_t count = 0;
    for (int id = 0; id < p.num_domains(); ++id)
      for (const auto& z : fields[static_cast<std::size_t>(id)]) {
        sum += std::norm(z);
        ++count;
      }
    r.global_rms = count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
    for (const auto& blk : layout_.blocks) {
      if (blk.dummy || blk.owner > blk.neighbor) continue;
      const auto& ti = systems_[blk.owner]->mesh().traces[index(blk.side)];
      const auto& tj = systems_[blk.neighbor]->mesh().traces[index(opposite(blk.side))];
      double s = 0.0;
      for (std::size_t t = 0; t < ti.size(); ++t)
        s += std::norm(fields[blk.owner][ti[t]] - fields[blk.neighbor][tj[t]]);
      const double rms = std::sqrt(s / static_cast<double>(ti.size()));
      if (r.global_rms > 0.0) r.max_relative = std::max(r.max_relative, rms / r.global_rms);
    }
    return r;
  }

 private:
  struct OnceValue {
    std::once_flag flag;
    CVector value;
  };

  void check(std::span<const Complex> g) const {
    if (static_cast<int>(g.size()) != layout_.total) throw InvalidArgument("transmission vector does not match the layout");
  }

  SideData side_data(std::span<const Complex> g, int b) const {
    const auto& blk = layout_.blocks[static_cast<std::size_t>(b)];
    const auto v = layout_.view(g, b);
    return {v.first(static_cast<std::size_t>(blk.trace_len)),
            v.subspan(static_cast<std::size_t>(blk.trace_len), static_cast<std::size_t>(blk.corners[0])),
            v.subspan(static_cast<std::size_t>(blk.trace_len + blk.corners[0]), static_cast<std::size_t>(blk.corners[1]))};
  }

  DdmSetup setup_;
  TransmissionLayout layout_;
  std::vector<std::shared_ptr<const SubdomainSystem>> systems_;
  std::vector<std::vector<PointSource>> source_cells_;
  std::vector<int> obstacle_of_;
  bool extraction_enabled_ = true;
  std::shared_ptr<OnceValue> rhs_once_ = std::make_shared<OnceValue>();
};

// ---------------------------------------------------------------------------
// Mono-domain reference
// ---------------------------------------------------------------------------

// Union of the cell meshes of an all-active partition, with nodes merged by
// exact coordinates.
inline SubdomainMesh union_mesh(const DdmOperator& op) {
  const auto& p = op.partition();
  SubdomainMesh u;
  u.cell = p.bounds;
  u.order = op.setup().order;
  std::map<std::pair<double, double>, int> index_of;
  auto global = [&](Point pt) {
    auto [it, fresh] = index_of.try_emplace({pt.x, pt.y}, static_cast<int>(u.nodes.size()));
    if (fresh) u.nodes.push_back(pt);
    return it->second;
  };
  for (int id = 0; id < p.num_domains(); ++id) {
    const SubdomainMesh& m = op.system(id)->mesh();
    std::vector<int> map(m.nodes.size());
    for (std::size_t n = 0; n < m.nodes.size(); ++n) map[n] = global(m.nodes[n]);
    for (const auto& t : m.triangles) u.triangles.push_back({map[t[0]], map[t[1]], map[t[2]]});
    for (const auto& e : m.elements) {
      std::vector<int> ge(e.size());
      for (std::size_t a = 0; a < e.size(); ++a) ge[a] = map[e[a]];
      u.elements.push_back(std::move(ge));
    }
    for (int n : m.obstacle_boundary_nodes) u.obstacle_boundary_nodes.push_back(map[n]);
  }
  // Outer traces: concatenate the cell traces along each boundary side.
  auto append = [&](std::vector<int>& dst, int id, Side s) {
    const SubdomainMesh& m = op.system(id)->mesh();
    const auto& tr = m.traces[index(s)];
    for (std::size_t t = dst.empty() ? 0 : 1; t < tr.size(); ++t) dst.push_back(global(m.nodes[tr[t]]));
  };
  for (int r = 0; r < p.n_rows; ++r) {
    append(u.traces[index(Side::Left)], p.id(r, 0), Side::Left);
    append(u.traces[index(Side::Right)], p.id(r, p.n_cols - 1), Side::Right);
  }
  for (int c = 0; c < p.n_cols; ++c) {
    append(u.traces[index(Side::Bottom)], p.id(0, c), Side::Bottom);
    append(u.traces[index(Side::Top)], p.id(p.n_rows - 1, c), Side::Top);
  }
  return u;
}

struct MonoReference {
  std::shared_ptr<const SubdomainMesh> mesh;
  CVector field;  // nodal values on the union mesh
  std::map<std::pair<double, double>, int> node_at;
};

// Solves the unpartitioned problem on the union mesh with exterior conditions
// on the four outer sides. Requires an all-active partition and a constant
// wavenumber (side wavenumbers of the cells and of the full rectangle agree
// only then).
inline std::optional<MonoReference> mono_domain_reference(const DdmOperator& op) {
  const auto& p = op.partition();
  if (p.num_active() != p.num_domains() || !op.setup().k.constant()) return std::nullopt;
  MonoReference ref;
  ref.mesh = std::make_shared<const SubdomainMesh>(union_mesh(op));
  SubdomainProblem prob;
  prob.mesh = ref.mesh;
  prob.k = op.setup().k;
  prob.boundary.kinds = {SideKind::Exterior, SideKind::Exterior, SideKind::Exterior, SideKind::Exterior};
  prob.boundary.exterior = op.setup().exterior;
  prob.boundary.transmission = op.setup().exterior;
  // Each obstacle carries its own data. Holes are snapped to the grid, so a
  // boundary node is attributed to the nearest obstacle rectangle.
  if (!op.setup().obstacles.empty()) {
    prob.dirichlet = [obs = op.setup().obstacles](Point pt) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < obs.size(); ++o) {
        const Rect& r = obs[o].rect;
        const double dx = std::max({r.x0 - pt.x, 0.0, pt.x - r.x1});
        const double dy = std::max({r.y0 - pt.y, 0.0, pt.y - r.y1});
        const double d = std::hypot(dx, dy);
        if (d < best_d) {
          best_d = d;
          best = o;
        }
      }
      return obs[best].data ? obs[best].data(pt) : Complex{};
    };
  }
  prob.sources = op.setup().sources;
  const SubdomainSystem sys = assemble_subdomain(prob);
  const CVector local = sys.solve(sys.source_rhs());
  ref.field = sys.nodal_field(local, true);
  for (std::size_t n = 0; n < ref.mesh->nodes.size(); ++n)
    ref.node_at[{ref.mesh->nodes[n].x, ref.mesh->nodes[n].y}] = static_cast<int>(n);
  return ref;
}

// Relative l2 difference between per-cell fields and the reference, over all
// cell nodes.
inline double relative_error_vs_reference(const DdmOperator& op, const std::vector<CVector>& fields,
                                          const MonoReference& ref) {
  double num = 0.0, den = 0.0;
  for (int id = 0; id < op.partition().num_domains(); ++id) {
    if (fields[static_cast<std::size_t>(id)].empty()) continue;
    const auto& m = op.system(id)->mesh();
    for (std::size_t n = 0; n < m.nodes.size(); ++n) {
      const Complex r = ref.field[ref.node_at.at({m.nodes[n].x, m.nodes[n].y})];
      num += std::norm(fields[id][n] - r);
      den += std::norm(r);
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace ddsweep
