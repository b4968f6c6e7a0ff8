#pragma once

// Group arrangements and the SGS / DS sweeping preconditioners.

#include <algorithm>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ddsweep/core.hpp"
#include "ddsweep/ddm_core.hpp"
#include "ddsweep/geometry_mesh.hpp"

namespace ddsweep {

enum class Direction { HForward, HBackward, VForward, VBackward, D1, D2 };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::HForward: return "H-forward";
    case Direction::HBackward: return "H-backward";
    case Direction::VForward: return "V-forward";
    case Direction::VBackward: return "V-backward";
    case Direction::D1: return "D1";
    case Direction::D2: return "D2";
  }
  return "?";
}

inline bool is_diagonal(Direction d) { return d == Direction::D1 || d == Direction::D2; }

// Edge lists hold indices into interface_topology(p).directed, which coincide
// with transmission block indices.
struct GroupArrangement {
  Direction direction = Direction::HForward;
  std::vector<std::vector<int>> groups;  // cell ids, null cells included
  std::vector<int> group_of;             // per cell
  // crossing[S]: directed edges between groups S and S+1, both orientations.
  std::vector<std::vector<int>> crossing;
  // within[S]: directed edges with both cells in group S.
  std::vector<std::vector<int>> within;

  int num_groups() const { return static_cast<int>(groups.size()); }
};

inline GroupArrangement build_groups(const CheckerboardPartition& p, Direction dir) {
  GroupArrangement a;
  a.direction = dir;
  int count = 0;
  auto key = [&](int r, int c) {
    switch (dir) {
      case Direction::HForward: return c;
      case Direction::HBackward: return p.n_cols - 1 - c;
      case Direction::VForward: return r;
      case Direction::VBackward: return p.n_rows - 1 - r;
      case Direction::D1: return r + c;
      case Direction::D2: return c - r + p.n_rows - 1;
    }
    return 0;
  };
  switch (dir) {
    case Direction::HForward:
    case Direction::HBackward: count = p.n_cols; break;
    case Direction::VForward:
    case Direction::VBackward: count = p.n_rows; break;
    case Direction::D1:
    case Direction::D2: count = p.n_rows + p.n_cols - 1; break;
  }
  a.groups.resize(static_cast<std::size_t>(count));
  a.group_of.resize(static_cast<std::size_t>(p.num_domains()));
  for (int id = 0; id < p.num_domains(); ++id) {
    const int g = key(p.row_of(id), p.col_of(id));
    a.groups[static_cast<std::size_t>(g)].push_back(id);
    a.group_of[static_cast<std::size_t>(id)] = g;
  }
  a.crossing.resize(static_cast<std::size_t>(std::max(count - 1, 0)));
  a.within.resize(static_cast<std::size_t>(count));
  const InterfaceTopology topo = interface_topology(p);
  for (std::size_t e = 0; e < topo.directed.size(); ++e) {
    const int gi = a.group_of[topo.directed[e].from];
    const int gj = a.group_of[topo.directed[e].to];
    if (gi == gj) {
      a.within[gi].push_back(static_cast<int>(e));
    } else if (std::abs(gi - gj) == 1) {
      a.crossing[std::min(gi, gj)].push_back(static_cast<int>(e));
    } else {
      throw Error("interface edge skips a group");
    }
  }
  return a;
}

enum class PrecondKind { SGS, DS };

struct PrecondConfig {
  PrecondKind kind = PrecondKind::SGS;
  std::vector<Direction> schedule{Direction::D1};
};

inline Direction next_direction(const PrecondConfig& cfg, int outer_iteration) {
  if (cfg.schedule.empty()) throw InvalidArgument("empty preconditioner schedule");
  if (outer_iteration < 0) throw InvalidArgument("negative iteration index");
  return cfg.schedule[static_cast<std::size_t>(outer_iteration) % cfg.schedule.size()];
}

namespace detail {

// One sweep step from group `from` towards the adjacent group `to`: solve
// every cell of `from`, then update the data of `to` received from it. With
// `cancel`, data on edges shared with `to` is dropped from the solves and the
// -r_IJ term is omitted (DS); otherwise both are kept (SGS).
inline void sweep_step(const DdmOperator& op, const GroupArrangement& arr, int from, int to, bool cancel,
                       std::span<Complex> r) {
  const auto& lay = op.layout();
  const auto& cells = arr.groups[static_cast<std::size_t>(from)];
  parallel_for(cells.size(), op.threads(), [&](std::size_t k) {
    const int i = cells[k];
    if (!op.partition().is_active(i)) return;
    auto include = [&](int b) { return !cancel || arr.group_of[lay.blocks[b].neighbor] != to; };
    const CVector local = op.solve_cell(i, std::span<const Complex>(r.data(), r.size()), false, include);
    CVector out;
    for (int b : op.fed_by(i)) {
      if (arr.group_of[lay.blocks[b].owner] != to) continue;
      out.resize(static_cast<std::size_t>(lay.blocks[b].size()));
      op.outgoing(b, local, out);
      auto dst = lay.view(r, b);
      if (cancel) {
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += out[t];
      } else {
        const auto src = lay.view(std::span<const Complex>(r.data(), r.size()), lay.reverse(b));
        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = dst[t] - src[t] + out[t];
      }
    }
  });
}

inline void check_size(const DdmOperator& op, std::span<const Complex> r) {
  if (static_cast<int>(r.size()) != op.size()) throw InvalidArgument("vector does not match the transmission layout");
}

}  // namespace detail

inline CVector sgs_apply(const DdmOperator& op, const GroupArrangement& arr, std::span<const Complex> r) {
  detail::check_size(op, r);
  CVector y(r.begin(), r.end());
  const int n = arr.num_groups();
  for (int s = 0; s + 1 < n; ++s) detail::sweep_step(op, arr, s, s + 1, false, y);
  for (int s = n - 1; s >= 1; --s) detail::sweep_step(op, arr, s, s - 1, false, y);
  return y;
}

inline void ds_forward(const DdmOperator& op, const GroupArrangement& arr, std::span<Complex> r) {
  for (int s = 0; s + 1 < arr.num_groups(); ++s) detail::sweep_step(op, arr, s, s + 1, true, r);
}

inline void ds_backward(const DdmOperator& op, const GroupArrangement& arr, std::span<Complex> r) {
  for (int s = arr.num_groups() - 1; s >= 1; --s) detail::sweep_step(op, arr, s, s - 1, true, r);
}

// The two sweeps touch disjoint parts of the vector and run concurrently when
// more than one thread is allowed.
inline CVector ds_apply(const DdmOperator& op, const GroupArrangement& arr, std::span<const Complex> r) {
  detail::check_size(op, r);
  CVector y(r.begin(), r.end());
  parallel_for(2, op.threads() > 1 ? 2 : 1, [&](std::size_t which) {
    if (which == 0)
      ds_forward(op, arr, y);
    else
      ds_backward(op, arr, y);
  });
  return y;
}

// Vector indices written by the DS forward (or backward) sweep.
inline std::set<int> ds_write_set(const DdmOperator& op, const GroupArrangement& arr, bool forward) {
  const auto& lay = op.layout();
  std::set<int> out;
  for (const auto& edges : arr.crossing)
    for (int b : edges) {
      const auto& blk = lay.blocks[static_cast<std::size_t>(b)];
      if (blk.dummy) continue;
      const bool points_down = arr.group_of[blk.owner] > arr.group_of[blk.neighbor];
      if (points_down != forward) continue;
      for (int t = 0; t < blk.size(); ++t) out.insert(blk.offset + t);
    }
  return out;
}

// Vector indices read by the DS forward (or backward) sweep: every block owned
// by a solved cell except the ones facing the group being updated.
inline std::set<int> ds_read_set(const DdmOperator& op, const GroupArrangement& arr, bool forward) {
  const auto& lay = op.layout();
  std::set<int> out;
  for (const auto& blk : lay.blocks) {
    if (blk.dummy) continue;
    const int go = arr.group_of[blk.owner];
    const int gn = arr.group_of[blk.neighbor];
    const bool solved = forward ? go + 1 < arr.num_groups() : go > 0;
    if (!solved || gn == (forward ? go + 1 : go - 1)) continue;
    for (int t = 0; t < blk.size(); ++t) out.insert(blk.offset + t);
  }
  return out;
}

// Block F_[S+1]^[S] (lower, towards the next group) or F_[S-1]^[S] (upper) applied to x:
// rows are the blocks of the target group fed by group S. With `modified`,
// the columns of blocks of S facing the target group are dropped, giving the
// DS blocks.
inline CVector group_block_apply(const DdmOperator& op, const GroupArrangement& arr, int s, bool lower, bool modified,
                                 std::span<const Complex> x) {
  detail::check_size(op, x);
  const auto& lay = op.layout();
  const int to = lower ? s + 1 : s - 1;
  CVector y(x.size());
  if (to < 0 || to >= arr.num_groups()) return y;
  for (int i : arr.groups[static_cast<std::size_t>(s)]) {
    if (!op.partition().is_active(i)) continue;
    auto include = [&](int b) { return !modified || arr.group_of[lay.blocks[b].neighbor] != to; };
    const CVector local = op.solve_cell(i, x, false, include);
    for (int b : op.fed_by(i)) {
      if (arr.group_of[lay.blocks[b].owner] != to) continue;
      auto dst = lay.view(std::span<Complex>(y), b);
      op.outgoing(b, local, dst);
      const auto src = lay.view(x, lay.reverse(b));
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = (modified ? Complex{} : src[t]) - dst[t];
    }
  }
  return y;
}

// Preconditioner provider for Krylov solvers: the direction at outer
// iteration n follows the schedule.
class SweepPreconditioner {
 public:
  SweepPreconditioner(const DdmOperator& op, PrecondConfig cfg) : op_(&op), cfg_(std::move(cfg)) {
    if (cfg_.schedule.empty()) throw InvalidArgument("empty preconditioner schedule");
    for (Direction d : cfg_.schedule) arrangements_.push_back(build_groups(op.partition(), d));
  }

  const PrecondConfig& config() const { return cfg_; }

  CVector operator()(int outer_iteration, std::span<const Complex> v) const {
    const std::size_t k = static_cast<std::size_t>(outer_iteration) % cfg_.schedule.size();
    return cfg_.kind == PrecondKind::SGS ? sgs_apply(*op_, arrangements_[k], v) : ds_apply(*op_, arrangements_[k], v);
  }

 private:
  const DdmOperator* op_;
  PrecondConfig cfg_;
  std::vector<GroupArrangement> arrangements_;
};

}  // namespace ddsweep
