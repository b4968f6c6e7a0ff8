#include <gtest/gtest.h>

#include <random>

#include "ddsweep/sparse_linalg.hpp"
#include "ddsweep/sweeping_precond.hpp"

using namespace ddsweep;

namespace {

DdmSetup small_setup(int rows, int cols, double h = 0.25) {
  DdmSetup s;
  s.partition = build_partition({0, 0, 1.0 * cols, 1.0 * rows}, rows, cols);
  s.k = WavenumberField(2.0 * kPi);
  s.exterior = pade_coefficients(3, kPi / 3.0);
  s.transmission = pade_coefficients(3, kPi / 3.0);
  s.target_h = h;
  return s;
}

CVector random_vector(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  CVector v(n);
  for (auto& z : v) z = {nd(gen), nd(gen)};
  return v;
}

const std::vector<Direction> kAll{Direction::HForward, Direction::HBackward, Direction::VForward,
                                  Direction::VBackward, Direction::D1,       Direction::D2};

// Group of the owner of the block containing vector index i.
std::vector<int> owner_group(const DdmOperator& op, const GroupArrangement& arr) {
  std::vector<int> g(static_cast<std::size_t>(op.size()));
  for (const auto& b : op.layout().blocks)
    for (int t = 0; t < b.size(); ++t) g[b.offset + t] = arr.group_of[b.owner];
  return g;
}

std::vector<int> neighbor_group(const DdmOperator& op, const GroupArrangement& arr) {
  std::vector<int> g(static_cast<std::size_t>(op.size()));
  for (const auto& b : op.layout().blocks)
    for (int t = 0; t < b.size(); ++t) g[b.offset + t] = arr.group_of[b.neighbor];
  return g;
}

DenseMatrix dense_F(const DdmOperator& op) {
  return probe_dense(op.size(), [&](std::span<const Complex> v) { return op.apply_F(v); });
}

// I + (part of F selected by keep(row, col)).
DenseMatrix unit_plus(const DenseMatrix& f, const std::function<bool(int, int)>& keep) {
  DenseMatrix m = DenseMatrix::identity(f.rows);
  for (int i = 0; i < f.rows; ++i)
    for (int j = 0; j < f.cols; ++j)
      if (keep(i, j)) m(i, j) += f(i, j);
  return m;
}

}  // namespace

TEST(Groups, SizesAndCounts) {
  for (int rows = 1; rows <= 8; ++rows)
    for (int cols = 1; cols <= 8; ++cols) {
      const auto p = build_partition({0, 0, 1.0 * cols, 1.0 * rows}, rows, cols);
      for (Direction d : kAll) {
        const auto a = build_groups(p, d);
        int total = 0;
        for (const auto& g : a.groups) total += static_cast<int>(g.size());
        EXPECT_EQ(total, rows * cols);
        switch (d) {
          case Direction::HForward:
          case Direction::HBackward:
            ASSERT_EQ(a.num_groups(), cols);
            for (const auto& g : a.groups) EXPECT_EQ(static_cast<int>(g.size()), rows);
            break;
          case Direction::VForward:
          case Direction::VBackward:
            ASSERT_EQ(a.num_groups(), rows);
            for (const auto& g : a.groups) EXPECT_EQ(static_cast<int>(g.size()), cols);
            break;
          default:
            ASSERT_EQ(a.num_groups(), rows + cols - 1);
            for (int s = 0; s < a.num_groups(); ++s)
              EXPECT_EQ(static_cast<int>(a.groups[s].size()), std::min({s + 1, rows, cols, rows + cols - 1 - s}));
        }
      }
    }
}

TEST(Groups, DiagonalKeys) {
  const auto p = build_partition({0, 0, 4, 3}, 3, 4);
  const auto d1 = build_groups(p, Direction::D1);
  const auto d2 = build_groups(p, Direction::D2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(d1.group_of[p.id(r, c)], r + c);
      EXPECT_EQ(d2.group_of[p.id(r, c)], c - r + 2);
    }
  // Sweeps start at the bottom-left (D1) and top-left (D2) corner cells.
  EXPECT_EQ(d1.groups.front(), std::vector<int>{p.id(0, 0)});
  EXPECT_EQ(d2.groups.front(), std::vector<int>{p.id(2, 0)});
  const auto hb = build_groups(p, Direction::HBackward);
  EXPECT_EQ(hb.group_of[p.id(1, 3)], 0);
}

TEST(Groups, EdgeClassification) {
  for (int rows = 1; rows <= 6; ++rows)
    for (int cols = 1; cols <= 6; ++cols) {
      const auto p = build_partition({0, 0, 1.0 * cols, 1.0 * rows}, rows, cols);
      const auto n_edges = interface_topology(p).directed.size();
      for (Direction d : kAll) {
        const auto a = build_groups(p, d);
        std::size_t within = 0, crossing = 0;
        for (const auto& w : a.within) within += w.size();
        for (const auto& c : a.crossing) crossing += c.size();
        EXPECT_EQ(within + crossing, n_edges);
        if (is_diagonal(d)) {
          EXPECT_EQ(within, 0u);
        } else {
          const bool horizontal = d == Direction::HForward || d == Direction::HBackward;
          EXPECT_EQ(within, static_cast<std::size_t>(2 * (horizontal ? (rows - 1) * cols : rows * (cols - 1))));
        }
      }
    }
}

TEST(Schedule, NextDirection) {
  PrecondConfig two{PrecondKind::SGS, {Direction::D1, Direction::D2}};
  EXPECT_EQ(next_direction(two, 0), Direction::D1);
  EXPECT_EQ(next_direction(two, 1), Direction::D2);
  EXPECT_EQ(next_direction(two, 6), Direction::D1);
  PrecondConfig one{PrecondKind::DS, {Direction::VForward}};
  EXPECT_EQ(next_direction(one, 5), Direction::VForward);
  EXPECT_THROW(next_direction(PrecondConfig{PrecondKind::SGS, {}}, 0), InvalidArgument);
  EXPECT_THROW(next_direction(two, -1), InvalidArgument);
}

// SGS equals (I + U)^{-1} (I + L)^{-1} r with L and U the parts of F coupling
// different groups (below and above the block diagonal in group order).
TEST(Sgs, MatchesDenseTriangularSolves) {
  for (auto [rows, cols] : {std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 3}}) {
    const DdmOperator op(small_setup(rows, cols));
    const DenseMatrix f = dense_F(op);
    const auto r = random_vector(static_cast<std::size_t>(op.size()), 3);
    for (Direction d : kAll) {
      const auto arr = build_groups(op.partition(), d);
      const auto g = owner_group(op, arr);
      const DenseMatrix lower = unit_plus(f, [&](int i, int j) { return g[i] > g[j]; });
      const DenseMatrix upper = unit_plus(f, [&](int i, int j) { return g[i] < g[j]; });
      const CVector ref = dense_solve(upper, dense_solve(lower, r));
      const CVector y = sgs_apply(op, arr, r);
      EXPECT_LE(relative_diff(y, ref), 1e-10) << rows << "x" << cols << " " << to_string(d);
    }
  }
}

// DS: the forward sweep inverts I + L~ and the backward sweep I + U~, where
// the modified blocks drop columns facing the group being updated. Each
// sweep keeps only the components it writes.
TEST(Ds, MatchesDenseModifiedSolves) {
  for (auto [rows, cols] : {std::pair{2, 2}, std::pair{3, 3}}) {
    const DdmOperator op(small_setup(rows, cols));
    const DenseMatrix f = dense_F(op);
    const auto r = random_vector(static_cast<std::size_t>(op.size()), 4);
    for (Direction d : kAll) {
      const auto arr = build_groups(op.partition(), d);
      const auto go = owner_group(op, arr);
      const auto gn = neighbor_group(op, arr);
      const DenseMatrix lt = unit_plus(f, [&](int i, int j) { return go[i] == go[j] + 1 && gn[j] != go[i]; });
      const DenseMatrix ut = unit_plus(f, [&](int i, int j) { return go[i] + 1 == go[j] && gn[j] != go[i]; });
      const CVector fwd = dense_solve(lt, r);
      const CVector bwd = dense_solve(ut, r);
      CVector ref(r);
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (gn[i] < go[i]) ref[i] = fwd[i];
        if (gn[i] > go[i]) ref[i] = bwd[i];
      }
      const CVector y = ds_apply(op, arr, r);
      EXPECT_LE(relative_diff(y, ref), 1e-10) << rows << "x" << cols << " " << to_string(d);
    }
  }
}

TEST(Ds, SweepsCommute) {
  const DdmOperator op(small_setup(3, 3));
  const auto r = random_vector(static_cast<std::size_t>(op.size()), 5);
  for (Direction d : kAll) {
    const auto arr = build_groups(op.partition(), d);
    CVector fb(r), bf(r);
    ds_forward(op, arr, fb);
    ds_backward(op, arr, fb);
    ds_backward(op, arr, bf);
    ds_forward(op, arr, bf);
    EXPECT_EQ(fb, bf) << to_string(d);
    EXPECT_EQ(ds_apply(op, arr, r), fb) << to_string(d);
  }
}

TEST(Ds, WriteAndReadSetsAreDisjoint) {
  const DdmOperator op(small_setup(4, 3));
  for (Direction d : kAll) {
    const auto arr = build_groups(op.partition(), d);
    const auto wf = ds_write_set(op, arr, true), wb = ds_write_set(op, arr, false);
    const auto rf = ds_read_set(op, arr, true), rb = ds_read_set(op, arr, false);
    EXPECT_FALSE(wf.empty());
    EXPECT_FALSE(wb.empty());
    for (int i : wf) {
      EXPECT_EQ(wb.count(i), 0u);
      EXPECT_EQ(rb.count(i), 0u);
    }
    for (int i : wb) EXPECT_EQ(rf.count(i), 0u);
  }
}

TEST(Ds, ConsecutiveModifiedBlocksAnnihilate) {
  const DdmOperator op(small_setup(3, 3));
  const auto x = random_vector(static_cast<std::size_t>(op.size()), 6);
  for (Direction d : kAll) {
    const auto arr = build_groups(op.partition(), d);
    double nontrivial = 0.0;
    for (int s = 0; s + 1 < arr.num_groups(); ++s) {
      // Zero when group s only owns blocks facing s + 1, e.g. a corner cell.
      const CVector down = group_block_apply(op, arr, s, true, true, x);
      nontrivial += norm2(down);
      const CVector back = group_block_apply(op, arr, s + 1, false, true, down);
      EXPECT_EQ(norm2(back), 0.0) << to_string(d) << " s=" << s;
      // The unmodified product does not vanish.
      const CVector full = group_block_apply(op, arr, s + 1, false, false, group_block_apply(op, arr, s, true, false, x));
      EXPECT_GT(norm2(full), 0.0);
    }
    EXPECT_GT(nontrivial, 0.0) << to_string(d);
  }
}

TEST(Blocks, UnmodifiedBlocksAreSubmatricesOfF) {
  const DdmOperator op(small_setup(2, 2));
  const DenseMatrix f = dense_F(op);
  const auto x = random_vector(static_cast<std::size_t>(op.size()), 7);
  const CVector fx = f * x;
  const auto arr = build_groups(op.partition(), Direction::D1);
  const auto go = owner_group(op, arr);
  for (int s = 0; s < arr.num_groups(); ++s)
    for (bool lower : {true, false}) {
      const int to = lower ? s + 1 : s - 1;
      const CVector y = group_block_apply(op, arr, s, lower, false, x);
      CVector ref(x.size());
      for (int i = 0; i < f.rows; ++i) {
        if (go[i] != to) continue;
        for (int j = 0; j < f.cols; ++j)
          if (go[j] == s) ref[i] += f(i, j) * x[j];
      }
      EXPECT_LE(max_abs_diff(y, ref), 1e-10 * (1.0 + norm2(fx)));
    }
}

TEST(Precond, Linearity) {
  const DdmOperator op(small_setup(3, 2));
  const auto r1 = random_vector(static_cast<std::size_t>(op.size()), 8);
  const auto r2 = random_vector(static_cast<std::size_t>(op.size()), 9);
  CVector rs(r1.size());
  for (std::size_t i = 0; i < rs.size(); ++i) rs[i] = 2.0 * r1[i] - kI * r2[i];
  for (PrecondKind kind : {PrecondKind::SGS, PrecondKind::DS}) {
    const SweepPreconditioner m(op, {kind, {Direction::D2}});
    const CVector y1 = m(0, r1), y2 = m(0, r2), ys = m(0, rs);
    CVector ref(ys.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = 2.0 * y1[i] - kI * y2[i];
    EXPECT_LE(relative_diff(ys, ref), 1e-12);
  }
}

TEST(Precond, SingleGroupIsIdentity) {
  const DdmOperator op(small_setup(3, 1));
  const auto r = random_vector(static_cast<std::size_t>(op.size()), 10);
  for (Direction d : {Direction::HForward, Direction::HBackward}) {
    const auto arr = build_groups(op.partition(), d);
    ASSERT_EQ(arr.num_groups(), 1);
    EXPECT_EQ(sgs_apply(op, arr, r), r);
    EXPECT_EQ(ds_apply(op, arr, r), r);
  }
}

TEST(Precond, ScheduleAlternates) {
  const DdmOperator op(small_setup(2, 3));
  const auto r = random_vector(static_cast<std::size_t>(op.size()), 11);
  const SweepPreconditioner m(op, {PrecondKind::SGS, {Direction::D1, Direction::D2}});
  const auto d1 = build_groups(op.partition(), Direction::D1);
  const auto d2 = build_groups(op.partition(), Direction::D2);
  EXPECT_EQ(m(0, r), sgs_apply(op, d1, r));
  EXPECT_EQ(m(1, r), sgs_apply(op, d2, r));
  EXPECT_EQ(m(2, r), sgs_apply(op, d1, r));
  EXPECT_THROW(SweepPreconditioner(op, {PrecondKind::SGS, {}}), InvalidArgument);
}

TEST(Precond, ThreadCountDoesNotChangeResults) {
  auto s = small_setup(3, 3);
  const DdmOperator a(s);
  s.threads = 4;
  const DdmOperator b(s);
  const auto r = random_vector(static_cast<std::size_t>(a.size()), 12);
  for (Direction d : kAll) {
    const auto arr = build_groups(a.partition(), d);
    EXPECT_EQ(sgs_apply(a, arr, r), sgs_apply(b, arr, r));
    EXPECT_EQ(ds_apply(a, arr, r), ds_apply(b, arr, r));
  }
}

TEST(Precond, SizeMismatchRejected) {
  const DdmOperator op(small_setup(2, 2));
  const auto arr = build_groups(op.partition(), Direction::D1);
  EXPECT_THROW(sgs_apply(op, arr, CVector(2)), InvalidArgument);
  EXPECT_THROW(ds_apply(op, arr, CVector(2)), InvalidArgument);
}
