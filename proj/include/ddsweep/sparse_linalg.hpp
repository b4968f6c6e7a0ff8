#pragma once

// Complex sparse matrices, reverse Cuthill-McKee ordering, a left-looking
// sparse LU with threshold partial pivoting, and small dense kernels.

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <tuple>
#include <vector>

#include "ddsweep/core.hpp"

namespace ddsweep {

// ---------------------------------------------------------------------------
// Sparse storage
// ---------------------------------------------------------------------------

// Row-compressed square or rectangular matrix.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<Complex> values;

  std::size_t nnz() const { return values.size(); }

  Complex at(int i, int j) const {
    const auto b = col_idx.begin() + row_ptr[i];
    const auto e = col_idx.begin() + row_ptr[i + 1];
    const auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return {0.0, 0.0};
    return values[static_cast<std::size_t>(it - col_idx.begin())];
  }

  void multiply(std::span<const Complex> x, std::span<Complex> y) const {
    for (int i = 0; i < rows; ++i) {
      Complex s{0.0, 0.0};
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += values[p] * x[col_idx[p]];
      y[i] = s;
    }
  }

  CVector operator*(std::span<const Complex> x) const {
    if (static_cast<int>(x.size()) != cols) throw InvalidArgument("matrix-vector size mismatch");
    CVector y(static_cast<std::size_t>(rows));
    multiply(x, y);
    return y;
  }

  SparseMatrix transpose() const {
    SparseMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.row_ptr.assign(static_cast<std::size_t>(cols) + 1, 0);
    for (int j : col_idx) ++t.row_ptr[j + 1];
    for (int j = 0; j < cols; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
    t.col_idx.resize(nnz());
    t.values.resize(nnz());
    std::vector<int> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (int i = 0; i < rows; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
        const int q = next[col_idx[p]]++;
        t.col_idx[q] = i;
        t.values[q] = values[p];
      }
    return t;
  }

  static SparseMatrix identity(int n) {
    SparseMatrix m;
    m.rows = m.cols = n;
    m.row_ptr.resize(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) m.row_ptr[i] = i;
    m.col_idx.resize(static_cast<std::size_t>(n));
    std::iota(m.col_idx.begin(), m.col_idx.end(), 0);
    m.values.assign(static_cast<std::size_t>(n), {1.0, 0.0});
    return m;
  }
};

// Accumulates (row, col, value) entries; duplicates are summed on build().
class TripletBuilder {
 public:
  TripletBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int i, int j, Complex v) {
    if (i < 0 || j < 0 || i >= rows_ || j >= cols_) throw InvalidArgument("triplet index out of range");
    entries_.emplace_back(i, j, v);
  }

  SparseMatrix build() const {
    std::vector<std::tuple<int, int, Complex>> e = entries_;
    std::stable_sort(e.begin(), e.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.row_ptr.assign(static_cast<std::size_t>(rows_) + 1, 0);
    for (std::size_t k = 0; k < e.size();) {
      const auto [i, j, v0] = e[k];
      Complex v = v0;
      std::size_t l = k + 1;
      while (l < e.size() && std::get<0>(e[l]) == i && std::get<1>(e[l]) == j) v += std::get<2>(e[l++]);
      m.col_idx.push_back(j);
      m.values.push_back(v);
      ++m.row_ptr[i + 1];
      k = l;
    }
    for (int i = 0; i < rows_; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
  }

 private:
  int rows_;
  int cols_;
  std::vector<std::tuple<int, int, Complex>> entries_;
};

// Matrix Market coordinate dump, complex general.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
  os << "%%MatrixMarket matrix coordinate complex general\n";
  os << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  os.precision(17);
  for (int i = 0; i < a.rows; ++i)
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
      os << i + 1 << ' ' << a.col_idx[p] + 1 << ' ' << a.values[p].real() << ' ' << a.values[p].imag() << '\n';
}

// ---------------------------------------------------------------------------
// Ordering
// ---------------------------------------------------------------------------

// Reverse Cuthill-McKee on the pattern of A + A^T. Every connected component
// starts from a pseudo-peripheral node.
inline std::vector<int> rcm_ordering(const SparseMatrix& a) {
  const int n = a.rows;
  const SparseMatrix at = a.transpose();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
      if (a.col_idx[p] != i) adj[i].push_back(a.col_idx[p]);
    for (int p = at.row_ptr[i]; p < at.row_ptr[i + 1]; ++p)
      if (at.col_idx[p] != i) adj[i].push_back(at.col_idx[p]);
    std::sort(adj[i].begin(), adj[i].end());
    adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
  }
  auto degree = [&](int v) { return static_cast<int>(adj[v].size()); };

  std::vector<int> level(static_cast<std::size_t>(n), -1);
  // Breadth-first levels from `root` restricted to unvisited nodes; returns
  // (eccentricity, a minimum-degree node of the last level).
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  auto bfs = [&](int root) {
    std::vector<int> touched{root};
    level[root] = 0;
    std::size_t head = 0;
    int last_level = 0;
    while (head < touched.size()) {
      const int v = touched[head++];
      for (int w : adj[v])
        if (!placed[w] && level[w] < 0) {
          level[w] = level[v] + 1;
          last_level = std::max(last_level, level[w]);
          touched.push_back(w);
        }
    }
    int best = root;
    for (int v : touched)
      if (level[v] == last_level && (best == root || degree(v) < degree(best))) best = v;
    if (level[best] != last_level) best = touched.back();
    for (int v : touched) level[v] = -1;
    return std::pair{last_level, best};
  };

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  for (int seed = 0; seed < n; ++seed) {
    if (placed[seed]) continue;
    int root = seed;
    auto [ecc, far] = bfs(root);
    for (int it = 0; it < 8; ++it) {
      auto [ecc2, far2] = bfs(far);
      if (ecc2 <= ecc) break;
      root = far;
      ecc = ecc2;
      far = far2;
    }
    const std::size_t start = order.size();
    order.push_back(root);
    placed[root] = true;
    for (std::size_t head = start; head < order.size(); ++head) {
      const int v = order[head];
      std::vector<int> nb;
      for (int w : adj[v])
        if (!placed[w]) nb.push_back(w);
      std::stable_sort(nb.begin(), nb.end(), [&](int x, int y) { return degree(x) < degree(y); });
      for (int w : nb) {
        placed[w] = true;
        order.push_back(w);
      }
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

// ---------------------------------------------------------------------------
// Sparse LU
// ---------------------------------------------------------------------------

enum class Ordering { Natural, ReverseCuthillMcKee };

struct LUOptions {
  Ordering ordering = Ordering::ReverseCuthillMcKee;
  double pivot_threshold = 0.1;
};

// Column-compressed triangular factor.
struct CscFactor {
  std::vector<int> col_ptr{0};
  std::vector<int> row_idx;
  std::vector<Complex> values;
};

// P A Q = L U with L unit lower (diagonal stored first in each column) and U
// upper (diagonal stored last). pinv maps original rows to pivot positions and
// q lists the original columns in factorization order.
class Factorization {
 public:
  int size() const { return n_; }
  const CscFactor& L() const { return l_; }
  const CscFactor& U() const { return u_; }
  const std::vector<int>& pinv() const { return pinv_; }
  const std::vector<int>& q() const { return q_; }
  std::size_t factor_nnz() const { return l_.values.size() + u_.values.size(); }

  CVector solve(std::span<const Complex> b) const {
    if (static_cast<int>(b.size()) != n_) throw InvalidArgument("right-hand side length does not match the factorization");
    CVector x(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) x[pinv_[k]] = b[k];
    for (int j = 0; j < n_; ++j) {
      const Complex xj = x[j];
      if (xj == Complex{}) continue;
      for (int p = l_.col_ptr[j] + 1; p < l_.col_ptr[j + 1]; ++p) x[l_.row_idx[p]] -= l_.values[p] * xj;
    }
    for (int j = n_ - 1; j >= 0; --j) {
      const int diag = u_.col_ptr[j + 1] - 1;
      x[j] /= u_.values[diag];
      const Complex xj = x[j];
      if (xj == Complex{}) continue;
      for (int p = u_.col_ptr[j]; p < diag; ++p) x[u_.row_idx[p]] -= u_.values[p] * xj;
    }
    CVector out(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) out[q_[k]] = x[k];
    return out;
  }

 private:
  friend Factorization factorize(const SparseMatrix& a, const LUOptions& opt);
  int n_ = 0;
  CscFactor l_;
  CscFactor u_;
  std::vector<int> pinv_;
  std::vector<int> q_;
};

inline Factorization factorize(const SparseMatrix& a, const LUOptions& opt = {}) {
  if (a.rows != a.cols) throw InvalidArgument("factorize expects a square matrix");
  const int n = a.rows;
  // Column access to A.
  const SparseMatrix ac = a.transpose();  // row j of ac = column j of a

  Factorization f;
  f.n_ = n;
  if (opt.ordering == Ordering::ReverseCuthillMcKee) {
    f.q_ = rcm_ordering(a);
  } else {
    f.q_.resize(static_cast<std::size_t>(n));
    std::iota(f.q_.begin(), f.q_.end(), 0);
  }
  // Symmetric permutation: row q[k] is the preferred pivot of step k.
  f.pinv_.assign(static_cast<std::size_t>(n), -1);
  auto& L = f.l_;
  auto& U = f.u_;
  L.col_ptr.assign(1, 0);
  U.col_ptr.assign(1, 0);
  L.row_idx.reserve(a.nnz() * 4);
  L.values.reserve(a.nnz() * 4);
  U.row_idx.reserve(a.nnz() * 4);
  U.values.reserve(a.nnz() * 4);

  CVector x(static_cast<std::size_t>(n), Complex{});
  std::vector<int> xi(2 * static_cast<std::size_t>(n));
  std::vector<int> mark(static_cast<std::size_t>(n), -1);
  std::vector<int> stack_pos(static_cast<std::size_t>(n));

  for (int k = 0; k < n; ++k) {
    const int col = f.q_[k];
    // Reach of column `col` in the graph of L (rows in original numbering;
    // row i with pinv[i] = j links to the rows stored in column j of L).
    int top = n;
    for (int p = ac.row_ptr[col]; p < ac.row_ptr[col + 1]; ++p) {
      const int root = ac.col_idx[p];
      if (mark[root] == k) continue;
      // Iterative depth-first search.
      int head = 0;
      int* stack = xi.data() + n;  // second half of xi is the DFS stack
      stack[0] = root;
      while (head >= 0) {
        const int j = stack[head];
        const int jn = f.pinv_[j];
        if (mark[j] != k) {
          mark[j] = k;
          stack_pos[j] = jn < 0 ? 0 : L.col_ptr[jn] + 1;
        }
        bool done = true;
        if (jn >= 0) {
          const int end = L.col_ptr[jn + 1];
          for (int q = stack_pos[j]; q < end; ++q) {
            const int i = L.row_idx[q];
            if (mark[i] == k) continue;
            stack_pos[j] = q + 1;
            stack[++head] = i;
            done = false;
            break;
          }
        }
        if (done) {
          --head;
          xi[--top] = j;
        }
      }
    }
    // Sparse triangular solve x = L \ A(:, col).
    for (int p = top; p < n; ++p) x[xi[p]] = Complex{};
    for (int p = ac.row_ptr[col]; p < ac.row_ptr[col + 1]; ++p) x[ac.col_idx[p]] = ac.values[p];
    for (int p = top; p < n; ++p) {
      const int j = xi[p];
      const int jn = f.pinv_[j];
      if (jn < 0) continue;
      const Complex xj = x[j];
      for (int q = L.col_ptr[jn] + 1; q < L.col_ptr[jn + 1]; ++q) x[L.row_idx[q]] -= L.values[q] * xj;
    }
    // Pivot search among rows not yet pivotal.
    int ipiv = -1;
    double amax = -1.0;
    for (int p = top; p < n; ++p) {
      const int i = xi[p];
      if (f.pinv_[i] < 0) {
        const double t = std::abs(x[i]);
        if (t > amax) {
          amax = t;
          ipiv = i;
        }
      } else {
        U.row_idx.push_back(f.pinv_[i]);
        U.values.push_back(x[i]);
      }
    }
    if (ipiv < 0 || !(amax > 0.0)) throw SingularMatrix("no nonzero pivot in column " + std::to_string(col));
    if (f.pinv_[col] < 0 && mark[col] == k && std::abs(x[col]) >= amax * opt.pivot_threshold) ipiv = col;
    const Complex pivot = x[ipiv];
    U.row_idx.push_back(k);
    U.values.push_back(pivot);
    U.col_ptr.push_back(static_cast<int>(U.values.size()));
    f.pinv_[ipiv] = k;
    L.row_idx.push_back(ipiv);
    L.values.push_back({1.0, 0.0});
    for (int p = top; p < n; ++p) {
      const int i = xi[p];
      if (f.pinv_[i] < 0) {
        L.row_idx.push_back(i);
        L.values.push_back(x[i] / pivot);
      }
      x[i] = Complex{};
    }
    L.col_ptr.push_back(static_cast<int>(L.values.size()));
  }
  for (auto& i : L.row_idx) i = f.pinv_[i];
  return f;
}

// ---------------------------------------------------------------------------
// Dense helpers
// ---------------------------------------------------------------------------

// Column-major dense complex matrix.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  CVector data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

  Complex& operator()(int i, int j) { return data[static_cast<std::size_t>(j) * rows + i]; }
  Complex operator()(int i, int j) const { return data[static_cast<std::size_t>(j) * rows + i]; }
  std::span<Complex> column(int j) { return {data.data() + static_cast<std::size_t>(j) * rows, static_cast<std::size_t>(rows)}; }
  std::span<const Complex> column(int j) const {
    return {data.data() + static_cast<std::size_t>(j) * rows, static_cast<std::size_t>(rows)};
  }

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  CVector operator*(std::span<const Complex> x) const {
    CVector y(static_cast<std::size_t>(rows));
    for (int j = 0; j < cols; ++j) {
      const Complex xj = x[j];
      if (xj == Complex{}) continue;
      for (int i = 0; i < rows; ++i) y[i] += (*this)(i, j) * xj;
    }
    return y;
  }

  DenseMatrix operator*(const DenseMatrix& b) const {
    DenseMatrix c(rows, b.cols);
    for (int j = 0; j < b.cols; ++j)
      for (int k = 0; k < cols; ++k) {
        const Complex bkj = b(k, j);
        if (bkj == Complex{}) continue;
        for (int i = 0; i < rows; ++i) c(i, j) += (*this)(i, k) * bkj;
      }
    return c;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : data) m = std::max(m, std::abs(z));
    return m;
  }
};

// Gaussian elimination with partial pivoting; solves A X = B in place.
inline DenseMatrix dense_solve(DenseMatrix a, DenseMatrix b) {
  if (a.rows != a.cols || b.rows != a.rows) throw InvalidArgument("dense_solve dimension mismatch");
  const int n = a.rows;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) == 0.0) throw SingularMatrix("dense matrix is singular");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      for (int j = 0; j < b.cols; ++j) std::swap(b(k, j), b(p, j));
    }
    for (int i = k + 1; i < n; ++i) {
      const Complex m = a(i, k) / a(k, k);
      if (m == Complex{}) continue;
      for (int j = k; j < n; ++j) a(i, j) -= m * a(k, j);
      for (int j = 0; j < b.cols; ++j) b(i, j) -= m * b(k, j);
    }
  }
  for (int j = 0; j < b.cols; ++j)
    for (int i = n - 1; i >= 0; --i) {
      Complex s = b(i, j);
      for (int c = i + 1; c < n; ++c) s -= a(i, c) * b(c, j);
      b(i, j) = s / a(i, i);
    }
  return b;
}

inline CVector dense_solve(const DenseMatrix& a, std::span<const Complex> b) {
  DenseMatrix rhs(a.rows, 1);
  std::copy(b.begin(), b.end(), rhs.data.begin());
  return dense_solve(a, std::move(rhs)).data;
}

inline DenseMatrix to_dense(const SparseMatrix& a) {
  DenseMatrix d(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) d(i, a.col_idx[p]) += a.values[p];
  return d;
}

// Densifies a linear map by applying it to unit vectors.
template <class Apply>
DenseMatrix probe_dense(int n, Apply&& apply) {
  DenseMatrix m(n, n);
  CVector e(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), Complex{});
    e[j] = 1.0;
    const CVector col = apply(std::span<const Complex>(e));
    std::copy(col.begin(), col.end(), m.column(j).begin());
  }
  return m;
}

}  // namespace ddsweep
