#pragma once

// Right-preconditioned GMRES and flexible GMRES with Givens rotations.

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "ddsweep/core.hpp"

namespace ddsweep {

struct KrylovSettings {
  double tol = 1e-6;
  int max_iterations = 200;
  std::optional<int> restart;  // cycle length; none = unrestarted
  bool track_orthogonality = false;
};

enum class KrylovOutcome { Converged, MaxIterations, Breakdown };

inline const char* to_string(KrylovOutcome o) {
  switch (o) {
    case KrylovOutcome::Converged: return "converged";
    case KrylovOutcome::MaxIterations: return "max-iter";
    case KrylovOutcome::Breakdown: return "breakdown";
  }
  return "?";
}

struct KrylovRun {
  KrylovSettings settings;
  std::vector<double> history;  // relative residual, history[0] = 1
  KrylovOutcome outcome = KrylovOutcome::MaxIterations;
  int iterations = 0;
  double orthogonality_loss = 0.0;  // max |V^H V - I| over cycles, if tracked

  bool converged() const { return outcome == KrylovOutcome::Converged; }
};

struct KrylovResult {
  CVector x;
  KrylovRun run;
};

inline void write_history_csv(std::ostream& os, const KrylovRun& run) {
  os << "iter,relres\n";
  os.precision(17);
  for (std::size_t i = 0; i < run.history.size(); ++i) os << i << ',' << run.history[i] << '\n';
}

namespace detail {

// Complex Givens rotation zeroing b in (a, b).
inline void make_givens(Complex a, Complex b, double& c, Complex& s) {
  const double na = std::abs(a);
  const double nb = std::abs(b);
  if (nb == 0.0) {
    c = 1.0;
    s = 0.0;
    return;
  }
  if (na == 0.0) {
    c = 0.0;
    s = std::conj(b) / nb;
    return;
  }
  const double r = std::hypot(na, nb);
  c = na / r;
  s = (a / na) * std::conj(b) / r;
}

// Shared Arnoldi driver. With `flexible`, z_j = M_j(v_j) is stored and the
// update uses Z; otherwise the update applies M once to V y.
template <class Op, class Prec>
KrylovResult arnoldi_solve(Op&& apply_op, Prec&& precond, std::span<const Complex> b, const KrylovSettings& st,
                           bool flexible) {
  const std::size_t n = b.size();
  KrylovResult res;
  res.run.settings = st;
  res.x.assign(n, Complex{});
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.run.history = {0.0};
    res.run.outcome = KrylovOutcome::Converged;
    return res;
  }
  res.run.history.push_back(1.0);
  const int m_max = st.restart ? std::max(1, *st.restart) : std::max(1, st.max_iterations);
  CVector r(b.begin(), b.end());
  double rnorm = bnorm;
  int it = 0;

  while (true) {
    std::vector<CVector> v;
    std::vector<CVector> z;
    v.reserve(static_cast<std::size_t>(m_max) + 1);
    std::vector<std::vector<Complex>> h;  // h[j] = column j, length j + 2
    std::vector<double> cs;
    std::vector<Complex> sn;
    std::vector<Complex> g{Complex(rnorm, 0.0)};
    v.emplace_back(r);
    for (auto& e : v[0]) e /= rnorm;
    int j = 0;
    bool done = false;
    bool breakdown = false;
    for (; j < m_max && it < st.max_iterations; ++j) {
      CVector zj = precond(it, std::span<const Complex>(v[j]));
      CVector w = apply_op(std::span<const Complex>(zj));
      if (flexible) z.push_back(std::move(zj));
      std::vector<Complex> hj(static_cast<std::size_t>(j) + 2);
      const double wnorm = norm2(w);
      // Modified Gram-Schmidt with one reorthogonalization pass.
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const Complex c = dot(v[i], w);
          hj[i] += c;
          axpy(-c, v[i], w);
        }
      const double hn = norm2(w);
      hj[j + 1] = hn;
      for (int i = 0; i < j; ++i) {
        const Complex t = cs[i] * hj[i] + sn[i] * hj[i + 1];
        hj[i + 1] = -std::conj(sn[i]) * hj[i] + cs[i] * hj[i + 1];
        hj[i] = t;
      }
      if (hj[j] == Complex{} && hn == 0.0) {
        // The operator maps the new direction to zero: no progress possible
        // in this space, so stop without adding the column.
        ++it;
        res.run.history.push_back(std::abs(g[j]) / bnorm);
        breakdown = true;
        break;
      }
      double c;
      Complex s;
      make_givens(hj[j], hj[j + 1], c, s);
      hj[j] = c * hj[j] + s * hj[j + 1];
      hj[j + 1] = 0.0;
      cs.push_back(c);
      sn.push_back(s);
      g.push_back(-std::conj(s) * g[j]);
      g[j] = c * g[j];
      h.push_back(std::move(hj));
      ++it;
      const double rel = std::abs(g[j + 1]) / bnorm;
      res.run.history.push_back(rel);
      if (rel <= st.tol) {
        done = true;
        ++j;
        break;
      }
      if (hn <= 1e-14 * wnorm) {
        breakdown = true;
        ++j;
        break;
      }
      v.emplace_back(std::move(w));
      for (auto& e : v.back()) e /= hn;
    }
    if (st.track_orthogonality) {
      const std::size_t nv = v.size();
      for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t c2 = 0; c2 < nv; ++c2) {
          const Complex d = dot(v[a], v[c2]) - (a == c2 ? Complex(1.0) : Complex{});
          res.run.orthogonality_loss = std::max(res.run.orthogonality_loss, std::abs(d));
        }
    }
    // Back substitution for y and solution update.
    std::vector<Complex> y(static_cast<std::size_t>(j));
    for (int i = j - 1; i >= 0; --i) {
      Complex s = g[i];
      for (int k = i + 1; k < j; ++k) s -= h[k][i] * y[k];
      y[i] = s / h[i][i];
    }
    if (flexible) {
      for (int i = 0; i < j; ++i) axpy(y[i], z[i], res.x);
    } else {
      CVector vy(n);
      for (int i = 0; i < j; ++i) axpy(y[i], v[i], vy);
      const CVector mvy = precond(0, std::span<const Complex>(vy));
      axpy(1.0, mvy, res.x);
    }
    res.run.iterations = it;
    if (done) {
      res.run.outcome = KrylovOutcome::Converged;
      return res;
    }
    if (breakdown) {
      // An invariant subspace gives the exact solution unless the operator
      // is singular on it.
      res.run.outcome = res.run.history.back() <= st.tol ? KrylovOutcome::Converged : KrylovOutcome::Breakdown;
      return res;
    }
    if (it >= st.max_iterations) {
      res.run.outcome = KrylovOutcome::MaxIterations;
      return res;
    }
    // Restart from the true residual.
    const CVector ax = apply_op(std::span<const Complex>(res.x));
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    rnorm = norm2(r);
    if (rnorm <= st.tol * bnorm) {
      res.run.outcome = KrylovOutcome::Converged;
      return res;
    }
  }
}

}  // namespace detail

struct IdentityPreconditioner {
  CVector operator()(int, std::span<const Complex> v) const { return CVector(v.begin(), v.end()); }
};

// Solves A M^{-1} y = b and returns x = M^{-1} y. `precond` is called as
// precond(iteration, v); the iteration argument is ignored for fixed
// preconditioners.
template <class Op, class Prec = IdentityPreconditioner>
KrylovResult gmres(Op&& apply_op, std::span<const Complex> b, const KrylovSettings& st = {}, Prec&& precond = {}) {
  return detail::arnoldi_solve(apply_op, precond, b, st, false);
}

// Flexible variant: precond(n, v) may change with the outer iteration n.
template <class Op, class Prec>
KrylovResult fgmres(Op&& apply_op, std::span<const Complex> b, const KrylovSettings& st, Prec&& precond) {
  return detail::arnoldi_solve(apply_op, precond, b, st, true);
}

}  // namespace ddsweep
