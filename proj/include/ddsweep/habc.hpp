#pragma once

// Padé-type high-order absorbing conditions: coefficients, the impedance
// functional B and the corner coupling scalars.

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ddsweep/core.hpp"

namespace ddsweep {

struct PadeParams {
  int n_aux = 0;
  double angle = 0.0;
  int order = 1;  // M = 2N + 1
  Complex alpha{1.0, 0.0};
  std::vector<double> coeffs;  // c_1 .. c_N

  // c_i with 1-based i as in the usual notation.
  double c(int i) const { return coeffs[static_cast<std::size_t>(i - 1)]; }

  friend bool operator==(const PadeParams& a, const PadeParams& b) {
    return a.n_aux == b.n_aux && a.angle == b.angle;
  }
};

inline PadeParams pade_coefficients(int n_aux, double angle) {
  if (n_aux < 0) throw InvalidArgument("number of auxiliary fields must be nonnegative");
  if (!(angle >= 0.0 && angle < kPi)) throw InvalidArgument("rotation angle must lie in [0, pi)");
  PadeParams p;
  p.n_aux = n_aux;
  p.angle = angle;
  p.order = 2 * n_aux + 1;
  p.alpha = std::polar(1.0, angle / 2.0);
  p.coeffs.resize(static_cast<std::size_t>(n_aux));
  for (int i = 1; i <= n_aux; ++i) {
    const double t = std::tan(i * kPi / p.order);
    p.coeffs[static_cast<std::size_t>(i - 1)] = t * t;
  }
  return p;
}

// B(u, {phi_i}) = -i k alpha [u + (2/M) sum_i c_i (u + phi_i)]
inline Complex eval_B(const PadeParams& p, double k, Complex u, std::span<const Complex> phis) {
  if (phis.size() != static_cast<std::size_t>(p.n_aux))
    throw InvalidArgument("eval_B expects one auxiliary value per Padé term");
  Complex sum{0.0, 0.0};
  for (int i = 1; i <= p.n_aux; ++i) sum += p.c(i) * (u + phis[static_cast<std::size_t>(i - 1)]);
  return -kI * k * p.alpha * (u + (2.0 / p.order) * sum);
}

inline Complex corner_denominator(const PadeParams& p, int i, int j) {
  const Complex a2 = p.alpha * p.alpha;
  return a2 * p.c(i) + a2 * p.c(j) + 1.0;
}

// psi_ij at a corner where phi_x is the i-th field of the side across the
// corner and phi_y the j-th field of the side being closed.
inline Complex corner_psi(const PadeParams& p, int i, int j, Complex phi_x, Complex phi_y) {
  if (i < 1 || j < 1 || i > p.n_aux || j > p.n_aux) throw InvalidArgument("corner_psi index out of range");
  const Complex den = corner_denominator(p, i, j);
  if (std::abs(den) < 1e-14) throw SingularCorner("vanishing corner denominator");
  const Complex a2 = p.alpha * p.alpha;
  return -(a2 * (p.c(j) + 1.0) * phi_x + a2 * (p.c(i) + 1.0) * phi_y) / den;
}

// (reaction, coupling) in  -phi_i'' - reaction phi_i - coupling u = 0.
inline std::pair<Complex, Complex> aux_equation_coefficients(const PadeParams& p, int i, double k) {
  if (i < 1 || i > p.n_aux) throw InvalidArgument("auxiliary index out of range");
  const Complex a2 = p.alpha * p.alpha;
  return {k * k * (a2 * p.c(i) + 1.0), k * k * a2 * (p.c(i) + 1.0)};
}

// Row scaling applied to the i-th auxiliary equation so that the assembled
// system is complex symmetric.
inline Complex aux_row_scale(const PadeParams& p, int i, double k) {
  return kI * (2.0 / p.order) * p.c(i) / (k * p.alpha * (p.c(i) + 1.0));
}

}  // namespace ddsweep
