#pragma once

// Shared vocabulary types, error hierarchy and the small thread helper used
// by every other module.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ddsweep {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid argument: " + what) {}
};

class UnsupportedGeometry : public Error {
 public:
  explicit UnsupportedGeometry(const std::string& what) : Error("unsupported geometry: " + what) {}
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& what) : Error("singular matrix: " + what) {}
};

class SingularCorner : public Error {
 public:
  explicit SingularCorner(const std::string& what) : Error("singular corner: " + what) {}
};

class AssemblyError : public Error {
 public:
  explicit AssemblyError(const std::string& what) : Error("assembly error: " + what) {}
};

// ---------------------------------------------------------------------------
// Geometry primitives
// ---------------------------------------------------------------------------

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool strictly_contains(const Rect& r) const {
    return r.x0 > x0 && r.x1 < x1 && r.y0 > y0 && r.y1 < y1;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Sides of a rectangular subdomain, in the order left, bottom, right, top.
enum class Side : int { Left = 0, Bottom = 1, Right = 2, Top = 3 };
inline constexpr int kNumSides = 4;

inline constexpr Side opposite(Side s) { return static_cast<Side>((static_cast<int>(s) + 2) % 4); }
inline constexpr int index(Side s) { return static_cast<int>(s); }
inline constexpr bool is_vertical(Side s) { return s == Side::Left || s == Side::Right; }

inline const char* to_string(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Bottom: return "bottom";
    case Side::Right: return "right";
    case Side::Top: return "top";
  }
  return "?";
}

// Traces run bottom->top on vertical sides and left->right on horizontal
// sides, so both owners of an interface agree on the order. The first
// endpoint of a vertical side is therefore its bottom corner, and the side
// perpendicular to it there is Bottom; the second endpoint touches Top.
inline constexpr Side perpendicular_at(Side s, int endpoint) {
  if (is_vertical(s)) return endpoint == 0 ? Side::Bottom : Side::Top;
  return endpoint == 0 ? Side::Left : Side::Right;
}

// For side `s` meeting the perpendicular side `p`, which endpoint (0 = first,
// 1 = last) of `p` is the shared corner.
inline constexpr int endpoint_towards(Side p, Side s) {
  if (is_vertical(p)) return s == Side::Bottom ? 0 : 1;
  return s == Side::Left ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

inline double norm2(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  // Conjugates the first argument.
  Complex s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline void axpy(Complex alpha, std::span<const Complex> x, std::span<Complex> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double relative_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is handled
// by exactly one worker; callers guarantee disjoint writes. The first
// exception thrown by a worker is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace ddsweep
