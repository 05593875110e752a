#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace coland {

/// Forward-mode AD scalar carrying N partial derivatives. Nesting
/// Dual<Dual<double, N>, N> yields exact second derivatives.
template <typename T, std::size_t N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit by design
  Dual(const T& value) requires(!std::is_same_v<T, double>) : v(value) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v + b.v;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v - b.v;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a) {
    Dual r;
    r.v = -a.v;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = -a.d[i];
    return r;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v * b.v;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v / b.v;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
    return r;
  }

  friend Dual operator+(const Dual& a, double b) { return a + Dual(b); }
  friend Dual operator+(double a, const Dual& b) { return Dual(a) + b; }
  friend Dual operator-(const Dual& a, double b) { return a - Dual(b); }
  friend Dual operator-(double a, const Dual& b) { return Dual(a) - b; }
  friend Dual operator*(const Dual& a, double b) {
    Dual r;
    r.v = a.v * b;
    for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b;
    return r;
  }
  friend Dual operator*(double a, const Dual& b) { return b * a; }
  friend Dual operator/(const Dual& a, double b) { return a * (1.0 / b); }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }
};

inline double value_of(double x) { return x; }
template <typename T, std::size_t N>
double value_of(const Dual<T, N>& x) {
  return value_of(x.v);
}

using std::cos;
using std::sin;
using std::sqrt;
using std::tan;

template <typename T, std::size_t N>
Dual<T, N> sin(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = sin(a.v);
  T c = cos(a.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}

template <typename T, std::size_t N>
Dual<T, N> cos(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = cos(a.v);
  T s = -sin(a.v);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <typename T, std::size_t N>
Dual<T, N> tan(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = tan(a.v);
  T w = 1.0 + r.v * r.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = w * a.d[i];
  return r;
}

template <typename T, std::size_t N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = sqrt(a.v);
  T w = 0.5 / r.v;
  for (std::size_t i = 0; i < N; ++i) r.d[i] = w * a.d[i];
  return r;
}

/// First-order seed: variable `idx` of a K-variable function.
template <std::size_t K>
Dual<double, K> seed1(double x, std::size_t idx) {
  Dual<double, K> s(x);
  s.d[idx] = 1.0;
  return s;
}

/// Second-order seed for Dual<Dual<double,K>,K>.
template <std::size_t K>
Dual<Dual<double, K>, K> seed2(double x, std::size_t idx) {
  Dual<Dual<double, K>, K> s;
  s.v = seed1<K>(x, idx);
  s.d[idx] = Dual<double, K>(1.0);
  return s;
}

/// Second-order forward-mode scalar with a packed lower-triangle Hessian.
/// Equivalent to Dual<Dual<double,N>,N> but stores each mixed partial once,
/// which roughly halves the arithmetic in Hessian evaluations.
template <std::size_t N>
struct Dual2 {
  static constexpr std::size_t kPacked = N * (N + 1) / 2;

  double v{};
  std::array<double, N> g{};
  std::array<double, kPacked> h{};

  Dual2() = default;
  Dual2(double value) : v(value) {}  // NOLINT: implicit by design

  /// Packed index of mixed partial (i, j); requires i >= j.
  static constexpr std::size_t at(std::size_t i, std::size_t j) {
    return i * (i + 1) / 2 + j;
  }
  double hess(std::size_t i, std::size_t j) const {
    return i >= j ? h[at(i, j)] : h[at(j, i)];
  }

  Dual2& operator+=(const Dual2& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) g[i] += o.g[i];
    for (std::size_t i = 0; i < kPacked; ++i) h[i] += o.h[i];
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) g[i] -= o.g[i];
    for (std::size_t i = 0; i < kPacked; ++i) h[i] -= o.h[i];
    return *this;
  }
  Dual2& operator*=(const Dual2& o) { return *this = *this * o; }

  friend Dual2 operator+(const Dual2& a, const Dual2& b) {
    Dual2 r = a;
    r += b;
    return r;
  }
  friend Dual2 operator-(const Dual2& a, const Dual2& b) {
    Dual2 r = a;
    r -= b;
    return r;
  }
  friend Dual2 operator-(const Dual2& a) {
    Dual2 r;
    r.v = -a.v;
    for (std::size_t i = 0; i < N; ++i) r.g[i] = -a.g[i];
    for (std::size_t i = 0; i < kPacked; ++i) r.h[i] = -a.h[i];
    return r;
  }
  friend Dual2 operator*(const Dual2& a, const Dual2& b) {
    Dual2 r;
    r.v = a.v * b.v;
    for (std::size_t i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    std::size_t p = 0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j <= i; ++j, ++p) {
        r.h[p] = a.h[p] * b.v + a.v * b.h[p] + a.g[i] * b.g[j] +
                 a.g[j] * b.g[i];
      }
    }
    return r;
  }
  friend Dual2 operator/(const Dual2& a, const Dual2& b) {
    Dual2 r;
    const double ib = 1.0 / b.v;
    r.v = a.v * ib;
    for (std::size_t i = 0; i < N; ++i) {
      r.g[i] = (a.g[i] - r.v * b.g[i]) * ib;
    }
    std::size_t p = 0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j <= i; ++j, ++p) {
        r.h[p] = (a.h[p] - r.v * b.h[p] - r.g[i] * b.g[j] -
                  r.g[j] * b.g[i]) *
                 ib;
      }
    }
    return r;
  }

  friend Dual2 operator+(const Dual2& a, double b) {
    Dual2 r = a;
    r.v += b;
    return r;
  }
  friend Dual2 operator+(double a, const Dual2& b) { return b + a; }
  friend Dual2 operator-(const Dual2& a, double b) {
    Dual2 r = a;
    r.v -= b;
    return r;
  }
  friend Dual2 operator-(double a, const Dual2& b) {
    Dual2 r = -b;
    r.v += a;
    return r;
  }
  friend Dual2 operator*(const Dual2& a, double b) {
    Dual2 r;
    r.v = a.v * b;
    for (std::size_t i = 0; i < N; ++i) r.g[i] = a.g[i] * b;
    for (std::size_t i = 0; i < kPacked; ++i) r.h[i] = a.h[i] * b;
    return r;
  }
  friend Dual2 operator*(double a, const Dual2& b) { return b * a; }
  friend Dual2 operator/(const Dual2& a, double b) { return a * (1.0 / b); }
  friend Dual2 operator/(double a, const Dual2& b) { return Dual2(a) / b; }

  /// Chain rule for a scalar function with derivatives f1, f2 at v.
  Dual2 compose(double f0, double f1, double f2) const {
    Dual2 r;
    r.v = f0;
    for (std::size_t i = 0; i < N; ++i) r.g[i] = f1 * g[i];
    std::size_t p = 0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j <= i; ++j, ++p) {
        r.h[p] = f1 * h[p] + f2 * g[i] * g[j];
      }
    }
    return r;
  }
};

template <std::size_t N>
double value_of(const Dual2<N>& x) {
  return x.v;
}

template <std::size_t N>
Dual2<N> sin(const Dual2<N>& a) {
  const double s = std::sin(a.v);
  return a.compose(s, std::cos(a.v), -s);
}

template <std::size_t N>
Dual2<N> cos(const Dual2<N>& a) {
  const double c = std::cos(a.v);
  return a.compose(c, -std::sin(a.v), -c);
}

template <std::size_t N>
Dual2<N> tan(const Dual2<N>& a) {
  const double t = std::tan(a.v);
  const double w = 1.0 + t * t;
  return a.compose(t, w, 2.0 * t * w);
}

template <std::size_t N>
Dual2<N> sqrt(const Dual2<N>& a) {
  const double s = std::sqrt(a.v);
  return a.compose(s, 0.5 / s, -0.25 / (s * s * s));
}

/// Seed for Dual2: variable `idx` of a K-variable function.
template <std::size_t K>
Dual2<K> seed_hess(double x, std::size_t idx) {
  Dual2<K> s(x);
  s.g[idx] = 1.0;
  return s;
}

}  // namespace coland
