#pragma once

#include <array>
#include <cmath>

namespace lambda_lab {

/// Truncated Taylor polynomial c_0 + c_1 e + ... + c_N e^N in a formal
/// parameter e. Arithmetic drops every power above N, so evaluating a
/// rational expression on Jet inputs yields its exact e-derivatives at e = 0
/// (coefficient k is the k-th derivative divided by k!).
template <int N>
struct Jet {
  std::array<double, N + 1> c{};

  Jet() = default;
  Jet(double v) { c[0] = v; }  // NOLINT: implicit promotion from constants

  static Jet line(double v, double slope) {
    Jet j(v);
    if constexpr (N >= 1) j.c[1] = slope;
    return j;
  }

  double value() const { return c[0]; }
  double derivative(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return c[k] * f;
  }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i <= N; ++i) c[i] += o.c[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i <= N; ++i) c[i] -= o.c[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c) v *= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (double& v : a.c) v = -v;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; i + j <= N; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
  }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }

  friend Jet reciprocal(const Jet& a) {
    Jet r;
    r.c[0] = 1.0 / a.c[0];
    for (int k = 1; k <= N; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += a.c[j] * r.c[k - j];
      r.c[k] = -s * r.c[0];
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  friend Jet sqrt(const Jet& a) {
    Jet r;
    r.c[0] = std::sqrt(a.c[0]);
    for (int k = 1; k <= N; ++k) {
      double s = a.c[k];
      for (int j = 1; j < k; ++j) s -= r.c[j] * r.c[k - j];
      r.c[k] = s / (2.0 * r.c[0]);
    }
    return r;
  }
};

using Jet3 = Jet<3>;

}  // namespace lambda_lab
