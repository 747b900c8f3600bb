#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

namespace hanle {

/// Angular momentum quantum number stored as 2F so half-integers are exact.
struct Spin {
  int twice = 0;

  static constexpr Spin from_twice(int twice_f) {
    if (twice_f < 0) throw std::domain_error("spin must be non-negative");
    return Spin{twice_f};
  }
  static constexpr Spin integer(int f) { return from_twice(2 * f); }

  constexpr double value() const { return 0.5 * twice; }
  /// Number of magnetic sublevels, 2F+1.
  constexpr int multiplicity() const { return twice + 1; }
  constexpr bool is_half_integer() const { return (twice & 1) != 0; }

  friend constexpr bool operator==(Spin, Spin) = default;
};

/// Magnetic projection m stored as 2m.
struct Projection {
  int twice = 0;

  constexpr double value() const { return 0.5 * twice; }
  friend constexpr bool operator==(Projection, Projection) = default;
};

/// Sublevels are ordered by ascending m: index 0 is m = -F.
constexpr Projection projection_at(Spin f, int index) { return Projection{2 * index - f.twice}; }
constexpr int index_of(Spin f, Projection m) { return (m.twice + f.twice) / 2; }

inline std::string to_string(Spin f) {
  return f.is_half_integer() ? std::to_string(f.twice) + "/2" : std::to_string(f.twice / 2);
}

/// Cyclic components of the elliptic polarization vector for propagation along the
/// quantization axis. |tan(epsilon)| is the ellipse axis ratio; epsilon = 0 is linear,
/// epsilon = +pi/4 is pure sigma+.
struct Polarization {
  double epsilon = 0.0;
  double e_plus = -std::numbers::sqrt2 / 2;
  double e_minus = std::numbers::sqrt2 / 2;

  static Polarization from_ellipticity(double epsilon) {
    constexpr double quarter = std::numbers::pi / 4;
    if (!std::isfinite(epsilon) || std::abs(epsilon) > quarter * (1 + 1e-12))
      throw std::domain_error("ellipticity must lie in [-pi/4, pi/4], got " + std::to_string(epsilon));
    return Polarization{epsilon, -std::cos(epsilon - quarter), -std::sin(epsilon - quarter)};
  }

  /// Component e^q for q = +1 or -1; there is no q = 0 component.
  double component(int q) const { return q == 1 ? e_plus : (q == -1 ? e_minus : 0.0); }
};

namespace detail {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

inline cpp_int factorial(int n) {
  cpp_int r = 1;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

inline void check_projection(Spin j, Projection m, const char* what) {
  if (std::abs(m.twice) > j.twice || ((j.twice - m.twice) & 1) != 0)
    throw std::domain_error(std::string("invalid projection for ") + what + ": 2m=" +
                            std::to_string(m.twice) + " with 2j=" + std::to_string(j.twice));
}

}  // namespace detail

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> in the Condon-Shortley convention.
///
/// Evaluated from the Racah closed form. The alternating sum and the prefactor are
/// accumulated as exact rationals, so the only rounding is the final square root.
inline double cg_coefficient(Spin j1, Projection m1, Spin j2, Projection m2, Spin J, Projection M) {
  detail::check_projection(j1, m1, "j1");
  detail::check_projection(j2, m2, "j2");
  detail::check_projection(J, M, "J");

  if (m1.twice + m2.twice != M.twice) return 0.0;
  if (J.twice < std::abs(j1.twice - j2.twice) || J.twice > j1.twice + j2.twice) return 0.0;
  if (((j1.twice + j2.twice + J.twice) & 1) != 0) return 0.0;

  // All combinations below are integers once the triangle and parity checks pass.
  const int a = (j1.twice + j2.twice - J.twice) / 2;   // j1+j2-J
  const int b = (j1.twice - j2.twice + J.twice) / 2;   // j1-j2+J
  const int c = (-j1.twice + j2.twice + J.twice) / 2;  // -j1+j2+J
  const int s = (j1.twice + j2.twice + J.twice) / 2 + 1;
  const int j1m = (j1.twice - m1.twice) / 2, j1p = (j1.twice + m1.twice) / 2;
  const int j2m = (j2.twice - m2.twice) / 2, j2p = (j2.twice + m2.twice) / 2;
  const int Jm = (J.twice - M.twice) / 2, Jp = (J.twice + M.twice) / 2;
  const int t1 = (J.twice - j2.twice + m1.twice) / 2;  // J-j2+m1
  const int t2 = (J.twice - j1.twice - m2.twice) / 2;  // J-j1-m2

  using detail::cpp_rational;
  using detail::factorial;

  const int kmin = std::max({0, -t1, -t2});
  const int kmax = std::min({a, j1m, j2p});
  cpp_rational sum = 0;
  for (int k = kmin; k <= kmax; ++k) {
    const auto denom = factorial(k) * factorial(a - k) * factorial(j1m - k) * factorial(j2p - k) *
                       factorial(t1 + k) * factorial(t2 + k);
    cpp_rational term(1, denom);
    if (k & 1) term = -term;
    sum += term;
  }
  if (sum == 0) return 0.0;

  const cpp_rational prefactor(
      (J.twice + 1) * factorial(a) * factorial(b) * factorial(c) * factorial(Jp) * factorial(Jm) *
          factorial(j1p) * factorial(j1m) * factorial(j2p) * factorial(j2m),
      factorial(s));
  const cpp_rational squared = prefactor * sum * sum;
  const double magnitude = std::sqrt(static_cast<double>(squared));
  return sum < 0 ? -magnitude : magnitude;
}

/// Dipole coupling for the absorption line F_g -> F_e; rows are excited sublevels,
/// columns ground sublevels, both in ascending m.
inline bool dipole_allowed(Spin f_g, Spin f_e) {
  const int diff = f_e.twice - f_g.twice;
  if (diff != -2 && diff != 0 && diff != 2) return false;
  return !(f_g.twice == 0 && f_e.twice == 0);
}

inline void require_dipole_allowed(Spin f_g, Spin f_e) {
  if (!dipole_allowed(f_g, f_e))
    throw std::domain_error("dipole-forbidden transition F_g=" + to_string(f_g) +
                            " -> F_e=" + to_string(f_e));
}

/// V = sum_{q=+-1} C^{F_e m_e}_{F_g m_g; 1 q} e^q |F_e m_e><F_g m_g|.
inline Eigen::MatrixXd build_dipole_operator(Spin f_g, Spin f_e, const Polarization& pol) {
  require_dipole_allowed(f_g, f_e);
  const Spin one = Spin::integer(1);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(f_e.multiplicity(), f_g.multiplicity());
  for (int a = 0; a < f_e.multiplicity(); ++a) {
    const Projection me = projection_at(f_e, a);
    for (int b = 0; b < f_g.multiplicity(); ++b) {
      const Projection mg = projection_at(f_g, b);
      const int twice_q = me.twice - mg.twice;
      if (twice_q != 2 && twice_q != -2) continue;
      const int q = twice_q / 2;
      v(a, b) = cg_coefficient(f_g, mg, one, Projection{twice_q}, f_e, me) * pol.component(q);
    }
  }
  return v;
}

/// Diagonal F_z in ascending-m ordering.
inline Eigen::MatrixXd build_fz(Spin f) {
  Eigen::VectorXd m(f.multiplicity());
  for (int i = 0; i < f.multiplicity(); ++i) m(i) = projection_at(f, i).value();
  return m.asDiagonal();
}

}  // namespace hanle
