#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace hanle {

enum class DopplerRule {
  /// Gauss-Legendre on delta_D = c + s tan(theta); resolves a homogeneous line much
  /// narrower than the Doppler width.
  lorentz_mapped,
  /// Plain Gauss-Hermite on delta_D = width * t.
  hermite,
};

inline std::string to_string(DopplerRule rule) { return rule == DopplerRule::hermite ? "hermite" : "mapped"; }

/// Maxwellian spread of one-photon detunings. width is k*v_p (most probable speed), so the
/// Doppler-shift density is exp(-x^2/width^2)/(width sqrt(pi)). width = 0 means atoms at rest.
struct DopplerSpec {
  double width = 100.0;
  int nodes = 128;
  DopplerRule rule = DopplerRule::lorentz_mapped;
  /// Scale s of the tan mapping. 0 lets the caller pick (see line_core_width); when still
  /// unset the Doppler width itself is used.
  double core_width = 0.0;

  void validate() const {
    if (!(width >= 0) || !std::isfinite(width)) throw std::domain_error("Doppler width must be finite and >= 0");
    if (nodes < 1 || nodes > 256) throw std::domain_error("Doppler quadrature order must be in [1, 256]");
    if (!(core_width >= 0) || !std::isfinite(core_width)) throw std::domain_error("core width must be >= 0");
  }

  friend bool operator==(const DopplerSpec&, const DopplerSpec&) = default;
};

struct QuadratureRule {
  std::vector<double> nodes;  // ascending
  std::vector<double> weights;
};

namespace detail {

inline void symmetrize(QuadratureRule& rule) {
  const std::size_t n = rule.nodes.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    const double t = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -t;
    rule.nodes[j] = t;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
}

/// Golub-Welsch starting points for a symmetric Jacobi matrix with zero diagonal.
inline Eigen::VectorXd jacobi_eigenvalues(const Eigen::VectorXd& offdiag) {
  const Eigen::Index n = offdiag.size() + 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(Eigen::VectorXd::Zero(n), offdiag, Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

}  // namespace detail

/// Gauss-Hermite rule for exp(-t^2): Golub-Welsch eigenvalues as starting points, then
/// Newton polishing on the orthonormal Hermite recurrence, which also yields the weights.
inline QuadratureRule hermite_nodes(int n) {
  if (n < 1 || n > 256) throw std::domain_error("Gauss-Hermite order must be in [1, 256], got " + std::to_string(n));
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  const Eigen::VectorXd guess = detail::jacobi_eigenvalues(sub);

  // p_k orthonormal w.r.t. exp(-t^2); returns p_n and p_{n-1}.
  const double p0 = std::pow(std::numbers::pi, -0.25);
  auto evaluate = [&](double t, double& pn, double& pn1) {
    double prev = 0.0, cur = p0;
    for (int k = 1; k <= n; ++k) {
      const double next = t * std::sqrt(2.0 / k) * cur - std::sqrt((k - 1.0) / k) * prev;
      prev = cur;
      cur = next;
    }
    pn = cur;
    pn1 = prev;
  };

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = guess(i), pn = 0, pn1 = 0;
    for (int iter = 0; iter < 100; ++iter) {
      evaluate(t, pn, pn1);
      const double step = pn / (std::sqrt(2.0 * n) * pn1);
      t -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(t))) break;
    }
    evaluate(t, pn, pn1);
    const double dp = std::sqrt(2.0 * n) * pn1;
    rule.nodes[i] = t;
    rule.weights[i] = 2.0 / (dp * dp);
  }
  detail::symmetrize(rule);
  return rule;
}

/// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule legendre_nodes(int n) {
  if (n < 1 || n > 1024) throw std::domain_error("Gauss-Legendre order must be in [1, 1024], got " + std::to_string(n));
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  const Eigen::VectorXd guess = detail::jacobi_eigenvalues(sub);

  auto evaluate = [&](double t, double& pn, double& dpn) {
    double prev = 1.0, cur = t;
    for (int k = 2; k <= n; ++k) {
      const double next = ((2.0 * k - 1.0) * t * cur - (k - 1.0) * prev) / k;
      prev = cur;
      cur = next;
    }
    pn = cur;
    dpn = n * (t * cur - prev) / (t * t - 1.0);
  };

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = guess(i), pn = 0, dpn = 0;
    for (int iter = 0; iter < 100; ++iter) {
      evaluate(t, pn, dpn);
      const double step = pn / dpn;
      t -= step;
      if (std::abs(step) <= 1e-16) break;
    }
    evaluate(t, pn, dpn);
    rule.nodes[i] = t;
    rule.weights[i] = 2.0 / ((1.0 - t * t) * dpn * dpn);
  }
  detail::symmetrize(rule);
  return rule;
}

/// Doppler shifts and normalized Maxwellian weights: <f> = sum_i w_i f(delta0 - shift_i).
struct VelocityRule {
  std::vector<double> shifts;
  std::vector<double> weights;

  static VelocityRule build(const DopplerSpec& spec, double delta0 = 0.0) {
    spec.validate();
    VelocityRule out;
    if (spec.width == 0.0) {
      out.shifts = {0.0};
      out.weights = {1.0};
      return out;
    }
    if (spec.rule == DopplerRule::hermite) {
      const QuadratureRule gh = hermite_nodes(spec.nodes);
      for (int i = 0; i < spec.nodes; ++i) {
        out.shifts.push_back(spec.width * gh.nodes[i]);
        out.weights.push_back(gh.weights[i] / std::sqrt(std::numbers::pi));
      }
      return out;
    }

    const double scale = spec.core_width > 0 ? std::min(spec.core_width, spec.width) : spec.width;
    // Center the dense region on the resonant velocity group.
    const double center = std::clamp(delta0, -2.0 * spec.width, 2.0 * spec.width);
    const QuadratureRule gl = legendre_nodes(spec.nodes);
    const double half_pi = 0.5 * std::numbers::pi;
    double total = 0.0;
    for (int i = 0; i < spec.nodes; ++i) {
      const double theta = half_pi * gl.nodes[i];
      const double c = std::cos(theta);
      const double shift = center + scale * std::tan(theta);
      const double density =
          std::exp(-(shift * shift) / (spec.width * spec.width)) / (spec.width * std::sqrt(std::numbers::pi));
      const double w = gl.weights[i] * half_pi * scale / (c * c) * density;
      out.shifts.push_back(shift);
      out.weights.push_back(w);
      total += w;
    }
    for (double& w : out.weights) w /= total;
    return out;
  }

  std::size_t size() const { return shifts.size(); }

  /// Deterministic fixed-order reduction.
  template <class F>
  double average(F&& f, double delta0) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
      const double delta = delta0 - shifts[i];
      const double value = f(delta);
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite integrand at Doppler node " << i << " (delta=" << delta << ")";
        throw NumericError(os.str());
      }
      sum += weights[i] * value;
    }
    return sum;
  }
};

/// Maxwellian average of f(delta0 - delta_D) over Doppler shifts delta_D. For width = 0 this
/// is exactly f(delta0).
template <class F>
double doppler_average(F&& f, double delta0, const DopplerSpec& spec) {
  return VelocityRule::build(spec, delta0).average(f, delta0);
}

}  // namespace hanle
