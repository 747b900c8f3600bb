#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "angular.hpp"
#include "errors.hpp"

namespace hanle {

using Complex = std::complex<double>;

/// Closed transition F_g -> F_e. All rates are in units of the optical-coherence
/// relaxation rate gamma_eg, which is therefore 1 unless deliberately overridden.
struct AtomSpec {
  Spin f_g = Spin::integer(2);
  Spin f_e = Spin::integer(3);
  double g_g = 0.5;
  double g_e = 2.0 / 3.0;
  double gamma_r = 2.0;
  double big_gamma = 5e-3;
  double gamma_eg = 1.0;

  int n_g() const { return f_g.multiplicity(); }
  int n_e() const { return f_e.multiplicity(); }

  /// Reports a mismatch of gamma_eg = gamma_r/2 + Gamma. Not an error: commonly used
  /// parameter sets only satisfy it approximately.
  std::optional<std::string> consistency_warning(double rel_tol = 1e-9) const {
    const double expected = 0.5 * gamma_r + big_gamma;
    if (std::abs(expected - gamma_eg) <= rel_tol * std::max(1.0, std::abs(gamma_eg))) return std::nullopt;
    std::ostringstream os;
    os << "gamma_eg=" << gamma_eg << " differs from gamma_r/2+Gamma=" << expected;
    return os.str();
  }

  friend bool operator==(const AtomSpec&, const AtomSpec&) = default;
};

struct FieldParams {
  double rabi = 0.0;
  Polarization pol{};
  double delta0 = 0.0;
};

/// Zeeman splitting rates of the ground and excited levels.
struct ZeemanParams {
  double omega_g = 0.0;
  double omega_e = 0.0;
};

/// Steady state of one velocity group. rho_eg is (2F_e+1) x (2F_g+1) in the rotating basis.
struct DensityMatrixBlocks {
  Eigen::MatrixXcd rho_g;
  Eigen::MatrixXcd rho_e;
  Eigen::MatrixXcd rho_eg;

  Eigen::MatrixXcd rho_ge() const { return rho_eg.adjoint(); }
};

/// Bohr magneton over Planck constant, MHz per gauss.
inline constexpr double kBohrMhzPerGauss = 1.39962449361;

/// Converts a longitudinal field in gauss into Zeeman rates. unit_scale is gamma_eg/2pi in MHz.
inline ZeemanParams zeeman_from_field(double gauss, const AtomSpec& atom, double unit_scale) {
  if (!(unit_scale > 0)) throw std::domain_error("unit_scale must be positive");
  const double per_g = kBohrMhzPerGauss * gauss / unit_scale;
  return {per_g * atom.g_g, per_g * atom.g_e};
}

/// Zeeman rates for one physical field expressed through the ground splitting.
inline ZeemanParams zeeman_from_ground(double omega_g, const AtomSpec& atom) {
  if (omega_g == 0.0) return {0.0, 0.0};
  if (atom.g_g == 0.0) throw std::domain_error("cannot derive excited splitting when g_g = 0");
  return {omega_g, omega_g * atom.g_e / atom.g_g};
}

inline Eigen::MatrixXd build_dipole_operator(const AtomSpec& atom, const Polarization& pol) {
  return build_dipole_operator(atom.f_g, atom.f_e, pol);
}

/// Ground-state isotropic distribution, trace one.
inline Eigen::MatrixXcd isotropic_ground(const AtomSpec& atom) {
  return Eigen::MatrixXcd::Identity(atom.n_g(), atom.n_g()) / static_cast<double>(atom.n_g());
}

namespace detail {

/// decay_cg(b, q+1) = <F_g m_b; 1 q | F_e m_b+q>, zero when m_b+q lies outside F_e.
inline Eigen::MatrixXd decay_table(const AtomSpec& atom) {
  const Spin one = Spin::integer(1);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(atom.n_g(), 3);
  for (int b = 0; b < atom.n_g(); ++b) {
    const Projection mg = projection_at(atom.f_g, b);
    for (int q = -1; q <= 1; ++q) {
      const Projection me{mg.twice + 2 * q};
      if (std::abs(me.twice) > atom.f_e.twice) continue;
      table(b, q + 1) = cg_coefficient(atom.f_g, mg, one, Projection{2 * q}, atom.f_e, me);
    }
  }
  return table;
}

inline void apply_feed(const Eigen::MatrixXd& table, const AtomSpec& atom, const Eigen::MatrixXcd& rho_e,
                       Eigen::MatrixXcd& out) {
  out.setZero(atom.n_g(), atom.n_g());
  for (int b = 0; b < atom.n_g(); ++b) {
    for (int bp = 0; bp < atom.n_g(); ++bp) {
      Complex acc = 0;
      for (int q = -1; q <= 1; ++q) {
        const double c1 = table(b, q + 1), c2 = table(bp, q + 1);
        if (c1 == 0.0 || c2 == 0.0) continue;
        // index of m_g + q in the excited ordering
        const int a = (projection_at(atom.f_g, b).twice + 2 * q + atom.f_e.twice) / 2;
        const int ap = (projection_at(atom.f_g, bp).twice + 2 * q + atom.f_e.twice) / 2;
        acc += c1 * c2 * rho_e(a, ap);
      }
      out(b, bp) = atom.gamma_r * acc;
    }
  }
}

inline void require_solvable(const AtomSpec& atom) {
  require_dipole_allowed(atom.f_g, atom.f_e);
  if (!(atom.big_gamma > 0))
    throw SingularSystemError("in-flight relaxation Gamma must be positive for a unique steady state (got " +
                              std::to_string(atom.big_gamma) + ")");
  if (!(atom.gamma_r >= 0) || !(atom.gamma_eg > 0))
    throw std::domain_error("relaxation rates must be non-negative with gamma_eg > 0");
}

inline void require_finite(const Eigen::MatrixXcd& m, const char* what, double delta, const ZeemanParams& z) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << "non-finite " << what << " at delta=" << delta << ", omega_g=" << z.omega_g << ", omega_e=" << z.omega_e;
    throw NumericError(os.str());
  }
}

}  // namespace detail

/// Spontaneous repopulation of the ground level from rho_e for a closed transition.
inline Eigen::MatrixXcd spontaneous_feed(const Eigen::MatrixXcd& rho_e, const AtomSpec& atom) {
  Eigen::MatrixXcd out;
  detail::apply_feed(detail::decay_table(atom), atom, rho_e, out);
  return out;
}

/// Stationary Bloch-equation solver for a fixed transition and light field.
///
/// The optical coherences are eliminated analytically (F_z is diagonal, so each element of
/// rho_eg is a rational function of rho_g and rho_e), leaving a dense complex system in the
/// ground and excited blocks only. Since the light carries only sigma+ and sigma- components
/// and the source term is diagonal, elements with odd m - m' vanish identically; they are
/// dropped from the unknowns.
///
/// Instances are immutable after construction and can be shared across threads.
class SteadyStateSolver {
 public:
  SteadyStateSolver(const AtomSpec& atom, const FieldParams& field) : atom_(atom), field_(field) {
    detail::require_solvable(atom_);
    if (!(field_.rabi >= 0) || !std::isfinite(field_.rabi)) throw std::domain_error("Rabi frequency must be >= 0");
    v_ = build_dipole_operator(atom_, field_.pol);
    decay_ = detail::decay_table(atom_);

    const int ng = atom_.n_g(), ne = atom_.n_e();
    row_nz_.resize(ne);
    col_nz_.resize(ng);
    for (int a = 0; a < ne; ++a)
      for (int b = 0; b < ng; ++b)
        if (v_(a, b) != 0.0) {
          row_nz_[a].push_back({b, v_(a, b)});
          col_nz_[b].push_back({a, v_(a, b)});
        }

    g_index_.assign(ng * ng, -1);
    e_index_.assign(ne * ne, -1);
    int n = 0;
    for (int j = 0; j < ng; ++j)
      for (int i = 0; i < ng; ++i)
        if (((i - j) & 1) == 0) g_index_[i + ng * j] = n++;
    n_ground_unknowns_ = n;
    for (int j = 0; j < ne; ++j)
      for (int i = 0; i < ne; ++i)
        if (((i - j) & 1) == 0) e_index_[i + ne * j] = n++;
    n_unknowns_ = n;
  }

  const AtomSpec& atom() const { return atom_; }
  const FieldParams& field() const { return field_; }
  const Eigen::MatrixXd& dipole() const { return v_; }
  int unknowns() const { return n_unknowns_; }

  DensityMatrixBlocks solve(double delta, const ZeemanParams& z) const {
    const Eigen::VectorXcd x = solve_reduced(delta, z);
    const int ng = atom_.n_g(), ne = atom_.n_e();
    DensityMatrixBlocks out;
    out.rho_g = Eigen::MatrixXcd::Zero(ng, ng);
    out.rho_e = Eigen::MatrixXcd::Zero(ne, ne);
    for (int j = 0; j < ng; ++j)
      for (int i = 0; i < ng; ++i)
        if (const int k = g(i, j); k >= 0) out.rho_g(i, j) = x(k);
    for (int j = 0; j < ne; ++j)
      for (int i = 0; i < ne; ++i)
        if (const int k = e(i, j); k >= 0) out.rho_e(i, j) = x(k);

    // rho_eg = -iR (V rho_g - rho_e V) / D elementwise
    const Eigen::MatrixXcd source = v_.cast<Complex>() * out.rho_g - out.rho_e * v_.cast<Complex>();
    out.rho_eg = Eigen::MatrixXcd::Zero(ne, ng);
    const Complex minus_i_r(0.0, -field_.rabi);
    for (int a = 0; a < ne; ++a)
      for (int b = 0; b < ng; ++b) out.rho_eg(a, b) = minus_i_r * source(a, b) / denominator(a, b, delta, z);
    detail::require_finite(out.rho_eg, "optical coherence", delta, z);
    return out;
  }

  /// Photon absorption rate (gamma_r + Gamma) Tr rho_e without building the blocks.
  double absorption(double delta, const ZeemanParams& z) const {
    const Eigen::VectorXcd x = solve_reduced(delta, z);
    const int ne = atom_.n_e();
    double trace = 0;
    for (int i = 0; i < ne; ++i) trace += x(e(i, i)).real();
    return (atom_.gamma_r + atom_.big_gamma) * trace;
  }

 private:
  struct Entry {
    int index;
    double value;
  };

  int g(int i, int j) const { return g_index_[i + atom_.n_g() * j]; }
  int e(int i, int j) const { return e_index_[i + atom_.n_e() * j]; }

  /// gamma_eg - i(delta - Omega_e m_e + Omega_g m_g)
  Complex denominator(int a, int b, double delta, const ZeemanParams& z) const {
    const double me = projection_at(atom_.f_e, a).value();
    const double mg = projection_at(atom_.f_g, b).value();
    return {atom_.gamma_eg, -(delta - z.omega_e * me + z.omega_g * mg)};
  }

  // Row contribution coeff * X_ab, X = V rho_g - rho_e V.
  template <class Row>
  void add_x(Row&& row, int a, int b, Complex coeff) const {
    for (const auto& [bp, v] : row_nz_[a])
      if (const int k = g(bp, b); k >= 0) row(k) += coeff * v;
    for (const auto& [ap, v] : col_nz_[b])
      if (const int k = e(a, ap); k >= 0) row(k) -= coeff * v;
  }

  // Row contribution coeff * Y_ba, Y = rho_g V^T - V^T rho_e (= X^dagger for Hermitian blocks).
  template <class Row>
  void add_y(Row&& row, int b, int a, Complex coeff) const {
    for (const auto& [bp, v] : row_nz_[a])
      if (const int k = g(b, bp); k >= 0) row(k) += coeff * v;
    for (const auto& [ap, v] : col_nz_[b])
      if (const int k = e(ap, a); k >= 0) row(k) -= coeff * v;
  }

  Eigen::VectorXcd solve_reduced(double delta, const ZeemanParams& z) const {
    const int ng = atom_.n_g(), ne = atom_.n_e();
    const double r2 = field_.rabi * field_.rabi;
    const double gam = atom_.big_gamma;

    Eigen::MatrixXcd inv_d(ne, ng);
    for (int a = 0; a < ne; ++a)
      for (int b = 0; b < ng; ++b) inv_d(a, b) = 1.0 / denominator(a, b, delta, z);

    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n_unknowns_, n_unknowns_);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n_unknowns_);

    // Ground block:
    // -Gamma rho_g - i Omega_g [F, rho_g] + feed(rho_e) - iR (V^T rho_eg - rho_ge V) = -Gamma rho_0
    for (int bp = 0; bp < ng; ++bp) {
      for (int b = 0; b < ng; ++b) {
        const int row_index = g(b, bp);
        if (row_index < 0) continue;
        auto row = [&](int k) -> Complex& { return m(row_index, k); };
        const double dm = projection_at(atom_.f_g, b).value() - projection_at(atom_.f_g, bp).value();
        row(row_index) += Complex(-gam, -z.omega_g * dm);
        if (b == bp) rhs(row_index) = -gam / ng;

        for (int q = -1; q <= 1; ++q) {
          const double c1 = decay_(b, q + 1), c2 = decay_(bp, q + 1);
          if (c1 == 0.0 || c2 == 0.0) continue;
          const int a = b + q + (ne - ng) / 2;
          const int ap = bp + q + (ne - ng) / 2;
          if (const int k = e(a, ap); k >= 0) row(k) += atom_.gamma_r * c1 * c2;
        }
        if (r2 == 0.0) continue;
        for (const auto& [a, v] : col_nz_[b]) add_x(row, a, bp, -r2 * v * inv_d(a, bp));
        for (const auto& [a, v] : col_nz_[bp]) add_y(row, b, a, -r2 * v * std::conj(inv_d(a, b)));
      }
    }

    // Excited block:
    // -(Gamma + gamma_r) rho_e - i Omega_e [F, rho_e] - iR (V rho_ge - rho_eg V^T) = 0
    for (int ap = 0; ap < ne; ++ap) {
      for (int a = 0; a < ne; ++a) {
        const int row_index = e(a, ap);
        if (row_index < 0) continue;
        auto row = [&](int k) -> Complex& { return m(row_index, k); };
        const double dm = projection_at(atom_.f_e, a).value() - projection_at(atom_.f_e, ap).value();
        row(row_index) += Complex(-(gam + atom_.gamma_r), -z.omega_e * dm);
        if (r2 == 0.0) continue;
        for (const auto& [b, v] : row_nz_[a]) add_y(row, b, ap, r2 * v * std::conj(inv_d(ap, b)));
        for (const auto& [b, v] : row_nz_[ap]) add_x(row, a, b, r2 * v * inv_d(a, b));
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    Eigen::VectorXcd x = lu.solve(rhs);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "stationary solve produced non-finite values at delta=" << delta << ", omega_g=" << z.omega_g
         << ", omega_e=" << z.omega_e;
      throw NumericError(os.str());
    }
    return x;
  }

  AtomSpec atom_;
  FieldParams field_;
  Eigen::MatrixXd v_;
  Eigen::MatrixXd decay_;
  std::vector<std::vector<Entry>> row_nz_;  // per excited sublevel: coupled ground sublevels
  std::vector<std::vector<Entry>> col_nz_;  // per ground sublevel: coupled excited sublevels
  std::vector<int> g_index_, e_index_;
  int n_ground_unknowns_ = 0;
  int n_unknowns_ = 0;
};

inline DensityMatrixBlocks solve_steady(const AtomSpec& atom, const FieldParams& field, double delta,
                                        const ZeemanParams& zeeman) {
  return SteadyStateSolver(atom, field).solve(delta, zeeman);
}

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace detail

/// Reference solver: all four blocks (rho_g, rho_e, rho_eg, rho_ge) as independent unknowns of
/// the full Liouvillian, using vec(A X B) = (B^T (x) A) vec(X). Slow; intended as a cross-check.
inline DensityMatrixBlocks solve_steady_full(const AtomSpec& atom, const FieldParams& field, double delta,
                                             const ZeemanParams& z) {
  detail::require_solvable(atom);
  if (!(field.rabi >= 0)) throw std::domain_error("Rabi frequency must be >= 0");
  using Eigen::MatrixXcd;
  const int ng = atom.n_g(), ne = atom.n_e();
  const MatrixXcd v = build_dipole_operator(atom, field.pol).cast<Complex>();
  const MatrixXcd vd = v.adjoint();
  const MatrixXcd fe = build_fz(atom.f_e).cast<Complex>();
  const MatrixXcd fg = build_fz(atom.f_g).cast<Complex>();
  const MatrixXcd ig = MatrixXcd::Identity(ng, ng), ie = MatrixXcd::Identity(ne, ne);
  const Complex i1(0.0, 1.0);
  const double r = field.rabi;
  using detail::kron;

  const int og = 0, oe = ng * ng, oeg = oe + ne * ne, oge = oeg + ne * ng, n = oge + ng * ne;
  MatrixXcd l = MatrixXcd::Zero(n, n);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);

  // (gamma_eg - i delta) rho_eg + iR (V rho_g - rho_e V) + i (Omega_e F_e rho_eg - Omega_g rho_eg F_g) = 0
  l.block(oeg, oeg, ne * ng, ne * ng) = Complex(atom.gamma_eg, -delta) * MatrixXcd::Identity(ne * ng, ne * ng) +
                                        i1 * z.omega_e * kron(ig, fe) - i1 * z.omega_g * kron(fg.transpose(), ie);
  l.block(oeg, og, ne * ng, ng * ng) = i1 * r * kron(ig, v);
  l.block(oeg, oe, ne * ng, ne * ne) = -i1 * r * kron(v.transpose(), ie);

  // Hermitian conjugate of the above for rho_ge.
  l.block(oge, oge, ng * ne, ng * ne) = Complex(atom.gamma_eg, delta) * MatrixXcd::Identity(ng * ne, ng * ne) -
                                        i1 * z.omega_e * kron(fe.transpose(), ig) + i1 * z.omega_g * kron(ie, fg);
  l.block(oge, og, ng * ne, ng * ng) = -i1 * r * kron(vd.transpose(), ig);
  l.block(oge, oe, ng * ne, ne * ne) = i1 * r * kron(ie, vd);

  // (Gamma + gamma_r) rho_e + iR (V rho_ge - rho_eg V^dagger) + i Omega_e [F_e, rho_e] = 0
  l.block(oe, oe, ne * ne, ne * ne) = (atom.big_gamma + atom.gamma_r) * MatrixXcd::Identity(ne * ne, ne * ne) +
                                      i1 * z.omega_e * (kron(ie, fe) - kron(fe.transpose(), ie));
  l.block(oe, oge, ne * ne, ng * ne) = i1 * r * kron(ie, v);
  l.block(oe, oeg, ne * ne, ne * ng) = -i1 * r * kron(vd.transpose(), ie);

  // Gamma rho_g - feed(rho_e) + iR (V^dagger rho_eg - rho_ge V) + i Omega_g [F_g, rho_g] = Gamma rho_0
  l.block(og, og, ng * ng, ng * ng) = atom.big_gamma * MatrixXcd::Identity(ng * ng, ng * ng) +
                                      i1 * z.omega_g * (kron(ig, fg) - kron(fg.transpose(), ig));
  {
    const Eigen::MatrixXd table = detail::decay_table(atom);
    MatrixXcd basis = MatrixXcd::Zero(ne, ne), fed;
    for (int col = 0; col < ne * ne; ++col) {
      basis.setZero();
      basis(col % ne, col / ne) = 1.0;
      detail::apply_feed(table, atom, basis, fed);
      l.block(og, oe + col, ng * ng, 1) = -Eigen::Map<const Eigen::VectorXcd>(fed.data(), ng * ng);
    }
  }
  l.block(og, oeg, ng * ng, ne * ng) = i1 * r * kron(ig, vd);
  l.block(og, oge, ng * ng, ng * ne) = -i1 * r * kron(v.transpose(), ig);

  const MatrixXcd rho0 = isotropic_ground(atom);
  rhs.segment(og, ng * ng) = atom.big_gamma * Eigen::Map<const Eigen::VectorXcd>(rho0.data(), ng * ng);

  const Eigen::VectorXcd x = Eigen::FullPivLU<MatrixXcd>(l).solve(rhs);
  if (!x.allFinite()) throw NumericError("full Liouvillian solve produced non-finite values");

  DensityMatrixBlocks out;
  out.rho_g = Eigen::Map<const MatrixXcd>(x.data() + og, ng, ng);
  out.rho_e = Eigen::Map<const MatrixXcd>(x.data() + oe, ne, ne);
  out.rho_eg = Eigen::Map<const MatrixXcd>(x.data() + oeg, ne, ng);
  return out;
}

/// Per-atom absorption rate in the energy-balance form (gamma_r + Gamma) Tr rho_e.
inline double absorption(const DensityMatrixBlocks& blocks, const AtomSpec& atom, const FieldParams& /*field*/) {
  return (atom.gamma_r + atom.big_gamma) * blocks.rho_e.trace().real();
}

/// Same observable from the work done by the field: -2R Im Tr(rho_eg V^dagger).
inline double absorption_from_coherence(const DensityMatrixBlocks& blocks, const AtomSpec& atom,
                                        const FieldParams& field) {
  const Eigen::MatrixXcd v = build_dipole_operator(atom, field.pol).cast<Complex>();
  return -2.0 * field.rabi * (blocks.rho_eg * v.adjoint()).trace().imag();
}

}  // namespace hanle
