#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bloch.hpp"
#include "doppler.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace hanle {

/// Absorption sampled against the ground Zeeman splitting Omega_g (proxy for B).
struct ResonanceCurve {
  std::vector<double> omega_g;  // strictly increasing
  std::vector<double> signal;
  AtomSpec atom;
  FieldParams field;
  DopplerSpec doppler;
};

enum class ResonanceSign { eia, eit, none };

inline std::string to_string(ResonanceSign s) {
  switch (s) {
    case ResonanceSign::eia:
      return "EIA";
    case ResonanceSign::eit:
      return "EIT";
    default:
      return "none";
  }
}

struct ResonanceParams {
  double amplitude = 0.0;  // |S(0) - background(0)|
  double width = std::numeric_limits<double>::quiet_NaN();  // FWHM
  double ratio = std::numeric_limits<double>::quiet_NaN();  // amplitude / width
  ResonanceSign sign = ResonanceSign::none;
  double background_at_zero = std::numeric_limits<double>::quiet_NaN();
  std::string background;  // "quadratic" or "pedestal"
  double fit_residual = 0.0;  // rms misfit of the background model in its window, relative to A
  std::string note;        // reason when sign == none

  bool found() const { return sign != ResonanceSign::none; }
};

/// Controls for the coarse/fine magnetic grid and the background fit.
struct ScanSettings {
  double coarse_range = 5.0;   // coarse grid spans [-coarse_range, coarse_range]
  int coarse_points = 51;
  double probe_min = 1e-3;     // log-spaced probe grid from probe_min to coarse_range on each side
  int probe_points = 40;
  double fine_factor = 10.0;   // fine grid spans +-fine_factor * width estimate
  int fine_points = 201;
  int max_refinements = 4;     // fine stages until the width agrees with its estimate
  double width_tolerance = 0.25;
  double annulus_inner = 3.0;  // background fit window, in units of the width estimate
  double annulus_outer = 10.0;
  double background_tolerance = 0.02;  // accepted rms misfit of the quadratic model, relative to A

  void validate() const {
    if (!(coarse_range > 0) || !std::isfinite(coarse_range)) throw std::domain_error("coarse_range must be positive");
    if (coarse_points < 7) throw std::domain_error("coarse_points must be >= 7");
    if (!(probe_min > 0) || !(probe_min < coarse_range)) throw std::domain_error("probe_min must lie in (0, coarse_range)");
    if (probe_points < 4) throw std::domain_error("probe_points must be >= 4");
    if (!(fine_factor > 0) || !std::isfinite(fine_factor)) throw std::domain_error("fine_factor must be positive");
    if (fine_points < 7) throw std::domain_error("fine_points must be >= 7");
    if (max_refinements < 1) throw std::domain_error("max_refinements must be >= 1");
    if (!(width_tolerance > 0)) throw std::domain_error("width_tolerance must be positive");
    if (!(annulus_inner > 0) || !(annulus_outer > annulus_inner))
      throw std::domain_error("background annulus must satisfy 0 < inner < outer");
    if (!(background_tolerance >= 0)) throw std::domain_error("background_tolerance must be >= 0");
  }

  friend bool operator==(const ScanSettings&, const ScanSettings&) = default;
};

/// Scale of the homogeneous (power-broadened) line, used to place velocity nodes.
inline double line_core_width(const AtomSpec& atom, const FieldParams& field) {
  return 2.0 * std::sqrt(atom.gamma_eg * atom.gamma_eg + 2.0 * field.rabi * field.rabi);
}

inline DopplerSpec resolved_doppler(const DopplerSpec& spec, const AtomSpec& atom, const FieldParams& field) {
  DopplerSpec out = spec;
  if (out.core_width == 0.0) out.core_width = line_core_width(atom, field);
  return out;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.5 * (lo + hi);
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  // exact mirror symmetry for symmetric ranges
  if (lo == -hi) {
    for (int i = 0; i < n / 2; ++i) out[n - 1 - i] = -out[i];
    if (n % 2 == 1) out[n / 2] = 0.0;
  }
  return out;
}

/// Doppler-averaged absorption as a function of Omega_g for a fixed atom and field.
class CurveEvaluator {
 public:
  CurveEvaluator(const AtomSpec& atom, const FieldParams& field, const DopplerSpec& doppler, int threads = 1)
      : solver_(atom, field),
        doppler_(resolved_doppler(doppler, atom, field)),
        velocities_(VelocityRule::build(doppler_, field.delta0)),
        threads_(threads) {}

  double operator()(double omega_g) const {
    const ZeemanParams z = zeeman_from_ground(omega_g, solver_.atom());
    try {
      return velocities_.average([&](double delta) { return solver_.absorption(delta, z); }, solver_.field().delta0);
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << e.what() << " [omega_g=" << omega_g << "]";
      throw NumericError(os.str());
    }
  }

  std::vector<double> evaluate(const std::vector<double>& grid) const {
    std::vector<double> out(grid.size());
    parallel_for(grid.size(), threads_, [&](std::size_t i) { out[i] = (*this)(grid[i]); });
    return out;
  }

  const DopplerSpec& doppler() const { return doppler_; }
  const SteadyStateSolver& solver() const { return solver_; }

 private:
  SteadyStateSolver solver_;
  DopplerSpec doppler_;
  VelocityRule velocities_;
  int threads_;
};

inline void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::domain_error("magnetic grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::domain_error("magnetic grid contains a non-finite value");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::domain_error("magnetic grid must be strictly increasing");
  }
}

inline ResonanceCurve scan_magnetic(const AtomSpec& atom, const FieldParams& field, const DopplerSpec& doppler,
                                    const std::vector<double>& grid, int threads = 1) {
  validate_grid(grid);
  const CurveEvaluator eval(atom, field, doppler, threads);
  return {grid, eval.evaluate(grid), atom, field, eval.doppler()};
}

namespace detail {

inline double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const auto it = std::lower_bound(x.begin(), x.end(), at);
  if (it == x.end()) return y.back();
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  if (x[i] == at || i == 0) return y[i];
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

inline std::size_t nearest_index(const std::vector<double>& x, double at) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i] - at) < std::abs(x[best] - at)) best = i;
  return best;
}

inline double curvature(const std::vector<double>& x, const std::vector<double>& y, std::size_t i) {
  const double right = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  const double left = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
  return 2.0 * (right - left) / (x[i + 1] - x[i - 1]);
}

/// Distance from zero to the first curvature sign change on each side of the centre.
/// Returns the mean of the available sides, or nullopt.
inline std::optional<double> inflection_half_range(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::size_t c = nearest_index(x, 0.0);
  c = std::clamp<std::size_t>(c, 1, n - 2);
  const double c0 = curvature(x, y, c);
  if (c0 == 0.0 || !std::isfinite(c0)) return std::nullopt;

  auto crossing = [&](std::size_t prev, std::size_t cur) {
    const double a = curvature(x, y, prev), b = curvature(x, y, cur);
    return x[prev] + (x[cur] - x[prev]) * a / (a - b);
  };
  std::optional<double> right, left;
  for (std::size_t i = c + 1; i + 1 < n; ++i)
    if (curvature(x, y, i) * c0 < 0) {
      right = crossing(i - 1, i);
      break;
    }
  for (std::size_t i = c; i-- > 1;)
    if (curvature(x, y, i) * c0 < 0) {
      left = crossing(i + 1, i);
      break;
    }
  if (right && left) return 0.5 * (*right - *left);
  if (right) return std::abs(*right);
  if (left) return std::abs(*left);
  return std::nullopt;
}

/// Half-maximum crossing of r (which peaks at r0 at the centre) walking outward.
inline std::optional<double> half_max_crossing(const std::vector<double>& x, const std::vector<double>& r, double r0,
                                               std::size_t c, int direction) {
  const double half = 0.5 * r0;
  std::size_t prev = c;
  for (;;) {
    if (direction > 0 && prev + 1 >= x.size()) return std::nullopt;
    if (direction < 0 && prev == 0) return std::nullopt;
    const std::size_t cur = direction > 0 ? prev + 1 : prev - 1;
    const double a = (r[prev] - half) * (r0 > 0 ? 1 : -1);
    const double b = (r[cur] - half) * (r0 > 0 ? 1 : -1);
    if (a >= 0 && b < 0) return x[prev] + (x[cur] - x[prev]) * a / (a - b);
    prev = cur;
  }
}

}  // namespace detail

namespace detail {

/// Residual with the exact centre value inserted at omega_g = 0.
struct CentredResidual {
  std::vector<double> x, r;
  std::size_t centre = 0;
};

template <class Background>
CentredResidual centred_residual(const std::vector<double>& x, const std::vector<double>& y, double amp,
                                 Background&& background) {
  CentredResidual out{x, std::vector<double>(x.size()), 0};
  for (std::size_t i = 0; i < x.size(); ++i) out.r[i] = y[i] - background(x[i]);
  const auto pos = std::lower_bound(out.x.begin(), out.x.end(), 0.0);
  out.centre = static_cast<std::size_t>(pos - out.x.begin());
  if (pos != out.x.end() && *pos == 0.0) {
    out.r[out.centre] = amp;
  } else {
    out.x.insert(pos, 0.0);
    out.r.insert(out.r.begin() + static_cast<std::ptrdiff_t>(out.centre), amp);
  }
  return out;
}

/// Full width between the half-maximum crossings on either side of the centre.
inline std::optional<double> full_width(const CentredResidual& res, double amp) {
  const auto right = half_max_crossing(res.x, res.r, amp, res.centre, +1);
  const auto left = half_max_crossing(res.x, res.r, amp, res.centre, -1);
  if (right && left) return *right - *left;
  return std::nullopt;
}

/// Quadratic background fitted on the annulus [inner*w, outer*w]. The fit is repeated with
/// the current Lorentzian estimate of the central structure removed from the annulus points
/// so that its wings do not bias the background.
inline ResonanceParams quadratic_background_fit(const std::vector<double>& x, const std::vector<double>& y,
                                                double w_est, const ScanSettings& settings) {
  std::vector<std::size_t> annulus;
  const double scale = settings.annulus_outer * w_est;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ax = std::abs(x[i]);
    if (ax >= settings.annulus_inner * w_est && ax <= scale) annulus.push_back(i);
  }
  if (annulus.size() < 4)
    throw ExtractionError("background annulus holds only " + std::to_string(annulus.size()) +
                          " points (width estimate " + std::to_string(w_est) + ")");

  Eigen::MatrixXd design(annulus.size(), 3);
  for (std::size_t k = 0; k < annulus.size(); ++k) {
    const double t = x[annulus[k]] / scale;
    design.row(k) << 1.0, t, t * t;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const double y0 = interpolate(x, y, 0.0);

  double signed_amp = 0.0, width = 0.0;
  Eigen::Vector3d coeff = Eigen::Vector3d::Zero();
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd rhs(annulus.size());
    for (std::size_t k = 0; k < annulus.size(); ++k) {
      const double xi = x[annulus[k]];
      const double tail = width > 0 ? signed_amp / (1.0 + 4.0 * xi * xi / (width * width)) : 0.0;
      rhs(k) = y[annulus[k]] - tail;
    }
    coeff = qr.solve(rhs);
    const double amp = y0 - coeff(0);
    if (!(std::abs(amp) > 1e-12))
      throw ExtractionError("central structure below noise floor (|A| = " + std::to_string(std::abs(amp)) + ")");

    const auto res = centred_residual(x, y, amp, [&](double xv) {
      const double t = xv / scale;
      return coeff(0) + coeff(1) * t + coeff(2) * t * t;
    });
    const auto new_width = full_width(res, amp);
    if (!new_width) throw ExtractionError("no half-maximum crossings around omega_g = 0");

    const bool converged = width > 0 && std::abs(*new_width - width) <= 1e-13 * *new_width &&
                           std::abs(amp - signed_amp) <= 1e-13 * std::abs(amp);
    signed_amp = amp;
    width = *new_width;
    if (converged) break;
  }

  double sum_sq = 0.0;
  for (std::size_t k = 0; k < annulus.size(); ++k) {
    const double xi = x[annulus[k]], t = xi / scale;
    const double model = coeff(0) + coeff(1) * t + coeff(2) * t * t + signed_amp / (1.0 + 4.0 * xi * xi / (width * width));
    sum_sq += (y[annulus[k]] - model) * (y[annulus[k]] - model);
  }

  ResonanceParams out;
  out.amplitude = std::abs(signed_amp);
  out.width = width;
  out.ratio = out.amplitude / width;
  out.sign = signed_amp > 0 ? ResonanceSign::eia : ResonanceSign::eit;
  out.background_at_zero = coeff(0);
  out.background = "quadratic";
  out.fit_residual = std::sqrt(sum_sq / static_cast<double>(annulus.size())) / out.amplitude;
  return out;
}

/// First local extremum of the opposite kind walking outward from the centre, for a peak
/// (direction of decrease = +1) or a dip (-1).
inline std::optional<std::size_t> flank(const std::vector<double>& y, std::size_t c, int step, double peak) {
  std::size_t i = c;
  for (;;) {
    if (step > 0 && i + 1 >= y.size()) return std::nullopt;
    if (step < 0 && i == 0) return std::nullopt;
    const std::size_t next = step > 0 ? i + 1 : i - 1;
    if ((y[next] - y[i]) * peak >= 0) return i == c ? std::nullopt : std::optional<std::size_t>(i);
    i = next;
  }
}

/// Background through the two flanking extrema that bound the central structure.
inline ResonanceParams pedestal_fit(const std::vector<double>& x, const std::vector<double>& y, double peak) {
  const std::size_t c = nearest_index(x, 0.0);
  const auto right = flank(y, c, +1, peak);
  const auto left = flank(y, c, -1, peak);
  if (!right || !left) throw ExtractionError("central structure has no flanking extrema inside the scanned range");
  const double xl = x[*left], xr = x[*right], yl = y[*left], yr = y[*right];
  if (!(xl < 0.0 && xr > 0.0)) throw ExtractionError("flanking extrema do not bracket omega_g = 0");
  auto background = [&](double xv) { return yl + (yr - yl) * (xv - xl) / (xr - xl); };
  const double amp = interpolate(x, y, 0.0) - background(0.0);
  if (!(std::abs(amp) > 1e-12) || amp * peak < 0)
    throw ExtractionError("central structure below noise floor (|A| = " + std::to_string(std::abs(amp)) + ")");

  const std::vector<double> xs(x.begin() + static_cast<std::ptrdiff_t>(*left),
                               x.begin() + static_cast<std::ptrdiff_t>(*right) + 1);
  const std::vector<double> ys(y.begin() + static_cast<std::ptrdiff_t>(*left),
                               y.begin() + static_cast<std::ptrdiff_t>(*right) + 1);
  const auto width = full_width(centred_residual(xs, ys, amp, background), amp);
  if (!width) throw ExtractionError("no half-maximum crossings around omega_g = 0");

  ResonanceParams out;
  out.amplitude = std::abs(amp);
  out.width = *width;
  out.ratio = out.amplitude / *width;
  out.sign = amp > 0 ? ResonanceSign::eia : ResonanceSign::eit;
  out.background_at_zero = background(0.0);
  out.background = "pedestal";
  return out;
}

}  // namespace detail

/// Amplitude and FWHM of the narrowest structure centred on Omega_g = 0.
///
/// A width estimate w (from the curvature inflection points unless width_hint is given)
/// sets the annulus [inner*w, outer*w] where a quadratic background is fitted; the
/// amplitude is taken against the background at zero and the width from the half-maximum
/// crossings of the background-subtracted curve.
///
/// The quadratic fit is accepted only when its sign agrees with the central curvature, its
/// width is within a factor of two of w and the background-plus-Lorentzian model matches the
/// annulus to background_tolerance * A. Otherwise the structure sits on a pedestal
/// that changes too fast for a quadratic (typically a narrow peak inside a wider dip) and
/// the background is the straight line through the flanking extrema instead.
inline ResonanceParams extract_central_structure(const ResonanceCurve& curve, const ScanSettings& settings = {},
                                                 std::optional<double> width_hint = std::nullopt) {
  const auto& x = curve.omega_g;
  const auto& y = curve.signal;
  if (x.size() != y.size()) throw ExtractionError("curve arrays differ in length");
  if (x.size() < 7) throw ExtractionError("curve needs at least 7 points, got " + std::to_string(x.size()));
  if (!(x.front() < 0.0 && x.back() > 0.0)) throw ExtractionError("curve grid must bracket omega_g = 0");
  for (double v : y)
    if (!std::isfinite(v)) throw ExtractionError("curve contains non-finite signal values");

  double w_est;
  if (width_hint) {
    if (!(*width_hint > 0) || !std::isfinite(*width_hint)) throw ExtractionError("width hint must be positive");
    w_est = *width_hint;
  } else {
    const auto half_range = detail::inflection_half_range(x, y);
    if (!half_range || !(*half_range > 0)) throw ExtractionError("no curvature sign change around omega_g = 0");
    w_est = 2.0 * std::sqrt(3.0) * *half_range;  // Lorentzian: inflection at FWHM/(2 sqrt 3)
  }

  const std::size_t c = std::clamp<std::size_t>(detail::nearest_index(x, 0.0), 1, x.size() - 2);
  const double c0 = detail::curvature(x, y, c);
  if (c0 == 0.0) throw ExtractionError("flat curve at omega_g = 0");
  const double peak = c0 < 0 ? 1.0 : -1.0;

  std::string reason;
  try {
    ResonanceParams q = detail::quadratic_background_fit(x, y, w_est, settings);
    const bool sign_ok = (q.sign == ResonanceSign::eia) == (peak > 0);
    const bool width_ok = q.width > 0.5 * w_est && q.width < 2.0 * w_est;
    const bool fit_ok = q.fit_residual <= settings.background_tolerance;
    if (sign_ok && width_ok && fit_ok) return q;
    reason = !sign_ok    ? "quadratic background sign contradicts central curvature"
             : !width_ok ? "quadratic background width inconsistent with estimate"
                         : "quadratic background misfit " + std::to_string(q.fit_residual);
  } catch (const ExtractionError& e) {
    reason = e.what();
  }
  try {
    return detail::pedestal_fit(x, y, peak);
  } catch (const ExtractionError& e) {
    throw ExtractionError(reason + "; " + e.what());
  }
}

namespace detail {

inline void merge_grid(ResonanceCurve& curve, const std::vector<double>& grid, const std::vector<double>& values) {
  std::vector<std::pair<double, double>> all;
  all.reserve(curve.omega_g.size() + grid.size());
  for (std::size_t i = 0; i < curve.omega_g.size(); ++i) all.emplace_back(curve.omega_g[i], curve.signal[i]);
  for (std::size_t i = 0; i < grid.size(); ++i) all.emplace_back(grid[i], values[i]);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  curve.omega_g.clear();
  curve.signal.clear();
  for (const auto& [xv, yv] : all) {
    if (!curve.omega_g.empty() && xv == curve.omega_g.back()) continue;
    curve.omega_g.push_back(xv);
    curve.signal.push_back(yv);
  }
}

}  // namespace detail

/// Symmetric grid {-hi..-lo, 0, lo..hi} with n log-spaced points per side.
inline std::vector<double> symmetric_geomspace(double lo, double hi, int n) {
  std::vector<double> side(n);
  const double ratio = std::log(hi / lo);
  for (int i = 0; i < n; ++i) side[i] = n == 1 ? lo : lo * std::exp(ratio * i / (n - 1));
  side.back() = hi;
  std::vector<double> out;
  out.reserve(2 * n + 1);
  for (int i = n; i-- > 0;) out.push_back(-side[i]);
  out.push_back(0.0);
  out.insert(out.end(), side.begin(), side.end());
  return out;
}

/// A resonance curve together with the central structure found on it.
struct CentralScan {
  ResonanceCurve curve;
  ResonanceParams params;
  double width_estimate = std::numeric_limits<double>::quiet_NaN();  // annulus scale of the last fit
  int stages = 0;
};

/// Locates the narrowest central structure.
///
/// A log-spaced probe grid resolves every scale from probe_min to coarse_range, and the
/// first curvature sign change on it gives the initial width estimate. Fine linear grids of
/// +-fine_factor * w are then added until the extracted FWHM agrees with the estimate w that
/// set its background annulus. The coarse linear grid is kept for the output curve.
inline CentralScan scan_central_structure(const AtomSpec& atom, const FieldParams& field, const DopplerSpec& doppler,
                                          const ScanSettings& settings = {}, int threads = 1) {
  settings.validate();
  const CurveEvaluator eval(atom, field, doppler, threads);
  CentralScan out;
  ResonanceCurve& curve = out.curve;
  curve.atom = atom;
  curve.field = field;
  curve.doppler = eval.doppler();

  ResonanceCurve probe = curve;
  probe.omega_g = symmetric_geomspace(settings.probe_min, settings.coarse_range, settings.probe_points);
  probe.signal = eval.evaluate(probe.omega_g);
  const std::vector<double> coarse = linspace(-settings.coarse_range, settings.coarse_range, settings.coarse_points);
  curve.omega_g = probe.omega_g;
  curve.signal = probe.signal;
  auto add_points = [&](const std::vector<double>& grid) {
    std::vector<double> fresh;
    for (double v : grid)
      if (!std::binary_search(curve.omega_g.begin(), curve.omega_g.end(), v)) fresh.push_back(v);
    detail::merge_grid(curve, fresh, eval.evaluate(fresh));
  };
  add_points(coarse);

  const auto half_range = detail::inflection_half_range(probe.omega_g, probe.signal);
  if (!half_range || !(*half_range > 0)) {
    out.params.note = "no curvature sign change around omega_g = 0";
    return out;
  }
  double w_est = 2.0 * std::sqrt(3.0) * *half_range;

  for (int stage = 0; stage < settings.max_refinements; ++stage) {
    const double range = std::min(settings.fine_factor * w_est, settings.coarse_range);
    add_points(linspace(-range, range, settings.fine_points));
    out.stages = stage + 1;
    out.width_estimate = w_est;
    try {
      out.params = extract_central_structure(curve, settings, w_est);
    } catch (const ExtractionError& e) {
      out.params = ResonanceParams{};
      out.params.note = e.what();
      return out;
    }
    const double w_new = out.params.width;
    if (std::abs(w_new - w_est) <= settings.width_tolerance * w_est) break;
    w_est = w_new;
  }
  return out;
}

struct EllipticitySweep {
  std::vector<double> epsilons;
  std::vector<ResonanceParams> params;
  double eps_max = 0.0;  // argmax of amplitude over the grid
};

inline ResonanceParams resonance_at(const AtomSpec& atom, const FieldParams& field, const DopplerSpec& doppler,
                                    const ScanSettings& settings, int threads) {
  return scan_central_structure(atom, field, doppler, settings, threads).params;
}

/// Per-epsilon resonance parameters. Failures to find a central structure are recorded with
/// sign == none and zero amplitude; solver errors propagate annotated with epsilon.
inline EllipticitySweep sweep_ellipticity(const AtomSpec& atom, const FieldParams& field_template,
                                          const DopplerSpec& doppler, const std::vector<double>& epsilons,
                                          const ScanSettings& settings = {}, int threads = 1) {
  if (epsilons.empty()) throw std::domain_error("ellipticity sweep needs at least one epsilon");
  EllipticitySweep out;
  out.epsilons = epsilons;
  double best = -1.0;
  for (double eps : epsilons) {
    FieldParams field = field_template;
    field.pol = Polarization::from_ellipticity(eps);
    try {
      out.params.push_back(resonance_at(atom, field, doppler, settings, threads));
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << e.what() << " [epsilon=" << eps << "]";
      throw NumericError(os.str());
    }
    if (out.params.back().amplitude > best) {
      best = out.params.back().amplitude;
      out.eps_max = eps;
    }
  }
  return out;
}

struct EpsMaxResult {
  double eps_max = 0.0;
  double amplitude_max = 0.0;
  double amplitude_zero = 0.0;
  double gain = 0.0;  // amplitude_max / amplitude_zero
  bool multimodal = false;
  EllipticitySweep coarse;
};

/// Optimal ellipticity on [0, pi/4]: 13-point coarse scan, then golden-section refinement of
/// the amplitude inside the bracket around the coarse maximum.
inline EpsMaxResult find_eps_max(const AtomSpec& atom, const FieldParams& field_template, const DopplerSpec& doppler,
                                 const ScanSettings& settings = {}, int threads = 1, double tolerance = 1e-3) {
  constexpr int kCoarse = 13;
  const double quarter = std::numbers::pi / 4;
  EpsMaxResult out;
  out.coarse = sweep_ellipticity(atom, field_template, doppler, linspace(0.0, quarter, kCoarse), settings, threads);
  const auto& eps = out.coarse.epsilons;
  std::vector<double> amp;
  for (const auto& p : out.coarse.params) amp.push_back(p.amplitude);

  const std::size_t k = static_cast<std::size_t>(std::max_element(amp.begin(), amp.end()) - amp.begin());
  int maxima = 0;
  for (std::size_t i = 0; i < amp.size(); ++i) {
    const bool left_ok = i == 0 || amp[i] > amp[i - 1];
    const bool right_ok = i + 1 == amp.size() || amp[i] > amp[i + 1];
    if (left_ok && right_ok) ++maxima;
  }
  out.multimodal = maxima > 1;
  out.amplitude_zero = amp.front();

  auto amplitude = [&](double e) {
    FieldParams field = field_template;
    field.pol = Polarization::from_ellipticity(e);
    return resonance_at(atom, field, doppler, settings, threads).amplitude;
  };

  double best_eps = eps[k], best_amp = amp[k];
  double lo = eps[k == 0 ? 0 : k - 1], hi = eps[std::min(k + 1, eps.size() - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = amplitude(x1), f2 = amplitude(x2);
  auto consider = [&](double e, double a) {
    if (a > best_amp) {
      best_amp = a;
      best_eps = e;
    }
  };
  consider(x1, f1);
  consider(x2, f2);
  while (hi - lo > tolerance) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = amplitude(x1);
      consider(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = amplitude(x2);
      consider(x2, f2);
    }
  }
  out.eps_max = best_eps;
  out.amplitude_max = best_amp;
  out.gain = out.amplitude_zero > 0 ? best_amp / out.amplitude_zero : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace hanle
