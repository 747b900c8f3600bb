#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <hanle/resonance.hpp>

using namespace hanle;

namespace {

ResonanceCurve synthetic(double a, double w, double c0, double c1, double c2, double range, int n) {
  ResonanceCurve c;
  c.omega_g = linspace(-range, range, n);
  for (double x : c.omega_g) c.signal.push_back(c0 + c1 * x + c2 * x * x + a / (1 + 4 * x * x / (w * w)));
  return c;
}

FieldParams light(double rabi, double eps) { return {rabi, Polarization::from_ellipticity(eps), 0.0}; }

}  // namespace

TEST(Extraction, PureLorentzianPeak) {
  const auto p = extract_central_structure(synthetic(1.0, 0.1, 0.3, 0, 0, 1.0, 2001));
  EXPECT_EQ(p.sign, ResonanceSign::eia);
  EXPECT_NEAR(p.amplitude, 1.0, 0.01);
  EXPECT_NEAR(p.width, 0.1, 0.001);
  EXPECT_DOUBLE_EQ(p.ratio, p.amplitude / p.width);
  EXPECT_EQ(p.background, "quadratic");
}

TEST(Extraction, LorentzianDipIsEit) {
  const auto p = extract_central_structure(synthetic(-0.4, 0.2, 1.0, 0, 0, 2.0, 2001));
  EXPECT_EQ(p.sign, ResonanceSign::eit);
  EXPECT_NEAR(p.amplitude, 0.4, 0.004);
  EXPECT_NEAR(p.width, 0.2, 0.002);
}

TEST(Extraction, RoundTripAcrossDecades) {
  for (double a : {1e-2, 1e-1, 1.0, 1e1, 1e2})
    for (double w : {1e-2, 1e-1, 1.0})
      for (double sign : {1.0, -1.0}) {
        // background with slope and curvature comparable to the structure's scale
        const double c1 = 0.05 * a / w, c2 = 0.02 * a / (w * w);
        const auto curve = synthetic(sign * a, w, 2.0 * a, c1, c2, 12 * w, 1201);
        const auto p = extract_central_structure(curve);
        EXPECT_NEAR(p.amplitude / a, 1.0, 0.02) << "a=" << a << " w=" << w;
        EXPECT_NEAR(p.width / w, 1.0, 0.02) << "a=" << a << " w=" << w;
        EXPECT_EQ(p.sign, sign > 0 ? ResonanceSign::eia : ResonanceSign::eit);
      }
}

TEST(Extraction, PeakInsideWiderDipUsesPedestal) {
  ResonanceCurve c;
  c.omega_g = linspace(-3, 3, 3001);
  for (double x : c.omega_g) c.signal.push_back(1.0 - 0.5 / (1 + 4 * x * x) + 0.02 / (1 + 4 * x * x / 0.0025));
  const auto p = extract_central_structure(c);
  EXPECT_EQ(p.sign, ResonanceSign::eia);
  EXPECT_EQ(p.background, "pedestal");
  EXPECT_GT(p.width, 0.03);
  EXPECT_LT(p.width, 0.08);
}

TEST(Extraction, FlatCurveIsAnError) {
  ResonanceCurve c;
  c.omega_g = linspace(-1, 1, 101);
  c.signal.assign(101, 0.5);
  EXPECT_THROW(extract_central_structure(c), ExtractionError);
}

TEST(Extraction, TooFewPointsIsAnError) {
  ResonanceCurve c = synthetic(1, 0.1, 0, 0, 0, 1, 5);
  EXPECT_THROW(extract_central_structure(c), ExtractionError);
}

TEST(Extraction, TinyStructureBelowNoiseFloor) {
  EXPECT_THROW(extract_central_structure(synthetic(1e-14, 0.1, 0.3, 0, 0, 1.0, 2001)), ExtractionError);
}

TEST(Grids, LinspaceIsMirrorSymmetric) {
  const auto g = linspace(-5, 5, 101);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], -g[g.size() - 1 - i]);
  EXPECT_EQ(g[50], 0.0);
  const auto h = symmetric_geomspace(1e-3, 5, 40);
  ASSERT_EQ(h.size(), 81u);
  EXPECT_EQ(h[40], 0.0);
  EXPECT_EQ(h.back(), 5.0);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i - 1], h[i]);
}

TEST(Scan, ValidatesGrid) {
  const AtomSpec atom;
  EXPECT_THROW(scan_magnetic(atom, light(1, 0), DopplerSpec{}, {}), std::domain_error);
  EXPECT_THROW(scan_magnetic(atom, light(1, 0), DopplerSpec{}, {0.0, 0.0}), std::domain_error);
}

TEST(Scan, ZeroLightGivesFlatZeroCurve) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 16;
  const auto c = scan_magnetic(atom, light(0, 0.2), d, linspace(-1, 1, 11));
  for (double s : c.signal) EXPECT_LT(std::abs(s), 1e-12);
}

TEST(Scan, CurveIsEvenInFieldForAllEllipticities) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 64;
  for (double eps : {0.0, 0.3}) {
    const auto c = scan_magnetic(atom, light(5, eps), d, linspace(-2, 2, 21), 2);
    for (std::size_t i = 0; i < c.signal.size(); ++i)
      EXPECT_NEAR(c.signal[i], c.signal[c.signal.size() - 1 - i], 1e-9 * c.signal[i]);
  }
}

TEST(Scan, MirrorSymmetryInEllipticityAndField) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 32;
  for (double eps : {0.1, 0.5}) {
    const CurveEvaluator plus(atom, light(5, eps), d), minus(atom, light(5, -eps), d);
    for (double og : {-1.0, 0.02, 0.7}) EXPECT_NEAR(plus(og), minus(-og), 1e-9 * plus(og));
  }
}

TEST(Scan, ThreadCountDoesNotChangeBits) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 32;
  const auto grid = linspace(-1, 1, 23);
  const auto a = scan_magnetic(atom, light(5, 0.2), d, grid, 1);
  const auto b = scan_magnetic(atom, light(5, 0.2), d, grid, 4);
  EXPECT_EQ(a.signal, b.signal);
}

TEST(CentralStructure, NarrowEiaAtLinearPolarization) {
  const AtomSpec atom;
  const auto scan = scan_central_structure(atom, light(5, 0), DopplerSpec{});
  ASSERT_TRUE(scan.params.found()) << scan.params.note;
  EXPECT_EQ(scan.params.sign, ResonanceSign::eia);
  EXPECT_GT(scan.params.width, 0.02);
  EXPECT_LT(scan.params.width, 0.2);
}

TEST(CentralStructure, WiderAndStrongerAtEllipticPolarization) {
  const AtomSpec atom;
  const auto lin = scan_central_structure(atom, light(5, 0), DopplerSpec{}).params;
  const auto ell = scan_central_structure(atom, light(5, std::numbers::pi / 9), DopplerSpec{}).params;
  ASSERT_TRUE(ell.found()) << ell.note;
  EXPECT_EQ(ell.sign, ResonanceSign::eia);
  EXPECT_GT(ell.width, lin.width);
  EXPECT_GT(ell.amplitude, 10 * lin.amplitude);
}

TEST(CentralStructure, StableUnderGridRefinement) {
  const AtomSpec atom;
  ScanSettings coarse;
  ScanSettings fine = coarse;
  fine.fine_points = 2 * coarse.fine_points - 1;
  for (double eps : {0.0, std::numbers::pi / 9}) {
    const auto a = scan_central_structure(atom, light(5, eps), DopplerSpec{}, coarse).params;
    const auto b = scan_central_structure(atom, light(5, eps), DopplerSpec{}, fine).params;
    EXPECT_NEAR(a.amplitude / b.amplitude, 1.0, 0.01) << eps;
    EXPECT_NEAR(a.width / b.width, 1.0, 0.01) << eps;
  }
}

TEST(CentralStructure, StableUnderDopplerNodeDoubling) {
  const AtomSpec atom;
  DopplerSpec a;
  DopplerSpec b = a;
  b.nodes = 2 * a.nodes;
  const auto pa = scan_central_structure(atom, light(5, 0.25), a).params;
  const auto pb = scan_central_structure(atom, light(5, 0.25), b).params;
  EXPECT_NEAR(pa.amplitude / pb.amplitude, 1.0, 1e-3);
}

TEST(Sweep, SymmetricInEllipticity) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 48;
  const auto s = sweep_ellipticity(atom, light(5, 0), d, {-0.3, -0.1, 0.1, 0.3}, {}, 2);
  ASSERT_EQ(s.params.size(), 4u);
  EXPECT_NEAR(s.params[0].amplitude, s.params[3].amplitude, 1e-9 * s.params[3].amplitude);
  EXPECT_NEAR(s.params[1].amplitude, s.params[2].amplitude, 1e-9 * s.params[2].amplitude);
}

TEST(Sweep, EmptyGridIsAnError) {
  EXPECT_THROW(sweep_ellipticity(AtomSpec{}, light(5, 0), DopplerSpec{}, {}), std::domain_error);
}

TEST(Sweep, ImmovableAtomsPeakAtLinearPolarization) {
  const AtomSpec atom;
  DopplerSpec d;
  d.width = 0;
  const auto s = sweep_ellipticity(atom, light(5, 0), d, linspace(0, std::numbers::pi / 4, 13));
  EXPECT_EQ(s.eps_max, 0.0);
}

TEST(EpsMax, ImmovableAtomsGiveZero) {
  const AtomSpec atom;
  DopplerSpec d;
  d.width = 0;
  const auto r = find_eps_max(atom, light(5, 0), d);
  EXPECT_LT(r.eps_max, 1e-3);
}

TEST(EpsMax, EnhancementShrinksInWeakLight) {
  const AtomSpec atom;
  DopplerSpec d;
  d.nodes = 64;
  const auto eps_grid = linspace(0, std::numbers::pi / 4, 7);
  auto gain = [&](double rabi) {
    const auto s = sweep_ellipticity(atom, light(rabi, 0), d, eps_grid, {}, 1);
    double best = 0;
    for (const auto& p : s.params) best = std::max(best, p.amplitude);
    return best / s.params.front().amplitude;
  };
  EXPECT_LT(gain(0.5), gain(5.0));
}
