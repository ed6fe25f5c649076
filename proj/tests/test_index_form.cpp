#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blowuplab/index_form.hpp"
#include "gen.hpp"

using namespace blowuplab;

namespace {

FixedPointScenario frozen_axis(double t_end) {
  FixedPointScenario s;
  s.swirl.b0 = 1.0;
  s.pressure_rr = CoefficientProfile::constant(1.0);
  s.t_end = t_end;
  return s;
}

FixedPointScenario odd(double b3, CoefficientProfile prr, double a0, double t_end) {
  FixedPointScenario s;
  s.location = Location::Boundary;
  s.parity = Parity::OddSwirl;
  s.swirl.b3 = b3;
  s.pressure_rr = std::move(prr);
  s.a0 = a0;
  s.c0z = -s.fp0();
  s.t_end = t_end;
  return s;
}

void expect_matrix(const Mat3& a, const Mat3& b, double tol) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[i][j], b[i][j], tol) << i << "," << j;
}

// frozen flow, alpha = 1, w = 2: I = k^2 L + (L/2)(pi^2/L^2 - w^2) for the m=1 sine trial
double frozen_closed_form(double L) {
  const double k = 4.0 / M_PI;
  return k * k * L + 0.5 * L * (M_PI * M_PI / (L * L) - 4.0);
}

}  // namespace

TEST(Stretch, IdentityAtStart) {
  gen::Rng r(31);
  for (int i = 0; i < 20; ++i) {
    auto s = gen::scenario(r);
    s.pressure_zz = ZzFromConstraint{};
    s.c0z = s.location == Location::Axis ? -2 * s.fp0() : -s.fp0();
    const auto sol = run_model(s);
    const auto L = build_stretch(sol, s, 0.0);
    expect_matrix(L.entries, Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}, 1e-15);
  }
}

TEST(Stretch, BoundaryEvenExample) {
  SwirlConstants w;
  w.b2 = 1.0;
  const auto L = stretch_from(Location::Boundary, Parity::EvenSwirl, w, 1.0, 1.0, 2.0);
  expect_matrix(L.entries, Mat3{{{5, 2, 0}, {2, 1, 0}, {0, 0, 1}}}, 0.0);
  EXPECT_DOUBLE_EQ(L.det(), 1.0);
  EXPECT_TRUE(L.symmetric());
  EXPECT_TRUE(L.positive_definite());
}

TEST(Stretch, AxisConstraintExample) {
  const auto L = stretch_from(Location::Axis, Parity::EvenSwirl, {}, 0.5, 4.0, 1.0);
  expect_matrix(L.entries, Mat3{{{0.25, 0, 0}, {0, 0.25, 0}, {0, 0, 16}}}, 0.0);
  EXPECT_DOUBLE_EQ(L.det(), 1.0);
}

TEST(Stretch, BoundaryOddEntries) {
  SwirlConstants w;
  w.b3 = 1.0;
  const auto L = stretch_from(Location::Boundary, Parity::OddSwirl, w, 1.0, 1.0, 2.0);
  expect_matrix(L.entries, Mat3{{{1, 0, 0}, {0, 1, 2}, {0, 2, 5}}}, 0.0);
  EXPECT_NEAR(alignment_integrand(L, AlignmentAxis::Z), 5.0 / 6.0, 1e-15);
}

TEST(Stretch, DeterminantNearBlowup) {
  SwirlConstants w;
  w.b2 = 1.0;
  const auto L = stretch_from(Location::Boundary, Parity::EvenSwirl, w, 1e-6, 1e6, 2.0);
  EXPECT_NEAR(L.det(), 1.0, 1e-12);
  EXPECT_NEAR(StretchMatrix::det3(L.factor), 1.0, 1e-12);
}

TEST(Stretch, FactorReproducesEntries) {
  gen::Rng r(32);
  for (int i = 0; i < 200; ++i) {
    SwirlConstants w;
    w.b2 = r.uniform(-3, 3);
    w.b3 = r.uniform(-3, 3);
    const auto loc = r.coin() ? Location::Axis : Location::Boundary;
    const auto par = r.coin() ? Parity::EvenSwirl : Parity::OddSwirl;
    const auto L = stretch_from(loc, par, w, r.uniform(0.1, 2), r.uniform(0.1, 2), r.uniform(0, 5));
    const Vec3 v{r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1)};
    EXPECT_NEAR(L.quadratic(v), L.factored_quadratic(v), 1e-12 * (1 + L.quadratic(v)));
  }
}

TEST(Property, DeterminantIsOne) {
  gen::Rng r(33);
  for (int i = 0; i < 60; ++i) {
    auto s = gen::scenario(r);
    s.pressure_zz = ZzFromConstraint{};
    s.c0z = s.location == Location::Axis ? -2 * s.fp0() : -s.fp0();
    if (!s.pressure_rr.is<CoefficientProfile::PoleScaled>()) s.t_end = 2.0;
    s.tolerances.f_stop = 1e-2;
    const auto sol = run_model(s);
    for (double t : sol.grid) {
      const auto L = build_stretch(sol, s, t);
      ASSERT_LE(std::abs(L.det() - 1.0), 1e-8) << "case " << i << " t " << t;
      ASSERT_TRUE(L.symmetric());
    }
  }
}

TEST(Index, FrozenFlowShortIntervalPositive) {
  const auto s = frozen_axis(8);
  const auto sol = run_axis_even(s);
  const double L = M_PI / 2;
  const auto v = axis_sine_trial(sol, s, 1.0, 1.0 + L, 1, 400);
  const auto r = index_form(v, sol, s, std::make_pair(1.0, 1.0 + L));
  EXPECT_GT(r.value, 0.0);
  EXPECT_NEAR(r.value, frozen_closed_form(L), 1e-7);
  EXPECT_TRUE(r.decomposition_valid);
}

TEST(Index, FrozenFlowLongIntervalNegative) {
  const auto s = frozen_axis(8);
  const auto sol = run_axis_even(s);
  const double L = 2 * M_PI;
  const auto r = index_form(axis_sine_trial(sol, s, 0.5, 0.5 + L, 1, 400), sol, s);
  EXPECT_LT(r.value, 0.0);
  EXPECT_NEAR(r.value, frozen_closed_form(L), 1e-7);
}

TEST(Index, FlipAtRescaledPi) {
  const auto s = frozen_axis(8);
  const auto sol = run_axis_even(s);
  // mean-zero (m = 2) trial: I = (L/2)((2 pi / L)^2 - 4), sign change at L = pi / b0
  for (double frac : {0.9, 1.1}) {
    const double L = frac * M_PI;
    const double I = index_form(axis_sine_trial(sol, s, 0.0, L, 2, 400), sol, s).value;
    EXPECT_NEAR(I, 0.5 * L * (4 * M_PI * M_PI / (L * L) - 4.0), 1e-7);
    EXPECT_EQ(I > 0, frac < 1.0);
  }
}

TEST(Index, ZeroFieldZero) {
  const auto s = frozen_axis(2);
  const auto sol = run_axis_even(s);
  EXPECT_EQ(index_form(VariationField::zero(0.0, 2.0), sol, s).value, 0.0);
}

TEST(Index, EndpointNonzeroRejected) {
  const auto s = frozen_axis(2);
  const auto sol = run_axis_even(s);
  auto v = VariationField::from_function(
      0.0, 1.0, [](double t) { return std::array<double, 6>{t, 0, 0, 1, 0, 0}; }, 100);
  try {
    index_form(v, sol, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EndpointNonzero);
  }
}

TEST(Index, OutsideWindowRejected) {
  const auto s = frozen_axis(1);
  const auto sol = run_axis_even(s);
  std::mt19937_64 rng(1);
  EXPECT_THROW(index_form(random_trial_field(rng, 0.5, 1.5), sol, s), Error);
}

TEST(Property, ScalingIsQuadratic) {
  gen::Rng r(34);
  const auto s = odd(1.5, CoefficientProfile::constant(-0.5), 0.0, 4);
  const auto sol = run_model(s);
  for (int i = 0; i < 50; ++i) {
    const auto v = random_trial_field(r.engine(), 0.2, 3.5);
    const double c = r.uniform(-3, 3);
    const double I = index_form(v, sol, s).value;
    EXPECT_NEAR(index_form(v.scaled(c), sol, s).value, c * c * I, 1e-10 * (1 + c * c * std::abs(I)));
  }
}

TEST(Property, CompletedSquareEquivalence) {
  gen::Rng r(35);
  for (int i = 0; i < 20; ++i) {
    FixedPointScenario s;
    s.swirl.b0 = r.uniform(0.5, 1.5) * (r.coin() ? 1 : -1);
    s.pressure_rr = gen::piecewise(r, 3, 0.0, 2.0);
    s.a0 = r.uniform(-0.3, 0.3);
    s.c0z = 2 * s.a0;
    s.t_end = 3;
    const auto sol = run_axis_even(s);
    const double t1 = r.uniform(0, 1), t2 = r.uniform(t1 + 0.5, sol.t_last());
    const auto v = axis_sine_trial(sol, s, t1, t2, r.integer(1, 4), 800);
    EXPECT_NEAR(index_form(v, sol, s).value, axis_reduced_index(sol, s, v), 1e-7) << "case " << i;
  }
}

TEST(Property, OddSwirlPositivity) {
  gen::Rng r(36);
  int fields = 0;
  for (int sc = 0; sc < 20; ++sc) {
    const auto s = odd(r.uniform(-2, 2), gen::piecewise(r, 3, -1, 1), r.uniform(-0.5, 0.5), 3);
    const auto sol = run_model(s);
    for (int i = 0; i < 50; ++i, ++fields) {
      const double t1 = r.uniform(0, 1), t2 = r.uniform(t1 + 0.2, sol.t_last());
      const auto v = random_trial_field(r.engine(), t1, t2, r.integer(1, 6), 300);
      ASSERT_GE(index_form(v, sol, s).value, -1e-9) << "scenario " << sc << " field " << i;
    }
  }
  EXPECT_EQ(fields, 1000);
}

TEST(Conjugate, AxisFrozenFlowFindsIntervals) {
  const auto s = frozen_axis(12);
  const auto sol = run_axis_even(s);
  const auto rep = find_conjugate(sol, s);
  ASSERT_FALSE(rep.none_found);
  for (const auto& iv : rep.intervals) {
    EXPECT_LT(iv.value, 0.0);
    // rescaled length exceeds pi / b0 for every certified interval
    EXPECT_GT(iv.t2 - iv.t1, M_PI);
  }
  EXPECT_EQ(rep.gap_sum, curvature_gap_sum(rep.times()));
}

TEST(Conjugate, AxisWithoutRotationNone) {
  FixedPointScenario s;
  s.pressure_rr = CoefficientProfile::constant(0.0);
  s.t_end = 6;
  const auto sol = run_axis_even(s);
  EXPECT_TRUE(find_conjugate(sol, s).none_found);
}

TEST(Conjugate, BoundaryLogOscillator) {
  FixedPointScenario s;
  s.location = Location::Boundary;
  s.swirl.b1 = 1;
  s.swirl.b2 = 1;
  s.a0 = 2.5;
  s.c0z = -s.fp0();
  s.pressure_rr = CoefficientProfile::constant(0.0);
  s.t_end = 3;
  s.tolerances.f_stop = 1e-12;
  const auto sol = run_boundary_even(s);
  ConjugateSearchParams p;
  p.family = TrialFamily::LogOscillator;
  const auto rep = find_conjugate(sol, s, p);
  ASSERT_GE(rep.intervals.size(), 3u);
  for (std::size_t i = 1; i < rep.intervals.size(); ++i)
    EXPECT_LE(rep.intervals[i - 1].t2, rep.intervals[i].t1);
  for (const auto& iv : rep.intervals) EXPECT_LT(iv.value, 0.0);
  EXPECT_EQ(rep.gap_sum, curvature_gap_sum(rep.times()));
  EXPECT_THROW(find_conjugate(sol, s, {}), Error);
}

TEST(Conjugate, BoundaryOddNoneFound) {
  const auto s = odd(1.5, CoefficientProfile::constant(-0.5), 0.0, 4);
  const auto sol = run_model(s);
  const auto rep = find_conjugate(sol, s);
  EXPECT_TRUE(rep.none_found);
  EXPECT_EQ(rep.gap_sum, 0.0);
  EXPECT_GT(rep.diagnostics["min_value"].get<double>(), 0.0);
}

TEST(Property, DetectionMonotoneInWindow) {
  for (double b0 : {0.7, 1.0, 1.3}) {
    FixedPointScenario s = frozen_axis(6);
    s.swirl.b0 = b0;
    s.pressure_rr = CoefficientProfile::constant(b0 * b0);
    const auto short_rep = find_conjugate(run_axis_even(s), s);
    s.t_end = 10;
    const auto long_rep = find_conjugate(run_axis_even(s), s);
    ASSERT_FALSE(short_rep.none_found);
    ASSERT_GE(long_rep.intervals.size(), short_rep.intervals.size());
    for (std::size_t i = 0; i < short_rep.intervals.size(); ++i) {
      EXPECT_NEAR(long_rep.intervals[i].t1, short_rep.intervals[i].t1, 1e-9);
      EXPECT_NEAR(long_rep.intervals[i].t2, short_rep.intervals[i].t2, 1e-9);
    }
  }
}

TEST(GapSum, Examples) {
  EXPECT_EQ(curvature_gap_sum({0.5, 0.75, 0.875}), 24.0);
  EXPECT_EQ(curvature_gap_sum({0.3}), 0.0);
  EXPECT_EQ(curvature_gap_sum({}), 0.0);
  std::vector<double> t;
  for (int n = 1; n <= 10; ++n) t.push_back(1.0 - std::ldexp(1.0, -n));
  EXPECT_EQ(curvature_gap_sum(t), 4088.0);
  try {
    curvature_gap_sum({0.5, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotoneTimes);
  }
}

TEST(Laplacian, StillFlow) {
  const auto sol = run_model(odd(1, CoefficientProfile::constant(0.0), 0.0, 1));
  const auto d = laplacian_identity_odd(sol);
  for (double x : d.delta_p) EXPECT_EQ(x, 0.0);
  for (double x : d.xi) EXPECT_EQ(x, 0.0);
  EXPECT_TRUE(d.poincare_ok);
}

TEST(Laplacian, Exponential) {
  // f'' = f, f'(0) = 1: f = e^t
  const auto d = laplacian_identity_odd(run_model(odd(1, CoefficientProfile::constant(-1.0), -1.0, 1)));
  for (double x : d.delta_p) EXPECT_NEAR(x, -2.0, 1e-9);
  EXPECT_NEAR(d.integral, -2.0, 1e-8);
  EXPECT_NEAR(d.sup_xi2, 1.0, 1e-9);
  EXPECT_TRUE(d.poincare_ok);
}

TEST(Laplacian, Linear) {
  const auto d = laplacian_identity_odd(run_model(odd(1, CoefficientProfile::constant(0.0), -1.0, 1)));
  EXPECT_NEAR(d.integral, -1.0, 1e-8);
  EXPECT_NEAR(d.xi.back(), std::log(2.0), 1e-10);
  EXPECT_TRUE(d.poincare_ok);
}

TEST(Laplacian, NonpositiveRejected) {
  auto sol = run_model(odd(1, CoefficientProfile::constant(0.0), 0.0, 1));
  sol.f.back() = -0.1;
  try {
    laplacian_identity_odd(sol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonpositiveF);
  }
}

TEST(Fredholm, IdentityStretch) {
  const auto s = frozen_axis(2);
  const auto r = fredholm_diagnostics(run_axis_even(s), s);
  for (double y : r.integrand) EXPECT_NEAR(y, 0.5, 1e-12);
  EXPECT_NEAR(r.integral, 1.0, 1e-10);
  EXPECT_NEAR(r.ratio, 1.0, 1e-12);
}

TEST(Fredholm, AxisInverseSqrt) {
  SwirlConstants w;
  w.b0 = 1.0;
  const auto sol = manufactured_solution(
      Location::Axis, Parity::EvenSwirl, w, [](double t) { return 1.0 / std::sqrt(1.0 + t); },
      [](double t) { return -0.5 * std::pow(1.0 + t, -1.5); }, 0.0, 1.0);
  FixedPointScenario s;
  s.swirl = w;
  const auto r = fredholm_diagnostics(sol, s);
  EXPECT_NEAR(r.integral, 0.75, 1e-10);
  EXPECT_TRUE(r.integrand_increasing);
}

TEST(Fredholm, ZeroVorticity) {
  FixedPointScenario s;
  s.pressure_rr = CoefficientProfile::constant(0.0);
  s.t_end = 1;
  try {
    fredholm_diagnostics(run_axis_even(s), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVorticity);
  }
}
