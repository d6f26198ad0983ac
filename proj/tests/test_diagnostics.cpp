#include "scg/diagnostics.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "gtest/gtest.h"
#include "scg/runner.hpp"

namespace scg {
namespace {

BoundConstants ones() {
  return BoundConstants{.D = 1, .sumB = 1, .Mtilde2 = 1, .Mhat2 = 1,
                        .Btilde = 1, .btilde = 1, .gammatilde = 1,
                        .zetatilde = 1};
}

TrialSpec small_logistic(Regime regime, std::uint64_t iters) {
  TrialSpec t;
  t.problem = make_problem({.kind = ProblemKind::Logistic, .dim = 5,
                            .samples = 200});
  t.batch_size = 10;
  ScheduleParams sp;
  sp.regime = regime;
  sp.alpha0 = regime == Regime::Diminishing ? 1.0 : 1e-2;
  sp.delta0 = regime == Regime::Diminishing ? 0.5 : 1e-3;
  t.schedule = HyperSchedule(sp);
  t.iterations = iters;
  t.x_ref = t.problem->optimum()->x;
  return t;
}

TEST(PerfMeasure, Examples) {
  EXPECT_EQ(perf_measure(Vector{1, 2}, Vector{1, 2}, Vector{3, 4}), 0.0);
  EXPECT_EQ(perf_measure(Vector{2}, Vector{0}, Vector{2}), 4.0);
  // f = x^2/2: f(2) - f(0) = 2 <= V
  EXPECT_LE(2.0, perf_measure(Vector{2}, Vector{0}, Vector{2}));
}

TEST(Regret, SingleStep) {
  Trace t;
  t.rows.push_back(TraceRow{.n = 1, .cum_sampled_loss = 1.5});
  EXPECT_EQ(regret_avg(t, 1.0, 1), 0.5);
}

TEST(Regret, PinnedAtOptimumIsZero) {
  Trace t;
  for (std::uint64_t n = 1; n <= 5; ++n)
    t.rows.push_back(TraceRow{.n = n, .cum_sampled_loss = 0.25 * n});
  EXPECT_EQ(regret_avg(t, 0.25, 5), 0.0);
}

TEST(Regret, Errors) {
  Trace t;
  t.rows.push_back(TraceRow{.n = 1});
  EXPECT_THROW(regret_avg(t, std::nullopt, 1), MetricError);
  EXPECT_THROW(regret_avg(t, 0.0, 2), MetricError);
}

TEST(Theorem1, FormulaExample) {
  EXPECT_DOUBLE_EQ(theorem1_rhs(ones(), 0.1, 0.0, 0.0, 10, 1), 0.55);
}

TEST(Theorem1, LargeNLimit) {
  BoundConstants c = ones();
  c.Btilde = 2.0;
  c.btilde = 0.1;
  c.zetatilde = 0.1;
  const double limit = 4.0 * 1.0 * 0.01 / (2.0 * 0.1 * 0.01);
  EXPECT_NEAR(theorem1_rhs(c, 0.01, 0.0, 0.0, 1'000'000'000'000ULL, 3), limit,
              1e-6);
}

TEST(Theorem2, FormulaExample) {
  EXPECT_DOUBLE_EQ(theorem2_rhs(ones(), 0.5, 0.0, 0.0, 4, 7), 0.75);
}

TEST(Theorem2, EtaOutOfRangeThrows) {
  EXPECT_THROW(theorem2_rhs(ones(), 1.0, 0, 0, 4, 1), ConfigError);
  EXPECT_THROW(theorem2_rhs(ones(), 0.0, 0, 0, 4, 1), ConfigError);
}

// Second transcription of both bounds, term by term.
double t1_alt(const BoundConstants& c, double a, double b, double dl, double n,
              double d) {
  const double first = (c.D / (2.0 * a * n)) * (c.sumB / c.btilde);
  const double second =
      std::pow(c.Btilde * std::sqrt(c.Mtilde2) / c.zetatilde, 2) * a /
      (2.0 * c.btilde);
  const double third = std::sqrt(c.Mtilde2 * c.D * d) * b / c.btilde;
  const double fourth = 4.0 * dl * std::sqrt(c.Mhat2 * c.D * d) / c.gammatilde;
  return first + second + third + fourth;
}

double t2_alt(const BoundConstants& c, double eta, double b, double dl,
              double n, double d) {
  const double first = c.D * c.sumB * std::pow(n, eta - 1.0) / (2.0 * c.btilde);
  const double second =
      std::pow(c.Btilde * std::sqrt(c.Mtilde2) / c.zetatilde, 2) /
      (2.0 * c.btilde * (1.0 - eta)) * std::pow(n, -eta);
  const double third =
      b / (1.0 - b) * std::sqrt(c.Mtilde2 * c.D * d) / (c.btilde * n);
  const double fourth =
      4.0 * dl / (1.0 - dl) * std::sqrt(c.Mhat2 * c.D * d) / n;
  return first + second + third + fourth;
}

TEST(Bounds, SeededConstantsAgreeWithSecondTranscription) {
  const TrialSpec t = small_logistic(Regime::Constant, 1000);
  const auto traces = run_trials(t, 3, 42, 1);
  const BoundConstants c = estimate_constants(traces, t.schedule.params(),
                                              t.problem->grad_bound());
  const HyperAt h = t.schedule.eval(0);
  EXPECT_NEAR(theorem1_rhs(c, h.alpha, h.beta, h.delta, 1000, 5),
              t1_alt(c, h.alpha, h.beta, h.delta, 1000, 5),
              1e-12 * t1_alt(c, h.alpha, h.beta, h.delta, 1000, 5));
  EXPECT_NEAR(theorem2_rhs(c, 0.5, 0.9, 0.5, 10000, 5),
              t2_alt(c, 0.5, 0.9, 0.5, 10000, 5),
              1e-12 * t2_alt(c, 0.5, 0.9, 0.5, 10000, 5));
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<std::pair<double, double>> s;
  for (int n = 1; n <= 100; ++n) s.emplace_back(n, 1.0 / std::sqrt(n));
  EXPECT_NEAR(fit_rate(s, 1, 100), -0.5, 1e-10);
}

TEST(FitRate, ConstantSeries) {
  std::vector<std::pair<double, double>> s;
  for (int n = 1; n <= 20; ++n) s.emplace_back(n, 3.0);
  EXPECT_NEAR(fit_rate(s, 1, 20), 0.0, 1e-12);
}

TEST(FitRate, Errors) {
  std::vector<std::pair<double, double>> s;
  for (int n = 1; n <= 20; ++n) s.emplace_back(n, n == 7 ? -1.0 : 1.0);
  EXPECT_THROW(fit_rate(s, 1, 20), MetricError);
  EXPECT_NO_THROW(fit_rate(s, 8, 20));
  EXPECT_THROW(fit_rate(s, 15, 20), MetricError);
}

TEST(EstimateConstants, IdentitySingleStep) {
  Trace t;
  t.rows.push_back(TraceRow{.n = 1, .h_max = 1, .h_min = 1, .h_sum = 4});
  const BoundConstants c = estimate_constants(std::span(&t, 1),
                                              ScheduleParams{}, std::nullopt);
  EXPECT_EQ(c.Btilde, 1.0);
  EXPECT_EQ(c.sumB, 4.0);
  EXPECT_EQ(c.D, 0.0);
}

TEST(EstimateConstants, AnalyticBoundGivesMSquared) {
  const TrialSpec t = small_logistic(Regime::Constant, 50);
  const auto traces = run_trials(t, 2, 1, 1);
  const double m = *t.problem->grad_bound();
  const BoundConstants c = estimate_constants(traces, t.schedule.params(), m);
  EXPECT_EQ(c.Mtilde2, m * m);
  EXPECT_EQ(c.Mhat2, m * m);
  EXPECT_DOUBLE_EQ(c.btilde, 0.1);
  EXPECT_DOUBLE_EQ(c.gammatilde, 1.1);
  EXPECT_DOUBLE_EQ(c.zetatilde, 0.1);
  EXPECT_GT(c.D, 0.0);
  EXPECT_LE(c.Btilde, 1.0 / std::sqrt(1e-8));
}

TEST(EstimateConstants, EmptyThrows) {
  EXPECT_THROW(estimate_constants({}, ScheduleParams{}, std::nullopt),
               MetricError);
}

TEST(EstimateConstants, BitwiseReproducible) {
  const TrialSpec t = small_logistic(Regime::Diminishing, 300);
  const auto a = run_trials(t, 3, 5, 1);
  const auto b = run_trials(t, 3, 5, 3);
  const BoundConstants ca = estimate_constants(a, t.schedule.params(), {});
  const BoundConstants cb = estimate_constants(b, t.schedule.params(), {});
  EXPECT_EQ(std::memcmp(&ca, &cb, sizeof ca), 0);
}

// Replays the run, recomputing V_k and the averages without any running sums.
TEST(Trace, RunningAveragesMatchRecomputation) {
  const TrialSpec t = small_logistic(Regime::Constant, 400);
  const Trace tr = run_trial(t, 9);
  ASSERT_EQ(tr.rows.size(), 400u);

  MinibatchOracle o(t.problem, t.batch_size, t.sampling, 9);
  ScgState s = ScgState::initial(t.problem->initial_point());
  std::vector<double> vs;
  std::vector<Vector> xs;
  for (std::uint64_t n = 0; n < 400; ++n) {
    step_inplace(s, o.sample_gradient(s.x), t.schedule.eval(n),
                 t.schedule.zeta(), t.precond);
    vs.push_back(perf_measure(s.x, t.x_ref, full_gradient(*t.problem, s.x)));
    xs.push_back(s.x);
  }
  for (std::size_t k : {0u, 9u, 99u, 399u}) {
    double sum = 0.0;
    for (std::size_t j = k + 1; j-- > 0;) sum += vs[j];
    const double avg = sum / static_cast<double>(k + 1);
    EXPECT_NEAR(tr.rows[k].avg_V, avg, 1e-12 * std::abs(avg)) << k;

    Vector xa(5);
    for (std::size_t j = 0; j <= k; ++j)
      for (std::size_t i = 0; i < 5; ++i) xa[i] += xs[j][i];
    for (auto& v : xa) v /= static_cast<double>(k + 1);
    const double fa = full_loss(*t.problem, xa);
    EXPECT_NEAR(tr.rows[k].f_avg_iterate, fa, 1e-12 * std::abs(fa)) << k;
  }
  EXPECT_EQ(tr.final_x, s.x);
}

TEST(TrialMean, AveragesRowwise) {
  Trace a, b;
  a.rows.push_back(TraceRow{.n = 1, .f = 1.0, .m_sq = 2.0});
  b.rows.push_back(TraceRow{.n = 1, .f = 3.0, .m_sq = 4.0});
  const std::vector<Trace> ts{a, b};
  const auto m = trial_mean(ts);
  EXPECT_EQ(m[0].f, 2.0);
  EXPECT_EQ(m[0].m_sq, 3.0);
  b.rows[0].n = 2;
  EXPECT_THROW(trial_mean(std::vector<Trace>{a, b}), MetricError);
}

TEST(LoggedSteps, DenseThenGeometric) {
  const auto s = logged_steps(100000);
  EXPECT_EQ(s[999], 1000u);
  EXPECT_EQ(s.back(), 100000u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_LT(s.size(), 1200u);
  EXPECT_EQ(logged_steps(5).size(), 5u);
}

}  // namespace
}  // namespace scg
