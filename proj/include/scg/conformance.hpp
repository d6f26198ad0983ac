#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "scg/diagnostics.hpp"
#include "scg/problems.hpp"
#include "scg/runner.hpp"

namespace scg {

/// Outcome of one property check. `worst_violation` is the largest signed
/// excess (lhs - rhs, or the check's own error measure); the check passes iff
/// it is at most `tolerance`.
struct CheckReport {
  std::string name;
  bool pass = false;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::uint64_t worst_step = 0;
  std::size_t trials = 0;
  double tolerance = 0.0;
  std::string note;

  void observe(double violation, std::uint64_t step) {
    if (violation > worst_violation) {
      worst_violation = violation;
      worst_step = step;
    }
  }
  CheckReport& finish() {
    pass = worst_violation <= tolerance;
    return *this;
  }
};

/// Trial-mean ||m_n||^2 <= Mtilde2 at every logged step.
inline CheckReport check_lemma2(std::span<const Trace> traces,
                                double mtilde2) {
  CheckReport r{.name = "lemma2", .trials = traces.size(), .tolerance = 0.0};
  for (const auto& row : trial_mean(traces))
    r.observe(row.m_sq - mtilde2, row.n);
  return r.finish();
}

/// Trial-mean ||G_n||^2 <= 16 Mhat2 at every logged step. The underlying
/// argument assumes gamma_n <= 1 and delta_n <= 1/2; a larger gamma is
/// flagged in the note rather than rejected.
inline CheckReport check_lemma3(std::span<const Trace> traces, double mhat2,
                                const HyperSchedule& schedule) {
  CheckReport r{.name = "lemma3", .trials = traces.size(), .tolerance = 0.0};
  if (schedule.params().gamma0 > 1.0)
    r.note = "warning: gamma_n > 1 lies outside the moment bound's hypotheses";
  for (const auto& row : trial_mean(traces))
    r.observe(row.G_sq - 16.0 * mhat2, row.n);
  return r.finish();
}

/// h_{n+1,i} >= h_{n,i} for every recorded step, exactly. Violation is the
/// largest single-coordinate decrease.
inline CheckReport check_A4(const Trace& trace) {
  if (trace.h_history.empty())
    throw MetricError("check_A4 needs a trace recorded with record_diag");
  CheckReport r{.name = "a4", .trials = 1, .tolerance = 0.0};
  r.observe(0.0, 0);
  for (std::size_t n = 1; n < trace.h_history.size(); ++n) {
    const Vector& prev = trace.h_history[n - 1];
    const Vector& cur = trace.h_history[n];
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] < prev[i]) r.observe(prev[i] - cur[i], n + 1);
    }
  }
  // any strict decrease fails, however small
  r.pass = r.worst_violation <= 0.0;
  return r;
}

namespace reference {

/// Straight-line adaptive method: the stochastic gradient (or, with
/// cg_delta, the conjugate direction g - delta_n G_{n-1}) goes directly into
/// the momentum. Written independently of scg::step so that the reduction
/// checks compare two separate code paths.
inline std::vector<Vector> trajectory(const TrialSpec& spec,
                                      std::uint64_t seed,
                                      std::uint64_t steps, bool cg_direction) {
  const FiniteSumProblem& p = *spec.problem;
  const std::size_t d = p.dim();
  MinibatchOracle oracle(spec.problem, spec.batch_size, spec.sampling, seed);
  Vector x = p.initial_point();
  Vector m(d), v(d), vhat(d), dir_prev(d), dir(d);
  const double zeta = spec.schedule.zeta();
  const PrecondKind& k = spec.precond;
  std::vector<Vector> xs;
  xs.reserve(steps);
  for (std::uint64_t n = 0; n < steps; ++n) {
    const Vector g = oracle.sample_gradient(x);
    const HyperAt hp = spec.schedule.eval(n);
    for (std::size_t i = 0; i < d; ++i)
      dir[i] = cg_direction ? g[i] - hp.delta * dir_prev[i] : g[i];
    const double mc = 1.0 - std::pow(zeta, static_cast<double>(n) + 1.0);
    const double vc =
        k.variant == PrecondVariant::AdamMax
            ? 1.0 - std::pow(k.theta, static_cast<double>(n) + 1.0)
            : 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      m[i] = hp.beta * m[i] + (1.0 - hp.beta) * dir[i];
      const double mhat = m[i] / mc;
      double h = 1.0;
      if (k.variant != PrecondVariant::Identity) {
        v[i] = k.theta * v[i] + (1.0 - k.theta) * (dir[i] * dir[i]);
        vhat[i] = std::max(vhat[i], v[i] / vc);
        h = std::sqrt(vhat[i]) + k.eps;
      }
      const double step_dir = -mhat / h;
      x[i] += hp.alpha * step_dir;
    }
    dir_prev = dir;
    xs.push_back(x);
  }
  return xs;
}

}  // namespace reference

/// Iterates of the full optimizer for `steps` steps, one entry per step.
inline std::vector<Vector> scg_trajectory(const TrialSpec& spec,
                                          std::uint64_t seed,
                                          std::uint64_t steps) {
  MinibatchOracle oracle(spec.problem, spec.batch_size, spec.sampling, seed);
  ScgState s = ScgState::initial(spec.problem->initial_point());
  std::vector<Vector> xs;
  xs.reserve(steps);
  for (std::uint64_t n = 0; n < steps; ++n) {
    const Vector g = oracle.sample_gradient(s.x);
    step_inplace(s, g, spec.schedule.eval(n), spec.schedule.zeta(),
                 spec.precond);
    xs.push_back(s.x);
  }
  return xs;
}

/// Largest per-coordinate relative difference between two trajectories
/// (0 when bitwise equal), and the first step where it occurs.
inline std::pair<double, std::uint64_t> trajectory_gap(
    const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double worst = 0.0;
  std::uint64_t at = 0;
  for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n) {
    for (std::size_t i = 0; i < a[n].size(); ++i) {
      const double x = a[n][i];
      const double y = b[n][i];
      if (x == y) continue;
      const double rel = std::abs(x - y) / std::max(std::abs(x), std::abs(y));
      if (rel > worst) {
        worst = rel;
        at = n + 1;
      }
    }
  }
  return {worst, at};
}

inline TrialSpec with_gamma_delta(TrialSpec spec, double gamma0,
                                  double delta0) {
  ScheduleParams p = spec.schedule.params();
  p.gamma0 = gamma0;
  p.delta0 = delta0;
  spec.schedule = HyperSchedule(p);
  return spec;
}

/// gamma = delta = 0 must reproduce the plain adaptive method, and gamma = 0
/// the conjugate-gradient variant, on the same sample stream. Tolerance is a
/// per-coordinate relative 1e-12; the note records whether the match was
/// bitwise.
inline CheckReport check_reductions(const TrialSpec& spec, std::uint64_t seed,
                                    std::uint64_t steps) {
  CheckReport r{.name = "reductions", .trials = 1, .tolerance = 1e-12};
  const TrialSpec adaptive = with_gamma_delta(spec, 0.0, 0.0);
  const auto [g1, s1] =
      trajectory_gap(scg_trajectory(adaptive, seed, steps),
                     reference::trajectory(adaptive, seed, steps, false));
  const TrialSpec cg = with_gamma_delta(spec, 0.0, spec.schedule.params().delta0);
  const auto [g2, s2] =
      trajectory_gap(scg_trajectory(cg, seed, steps),
                     reference::trajectory(cg, seed, steps, true));
  r.observe(g1, s1);
  r.observe(g2, s2);
  r.note = r.worst_violation == 0.0 ? "bitwise identical"
                                    : "identical within tolerance";
  return r.finish();
}

/// Unbiasedness of the minibatch gradient at x.
///
/// EpochPartition: the mean of the per-batch gradients over one epoch must
/// equal the full gradient to relative 1e-10 (inf-norm).
/// UniformWithReplacement: the Monte-Carlo mean of `draws` minibatch
/// gradients must lie within 3 standard errors of the full gradient in every
/// coordinate; the violation is the largest z-score.
inline CheckReport check_unbiasedness(
    std::shared_ptr<const FiniteSumProblem> problem, const Vector& x,
    std::size_t batch, Sampling sampling, std::uint64_t seed,
    std::size_t draws = 100000) {
  const Vector full = full_gradient(*problem, x);
  const std::size_t d = problem->dim();
  MinibatchOracle oracle(problem, batch, sampling, seed);
  if (sampling == Sampling::EpochPartition) {
    CheckReport r{.name = "unbiasedness_epoch", .trials = 1,
                  .tolerance = 1e-10};
    const std::size_t nb = oracle.batches_per_epoch();
    Vector mean(d);
    for (std::size_t b = 0; b < nb; ++b) {
      const Vector g = oracle.sample_gradient(x);
      for (std::size_t i = 0; i < d; ++i) mean[i] += g[i];
    }
    for (std::size_t i = 0; i < d; ++i) mean[i] /= static_cast<double>(nb);
    const double scale = std::max(norm_inf(full), 1e-300);
    r.observe(norm_inf(sub(mean, full)) / scale, 0);
    return r.finish();
  }
  CheckReport r{.name = "unbiasedness_uniform", .trials = draws,
                .tolerance = 3.0};
  Vector sum(d), sum_sq(d);
  for (std::size_t k = 0; k < draws; ++k) {
    const Vector g = oracle.sample_gradient(x);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += g[i];
      sum_sq[i] += g[i] * g[i];
    }
  }
  const double n = static_cast<double>(draws);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    const double err = std::abs(mean - full[i]);
    const double z = se > 0.0 ? err / se : (err == 0.0 ? 0.0 : INFINITY);
    r.observe(z, i);
  }
  return r.finish();
}

/// Convexity links along one trajectory measured against the optimum:
///   f(x_k) - f* <= V_k(x*)   and   f(x~_n) - f* <= (1/n) sum_{k<=n} V_k(x*)
/// with absolute tolerance 1e-9.
inline CheckReport check_convex_links(const Trace& trace,
                                      const FiniteSumProblem& problem) {
  if (!problem.convex())
    throw MetricError("convexity links need a convex problem");
  if (!problem.optimum())
    throw MetricError("convexity links need a known optimum");
  if (!(trace.x_ref == problem.optimum()->x))
    throw MetricError("trace was not measured against the optimum");
  const double f_star = problem.optimum()->f;
  CheckReport r{.name = "convex_links", .trials = 1, .tolerance = 1e-9};
  for (const auto& row : trace.rows) {
    r.observe((row.f - f_star) - row.V, row.n);
    r.observe((row.f_avg_iterate - f_star) - row.avg_V, row.n);
  }
  return r.finish();
}

}  // namespace scg
