#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "scg/diagnostics.hpp"
#include "scg/optimizer.hpp"
#include "scg/problems.hpp"
#include "scg/schedules.hpp"

namespace scg {

using PrecondRule =
    std::function<DiagPD(PrecondState&, const Vector&, std::uint64_t)>;

/// Logged steps: every n in [1, dense_until], then per_decade geometrically
/// spaced checkpoints per factor of ten, and always the final step.
inline std::vector<std::uint64_t> logged_steps(std::uint64_t iterations,
                                               std::uint64_t dense_until = 1000,
                                               int per_decade = 50) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t n = 1; n <= std::min(iterations, dense_until); ++n)
    out.push_back(n);
  if (iterations > dense_until) {
    for (int j = 1;; ++j) {
      const double v = static_cast<double>(dense_until) *
                       std::pow(10.0, static_cast<double>(j) / per_decade);
      const auto n = static_cast<std::uint64_t>(std::llround(v));
      if (n >= iterations) break;
      if (n > out.back()) out.push_back(n);
    }
    out.push_back(iterations);
  }
  return out;
}

/// Everything needed to execute one seeded optimizer run.
struct TrialSpec {
  std::shared_ptr<const FiniteSumProblem> problem;
  std::size_t batch_size = 10;
  Sampling sampling = Sampling::UniformWithReplacement;
  HyperSchedule schedule;
  PrecondKind precond;
  std::uint64_t iterations = 1000;
  Vector x_ref;               // reference point for V_n and D
  bool record_diag = false;   // keep the full diagonal of H at every step
  std::uint64_t config_hash = 0;
  PrecondRule precond_override;  // replaces `precond` when set
};

/// Runs the optimizer for spec.iterations steps with sampling seed `seed`.
/// The full loss and gradient are evaluated at every iterate so that the
/// running averages cover every step, not just the logged ones.
inline Trace run_trial(const TrialSpec& spec, std::uint64_t seed) {
  const FiniteSumProblem& p = *spec.problem;
  const std::size_t d = p.dim();
  if (spec.x_ref.size() != d)
    throw DimensionError("run_trial: reference point has wrong length");

  MinibatchOracle oracle(spec.problem, spec.batch_size, spec.sampling, seed);
  ScgState state = ScgState::initial(p.initial_point());
  const double zeta = spec.schedule.zeta();
  const PrecondRule rule =
      spec.precond_override
          ? spec.precond_override
          : PrecondRule([kind = spec.precond](PrecondState& ps,
                                              const Vector& dir,
                                              std::uint64_t n) {
              return precond_update_inplace(ps, kind, dir, n);
            });

  Trace trace;
  trace.seed = seed;
  trace.config_hash = spec.config_hash;
  trace.x_ref = spec.x_ref;

  const auto logged = logged_steps(spec.iterations);
  trace.rows.reserve(logged.size());
  auto next_log = logged.begin();

  auto sq_dev = [&](const Vector& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = x[i] - spec.x_ref[i];
      m = std::max(m, e * e);
    }
    return m;
  };

  Vector x_sum(d);
  Vector grad_full(d);
  Vector avg(d);
  double sum_v = 0.0;
  double cum_loss = 0.0;
  double d_hat = sq_dev(state.x);

  for (std::uint64_t n = 0; n < spec.iterations; ++n) {
    MinibatchOracle::Draw draw = oracle.draw(state.x);
    cum_loss += draw.loss;
    trace.max_grad_sq = std::max(trace.max_grad_sq, norm_sq(draw.grad));

    step_inplace_with(state, draw.grad, spec.schedule.eval(n), zeta, rule);

    const std::uint64_t k = n + 1;
    const double f = p.loss_grad(state.x, &grad_full);
    double v = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v += (state.x[i] - spec.x_ref[i]) * grad_full[i];
      x_sum[i] += state.x[i];
    }
    sum_v += v;
    d_hat = std::max(d_hat, sq_dev(state.x));
    if (!std::isfinite(f) || !std::isfinite(v))
      throw NumericalError("non-finite loss or performance measure at step " +
                           std::to_string(k));

    if (spec.record_diag) trace.h_history.push_back(state.h);

    if (next_log != logged.end() && *next_log == k) {
      ++next_log;
      TraceRow r;
      r.n = k;
      r.f = f;
      r.grad_norm = norm(grad_full);
      r.V = v;
      r.avg_V = sum_v / static_cast<double>(k);
      r.m_sq = norm_sq(state.m_prev);
      r.G_sq = norm_sq(state.g_prev);
      r.h_max = *std::max_element(state.h.begin(), state.h.end());
      r.h_min = *std::min_element(state.h.begin(), state.h.end());
      r.h_sum = 0.0;
      for (double h : state.h) r.h_sum += h;
      r.D_hat = d_hat;
      for (std::size_t i = 0; i < d; ++i)
        avg[i] = x_sum[i] / static_cast<double>(k);
      r.f_avg_iterate = full_loss(p, avg);
      r.cum_sampled_loss = cum_loss;
      trace.rows.push_back(r);
    }
  }
  trace.final_x = state.x;
  trace.final_avg_iterate = spec.iterations > 0 ? avg : state.x;
  return trace;
}

/// K independent trials; trial k uses sampling seed base_seed + k. Trials
/// are spread over `threads` workers (0 = hardware concurrency). Results are
/// independent of the worker count.
inline std::vector<Trace> run_trials(const TrialSpec& spec, std::size_t trials,
                                     std::uint64_t base_seed,
                                     unsigned threads = 0) {
  std::vector<Trace> out(trials);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(trials, 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(trials);
  auto worker = [&] {
    for (std::size_t k = next++; k < trials; k = next++) {
      try {
        out[k] = run_trial(spec, base_seed + k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// The point V_n is measured against: the known optimum when the problem has
/// one, otherwise the last iterate of a deterministic full-batch reference
/// run (AdamMax, alpha = 1e-2, beta = zeta = 0.9, 20000 steps).
inline Vector reference_point(const FiniteSumProblem& p) {
  if (p.optimum()) return p.optimum()->x;
  ScheduleParams sp;
  sp.alpha0 = 1e-2;
  sp.beta0 = 0.9;
  sp.gamma0 = 0.0;
  sp.delta0 = 0.0;
  sp.zeta = 0.9;
  const HyperSchedule sched(sp);
  const PrecondKind kind{PrecondVariant::AdamMax, 0.999, 1e-8};
  ScgState s = ScgState::initial(p.initial_point());
  Vector g;
  for (std::uint64_t n = 0; n < 20000; ++n) {
    p.loss_grad(s.x, &g);
    step_inplace(s, g, sched.eval(n), sched.zeta(), kind);
  }
  return s.x;
}

}  // namespace scg
