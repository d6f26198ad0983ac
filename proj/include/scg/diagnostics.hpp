#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scg/errors.hpp"
#include "scg/schedules.hpp"
#include "scg/vecmath.hpp"

namespace scg {

/// One logged step. Row n describes the iterate x_n reached after n updates;
/// the moment and diagonal columns come from the update that produced it.
struct TraceRow {
  std::uint64_t n = 0;
  double f = 0.0;              // f(x_n)
  double grad_norm = 0.0;      // ||grad f(x_n)||
  double V = 0.0;              // <x_n - x_ref, grad f(x_n)>
  double avg_V = 0.0;          // (1/n) sum_{k=1..n} V_k
  double m_sq = 0.0;           // ||m||^2
  double G_sq = 0.0;           // ||search direction||^2
  double h_max = 0.0;
  double h_min = 0.0;
  double h_sum = 0.0;
  double D_hat = 0.0;          // max_{k<=n} max_i (x_{k,i} - x_ref_i)^2
  double f_avg_iterate = 0.0;  // f((1/n) sum_{k=1..n} x_k)
  double cum_sampled_loss = 0.0;  // sum_{t<n} minibatch loss at x_t
};

struct Trace {
  std::vector<TraceRow> rows;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  Vector x_ref;
  double max_grad_sq = 0.0;  // largest observed ||G(x_n, xi_n)||^2
  Vector final_x;
  Vector final_avg_iterate;
  /// Diagonal of H at every step, filled only when requested.
  std::vector<Vector> h_history;
};

/// Empirical witnesses of the constants appearing in the convergence bounds.
struct BoundConstants {
  double D = 0.0;
  double sumB = 0.0;
  double Mtilde2 = 0.0;
  double Mhat2 = 0.0;
  double Btilde = 0.0;
  double btilde = 1.0;      // 1 - beta
  double gammatilde = 1.0;  // 1 + gamma
  double zetatilde = 1.0;   // 1 - zeta
};

inline double perf_measure(const Vector& x_n, const Vector& x_ref,
                           const Vector& grad_full) {
  return dot(sub(x_n, x_ref), grad_full);
}

/// R(T)/T from the per-step sampled losses: (sum_{t<T} f_t(x_t) - T f*)/T.
/// T must be a logged step of the trace.
inline double regret_avg(const Trace& trace, std::optional<double> f_star,
                         std::uint64_t T) {
  if (!f_star) throw MetricError("regret needs a known optimal value");
  if (T == 0) throw MetricError("regret needs T >= 1");
  for (const auto& r : trace.rows) {
    if (r.n == T) {
      const double td = static_cast<double>(T);
      return (r.cum_sampled_loss - td * *f_star) / td;
    }
  }
  throw MetricError("regret horizon " + std::to_string(T) +
                    " is not a logged step");
}

/// Constant-rate bound on (1/n) sum V_k:
///   D sumB / (2 b alpha n) + Bt^2 Mt^2 alpha / (2 b zt^2)
///   + Mt sqrt(D d) beta / b + 4 Mh sqrt(D d) delta / gt
inline double theorem1_rhs(const BoundConstants& c, double alpha, double beta,
                           double delta, std::uint64_t n, std::size_t d) {
  const double nd = static_cast<double>(n);
  const double sqrt_dd = std::sqrt(c.D * static_cast<double>(d));
  const double mt = std::sqrt(c.Mtilde2);
  const double mh = std::sqrt(c.Mhat2);
  return c.D * c.sumB / (2.0 * c.btilde * alpha * nd) +
         c.Btilde * c.Btilde * c.Mtilde2 * alpha /
             (2.0 * c.btilde * c.zetatilde * c.zetatilde) +
         mt * sqrt_dd * beta / c.btilde +
         4.0 * mh * sqrt_dd * delta / c.gammatilde;
}

/// Diminishing-rate bound for alpha_n ~ 1/n^eta with geometric beta, delta:
///   D sumB / (2 b n^{1-eta}) + Bt^2 Mt^2 / (2 b zt^2 (1-eta) n^eta)
///   + beta Mt sqrt(D d) / (b (1-beta) n) + 4 delta Mh sqrt(D d) / ((1-delta) n)
inline double theorem2_rhs(const BoundConstants& c, double eta, double beta,
                           double delta, std::uint64_t n, std::size_t d) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  const double nd = static_cast<double>(n);
  const double sqrt_dd = std::sqrt(c.D * static_cast<double>(d));
  const double mt = std::sqrt(c.Mtilde2);
  const double mh = std::sqrt(c.Mhat2);
  return c.D * c.sumB / (2.0 * c.btilde * std::pow(nd, 1.0 - eta)) +
         c.Btilde * c.Btilde * c.Mtilde2 /
             (2.0 * c.btilde * c.zetatilde * c.zetatilde * (1.0 - eta) *
              std::pow(nd, eta)) +
         beta * mt * sqrt_dd / (c.btilde * (1.0 - beta) * nd) +
         4.0 * delta * mh * sqrt_dd / ((1.0 - delta) * nd);
}

/// Least-squares slope of log(value) against log(n) over points whose n lies
/// in [n_lo, n_hi].
inline double fit_rate(std::span<const std::pair<double, double>> series,
                       double n_lo, double n_hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t k = 0;
  for (const auto& [n, v] : series) {
    if (n < n_lo || n > n_hi) continue;
    if (!(v > 0.0) || !(n > 0.0))
      throw MetricError("fit_rate: nonpositive value in window");
    const double lx = std::log(n);
    const double ly = std::log(v);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 10) throw MetricError("fit_rate: need at least 10 points in window");
  const double kd = static_cast<double>(k);
  const double denom = kd * sxx - sx * sx;
  if (!(denom > 0.0)) throw MetricError("fit_rate: degenerate abscissae");
  return (kd * sxy - sx * sy) / denom;
}

/// Row-wise mean over trials. All traces must share the same logged steps.
inline std::vector<TraceRow> trial_mean(std::span<const Trace> traces) {
  if (traces.empty()) throw MetricError("trial_mean: no traces");
  const std::size_t rows = traces.front().rows.size();
  for (const auto& t : traces) {
    if (t.rows.size() != rows)
      throw MetricError("trial_mean: traces have different lengths");
  }
  const double k = static_cast<double>(traces.size());
  std::vector<TraceRow> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    TraceRow acc;
    acc.n = traces.front().rows[r].n;
    for (const auto& t : traces) {
      const TraceRow& x = t.rows[r];
      if (x.n != acc.n) throw MetricError("trial_mean: step mismatch");
      acc.f += x.f;
      acc.grad_norm += x.grad_norm;
      acc.V += x.V;
      acc.avg_V += x.avg_V;
      acc.m_sq += x.m_sq;
      acc.G_sq += x.G_sq;
      acc.h_max += x.h_max;
      acc.h_min += x.h_min;
      acc.h_sum += x.h_sum;
      acc.D_hat += x.D_hat;
      acc.f_avg_iterate += x.f_avg_iterate;
      acc.cum_sampled_loss += x.cum_sampled_loss;
    }
    acc.f /= k;
    acc.grad_norm /= k;
    acc.V /= k;
    acc.avg_V /= k;
    acc.m_sq /= k;
    acc.G_sq /= k;
    acc.h_max /= k;
    acc.h_min /= k;
    acc.h_sum /= k;
    acc.D_hat /= k;
    acc.f_avg_iterate /= k;
    acc.cum_sampled_loss /= k;
    out[r] = acc;
  }
  return out;
}

/// Plug-in constants from a set of trials.
///
/// D: largest realized (x_{n,i} - x_ref_i)^2 over all trials.
/// sumB: trial mean of the final sum_i h_{n,i}; h is nondecreasing, so the
///   last value bounds every earlier expectation.
/// Mtilde2, Mhat2: M^2 when an analytic M is given (zero initial momentum
///   and direction), else the largest observed ||G||^2.
/// Btilde: largest max_i h_{n,i}^{-1/2} along any trajectory.
inline BoundConstants estimate_constants(std::span<const Trace> traces,
                                         const ScheduleParams& schedule,
                                         std::optional<double> m_analytic) {
  if (traces.empty()) throw MetricError("estimate_constants: no traces");
  BoundConstants c;
  double sum_b = 0.0;
  double max_g = 0.0;
  double min_h = std::numeric_limits<double>::infinity();
  for (const auto& t : traces) {
    if (t.rows.empty()) throw MetricError("estimate_constants: empty trace");
    c.D = std::max(c.D, t.rows.back().D_hat);
    sum_b += t.rows.back().h_sum;
    max_g = std::max(max_g, t.max_grad_sq);
    for (const auto& r : t.rows) min_h = std::min(min_h, r.h_min);
  }
  c.sumB = sum_b / static_cast<double>(traces.size());
  const double m2 = m_analytic ? (*m_analytic) * (*m_analytic) : max_g;
  c.Mtilde2 = m2;
  c.Mhat2 = m2;
  c.Btilde = 1.0 / std::sqrt(min_h);
  c.btilde = 1.0 - schedule.beta0;
  c.gammatilde = 1.0 + schedule.gamma0;
  c.zetatilde = 1.0 - schedule.zeta;
  return c;
}

}  // namespace scg
