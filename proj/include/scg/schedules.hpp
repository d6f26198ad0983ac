#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "scg/errors.hpp"

namespace scg {

enum class Regime { Constant, Diminishing };

/// Raw schedule parameters; validated when a HyperSchedule is built.
struct ScheduleParams {
  Regime regime = Regime::Constant;
  double alpha0 = 1e-3;
  double beta0 = 0.9;
  double gamma0 = 0.1;
  double delta0 = 1e-3;
  double zeta = 0.9;
  double eta = 0.5;         // Diminishing only
  double decay_base = 0.5;  // Diminishing only
  // Cosine annealing with warm restarts every `cosine_period` steps
  // (Constant only, 0 = off). Not covered by the convergence theory.
  std::uint64_t cosine_period = 0;
};

/// Hyperparameters evaluated at one step.
struct HyperAt {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;

  friend bool operator==(const HyperAt&, const HyperAt&) = default;
};

/// The sequences (alpha_n, beta_n, gamma_n, delta_n) and the momentum
/// bias-correction constant zeta.
///
/// Constant regime: every sequence is flat (cosine annealing, when enabled,
/// modulates alpha only).
/// Diminishing regime:
///   alpha_n = alpha0 / (n+1)^eta
///   beta_n  = beta0  * decay_base^n
///   gamma_n = gamma0 * decay_base^n
///   delta_n = delta0 * decay_base^n
/// which satisfies sum alpha_n = inf, sum alpha_n^2 < inf (for eta > 1/2),
/// summable alpha_n*{beta,gamma,delta}_n, and gamma_{n+1} <= gamma_n.
///
/// All range checks happen in the constructor; eval() never throws.
class HyperSchedule {
 public:
  HyperSchedule() : HyperSchedule(ScheduleParams{}) {}
  explicit HyperSchedule(const ScheduleParams& p) : p_(p) { validate(p_); }

  const ScheduleParams& params() const { return p_; }
  Regime regime() const { return p_.regime; }
  double zeta() const { return p_.zeta; }
  bool cosine() const { return p_.cosine_period > 0; }

  HyperAt eval(std::uint64_t n) const {
    HyperAt h;
    if (p_.regime == Regime::Constant) {
      h.alpha = p_.alpha0;
      if (p_.cosine_period > 0) {
        const double phase = static_cast<double>(n % p_.cosine_period) /
                             static_cast<double>(p_.cosine_period);
        h.alpha = 0.5 * p_.alpha0 * (1.0 + std::cos(std::numbers::pi * phase));
      }
      h.beta = p_.beta0;
      h.gamma = p_.gamma0;
      h.delta = p_.delta0;
      return h;
    }
    const double nd = static_cast<double>(n);
    const double decay = std::pow(p_.decay_base, nd);
    h.alpha = p_.alpha0 / std::pow(nd + 1.0, p_.eta);
    h.beta = p_.beta0 * decay;
    h.gamma = p_.gamma0 * decay;
    h.delta = p_.delta0 * decay;
    return h;
  }

  /// alpha_n (1 - beta_n)(1 + gamma_n) / (1 - zeta^{n+1})
  double kappa(std::uint64_t n) const {
    const HyperAt h = eval(n);
    const double zeta_tilde =
        1.0 - std::pow(p_.zeta, static_cast<double>(n) + 1.0);
    return h.alpha * (1.0 - h.beta) * (1.0 + h.gamma) / zeta_tilde;
  }

  static void validate(const ScheduleParams& p) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    // alpha0 = 1 is admitted for the diminishing family so that the common
    // alpha_n = 1/sqrt(n+1) setting is expressible; alpha_n < 1 for n >= 1.
    if (p.regime == Regime::Constant) {
      if (!(p.alpha0 > 0.0 && p.alpha0 < 1.0))
        fail("alpha0 must lie in (0, 1)");
    } else if (!(p.alpha0 > 0.0 && p.alpha0 <= 1.0)) {
      fail("alpha0 must lie in (0, 1] for the diminishing regime");
    }
    if (!(p.beta0 >= 0.0 && p.beta0 < 1.0)) fail("beta0 must lie in [0, 1)");
    if (!(p.gamma0 >= 0.0 && std::isfinite(p.gamma0)))
      fail("gamma0 must lie in [0, +inf)");
    if (!(p.delta0 >= 0.0 && p.delta0 <= 0.5))
      fail("delta0 must lie in [0, 1/2]");
    if (!(p.zeta >= 0.0 && p.zeta < 1.0)) fail("zeta must lie in [0, 1)");
    if (p.regime == Regime::Diminishing) {
      if (!(p.eta > 0.0 && p.eta < 1.0)) fail("eta must lie in (0, 1)");
      if (!(p.decay_base > 0.0 && p.decay_base < 1.0))
        fail("decay_base must lie in (0, 1)");
      if (p.cosine_period > 0)
        fail("cosine annealing is only available in the constant regime");
    }
  }

 private:
  ScheduleParams p_;
};

/// Every n < n_max with kappa_{n+1} > kappa_n. Violations are reported,
/// never fatal.
inline std::vector<std::uint64_t> check_kappa_monotone(
    const HyperSchedule& s, std::uint64_t n_max) {
  std::vector<std::uint64_t> out;
  double prev = s.kappa(0);
  for (std::uint64_t n = 0; n < n_max; ++n) {
    const double next = s.kappa(n + 1);
    if (next > prev) out.push_back(n);
    prev = next;
  }
  return out;
}

}  // namespace scg
