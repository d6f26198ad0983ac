#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "scg/errors.hpp"
#include "scg/schedules.hpp"
#include "scg/vecmath.hpp"

namespace scg {

enum class PrecondVariant { Identity, AdamMax, AmsGrad };

inline const char* to_string(PrecondVariant v) {
  switch (v) {
    case PrecondVariant::Identity: return "identity";
    case PrecondVariant::AdamMax: return "adammax";
    case PrecondVariant::AmsGrad: return "amsgrad";
  }
  return "?";
}

/// Which diagonal preconditioner to build, its second-moment decay theta and
/// the floor eps added after the square root (keeps H positive definite).
struct PrecondKind {
  PrecondVariant variant = PrecondVariant::AdamMax;
  double theta = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(theta >= 0.0 && theta < 1.0))
      throw ConfigError("theta must lie in [0, 1)");
    if (!(eps > 0.0 && std::isfinite(eps)))
      throw ConfigError("eps must be > 0");
  }
};

/// Second-moment accumulators. vhat is a running maximum, so the diagonal
/// built from it never decreases.
struct PrecondState {
  Vector v;
  Vector vhat;
  std::uint64_t step = 0;

  explicit PrecondState(std::size_t d = 0) : v(d), vhat(d) {}
};

/// Full optimizer state between iterations.
struct ScgState {
  Vector x;       // iterate x_n
  Vector g_prev;  // previous search direction
  Vector m_prev;  // previous momentum
  PrecondState precond;
  Vector h;       // diagonal used in the last step (empty before step 0)
  std::uint64_t n = 0;

  /// Zero previous direction, momentum and accumulators.
  static ScgState initial(Vector x0) {
    ScgState s;
    const std::size_t d = x0.size();
    s.x = std::move(x0);
    s.g_prev = Vector(d);
    s.m_prev = Vector(d);
    s.precond = PrecondState(d);
    return s;
  }
};

/// (1 + gamma) g - delta g_prev. With gamma = 0 this is the plain
/// conjugate-gradient direction; with gamma = delta = 0 it is g itself.
inline Vector scg_direction(const Vector& g, const Vector& g_prev,
                            double gamma, double delta) {
  detail::require_same_length(g.size(), g_prev.size(), "scg_direction");
  Vector out(g.size());
  const double scale_g = 1.0 + gamma;
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = scale_g * g[i] - delta * g_prev[i];
  }
  return out;
}

struct Momentum {
  Vector m;
  Vector mhat;
};

/// m = beta m_prev + (1 - beta) G, mhat = m / (1 - zeta^{n+1}).
inline Momentum momentum_update(const Vector& m_prev, const Vector& dir,
                                double beta, double zeta, std::uint64_t n) {
  detail::require_same_length(m_prev.size(), dir.size(), "momentum_update");
  Momentum out{Vector(dir.size()), Vector(dir.size())};
  const double correction =
      1.0 - std::pow(zeta, static_cast<double>(n) + 1.0);
  for (std::size_t i = 0; i < dir.size(); ++i) {
    out.m[i] = beta * m_prev[i] + (1.0 - beta) * dir[i];
    out.mhat[i] = out.m[i] / correction;
  }
  return out;
}

/// Advances the accumulators in place with direction `dir` at step n and
/// returns the new diagonal.
///
///   AdamMax: v = theta v + (1-theta) G*G,  vbar = v / (1 - theta^{n+1}),
///            vhat = max(vhat, vbar),       h = sqrt(vhat) + eps
///   AmsGrad: as above with vbar replaced by v (no bias correction)
///   Identity: h = 1
inline DiagPD precond_update_inplace(PrecondState& ps, const PrecondKind& kind,
                                     const Vector& dir, std::uint64_t n) {
  detail::require_same_length(ps.v.size(), dir.size(), "precond_update");
  ps.step += 1;
  if (kind.variant == PrecondVariant::Identity) {
    return DiagPD::identity(dir.size());
  }
  const double theta = kind.theta;
  const double correction =
      kind.variant == PrecondVariant::AdamMax
          ? 1.0 - std::pow(theta, static_cast<double>(n) + 1.0)
          : 1.0;
  Vector h(dir.size());
  for (std::size_t i = 0; i < dir.size(); ++i) {
    ps.v[i] = theta * ps.v[i] + (1.0 - theta) * (dir[i] * dir[i]);
    const double vbar = ps.v[i] / correction;
    ps.vhat[i] = std::max(ps.vhat[i], vbar);
    h[i] = std::sqrt(ps.vhat[i]) + kind.eps;
  }
  return DiagPD(std::move(h));
}

inline std::pair<PrecondState, DiagPD> precond_update(PrecondState ps,
                                                      const PrecondKind& kind,
                                                      const Vector& dir,
                                                      std::uint64_t n) {
  DiagPD h = precond_update_inplace(ps, kind, dir, n);
  return {std::move(ps), std::move(h)};
}

/// One iteration with a caller-supplied preconditioner rule. `update` is
/// invoked as update(PrecondState&, const Vector& dir, uint64_t n) and must
/// return the DiagPD for this step.
template <class PrecondFn>
void step_inplace_with(ScgState& s, const Vector& g, const HyperAt& hyper,
                       double zeta, PrecondFn&& update) {
  detail::require_same_length(s.x.size(), g.size(), "step");
  Vector dir = scg_direction(g, s.g_prev, hyper.gamma, hyper.delta);
  Momentum mom = momentum_update(s.m_prev, dir, hyper.beta, zeta, s.n);
  DiagPD h = update(s.precond, dir, s.n);
  Vector d = solve_diag(h, mom.mhat);
  for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] += hyper.alpha * d[i];
  require_finite(s.x, "iterate");
  s.g_prev = std::move(dir);
  s.m_prev = std::move(mom.m);
  s.h = h.diag();
  s.n += 1;
}

inline void step_inplace(ScgState& s, const Vector& g, const HyperAt& hyper,
                         double zeta, const PrecondKind& kind) {
  step_inplace_with(s, g, hyper, zeta,
                    [&kind](PrecondState& ps, const Vector& dir,
                            std::uint64_t n) {
                      return precond_update_inplace(ps, kind, dir, n);
                    });
}

/// Pure form of step_inplace.
inline ScgState step(ScgState s, const Vector& g, const HyperAt& hyper,
                     double zeta, const PrecondKind& kind) {
  step_inplace(s, g, hyper, zeta, kind);
  return s;
}

}  // namespace scg
