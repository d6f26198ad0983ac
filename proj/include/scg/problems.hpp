#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scg/errors.hpp"
#include "scg/rng.hpp"
#include "scg/vecmath.hpp"

namespace scg {

struct Optimum {
  Vector x;
  double f = 0.0;
};

/// f(x) = (1/T) sum_i f_i(x) with per-sample value and gradient access.
/// Instances are immutable once built and may be shared between runs.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  virtual std::string name() const = 0;

  /// Returns f_i(x). When `grad` is non-null, adds weight * grad f_i(x) to it.
  virtual double sample_loss_grad(const Vector& x, std::size_t i,
                                  Vector* grad, double weight) const = 0;

  /// Starting point for optimizer runs.
  virtual Vector initial_point() const { return Vector(dim_); }

  std::size_t dim() const { return dim_; }
  std::size_t num_samples() const { return samples_; }
  bool convex() const { return convex_; }
  const std::optional<Optimum>& optimum() const { return optimum_; }
  /// M with ||G(x, xi)|| <= M for every x and every sample, when one is
  /// known in closed form.
  std::optional<double> grad_bound() const { return grad_bound_; }

  double loss_i(const Vector& x, std::size_t i) const {
    return sample_loss_grad(x, i, nullptr, 0.0);
  }

  Vector grad_i(const Vector& x, std::size_t i) const {
    Vector g(dim_);
    sample_loss_grad(x, i, &g, 1.0);
    return g;
  }

  /// Mean loss over `idx`; writes the mean gradient to *grad when non-null.
  double batch_loss_grad(const Vector& x, std::span<const std::size_t> idx,
                         Vector* grad) const {
    if (grad) *grad = Vector(dim_);
    const double w = 1.0 / static_cast<double>(idx.size());
    double loss = 0.0;
    for (std::size_t i : idx) loss += sample_loss_grad(x, i, grad, w);
    return loss * w;
  }

  /// Full loss and (optionally) full gradient.
  double loss_grad(const Vector& x, Vector* grad) const {
    if (grad) *grad = Vector(dim_);
    const double w = 1.0 / static_cast<double>(samples_);
    double loss = 0.0;
    for (std::size_t i = 0; i < samples_; ++i)
      loss += sample_loss_grad(x, i, grad, w);
    return loss * w;
  }

 protected:
  FiniteSumProblem(std::size_t dim, std::size_t samples, bool convex)
      : dim_(dim), samples_(samples), convex_(convex) {
    if (dim == 0) throw ConfigError("problem dimension must be > 0");
    if (samples == 0) throw ConfigError("number of samples must be > 0");
  }

  std::optional<Optimum> optimum_;
  std::optional<double> grad_bound_;

 private:
  std::size_t dim_;
  std::size_t samples_;
  bool convex_;
};

inline double full_loss(const FiniteSumProblem& p, const Vector& x) {
  return p.loss_grad(x, nullptr);
}

inline Vector full_gradient(const FiniteSumProblem& p, const Vector& x) {
  Vector g;
  p.loss_grad(x, &g);
  return g;
}

namespace detail {

inline double log1p_exp(double t) {
  // log(1 + e^t) without overflow
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// f_i(x) = 1/2 ||A_i x - b_i||^2, A_i of shape rows x d.
///
/// Data recipe (Rng seeded with data_seed): for each sample i, the rows*d
/// entries of A_i in row-major order as normal()/sqrt(d), then the rows
/// entries of b_i as normal(). The optimum solves the normal equations.
class QuadraticSum final : public FiniteSumProblem {
 public:
  QuadraticSum(std::size_t dim, std::size_t samples, std::size_t rows,
               std::uint64_t data_seed)
      : FiniteSumProblem(dim, samples, true), rows_(rows) {
    if (rows == 0) throw ConfigError("quadratic rows must be > 0");
    if (rows * samples < dim)
      throw ConfigError("quadratic problem needs rows*samples >= dim");
    Rng rng(data_seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    a_.resize(samples * rows * dim);
    b_.resize(samples * rows);
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t k = 0; k < rows * dim; ++k)
        a_[i * rows * dim + k] = s * rng.normal();
      for (std::size_t r = 0; r < rows; ++r) b_[i * rows + r] = rng.normal();
    }
    optimum_ = solve_normal_equations();
  }

  std::string name() const override { return "quadratic"; }

  double sample_loss_grad(const Vector& x, std::size_t i, Vector* grad,
                          double weight) const override {
    const std::size_t d = dim();
    double loss = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* row = &a_[(i * rows_ + r) * d];
      double res = -b_[i * rows_ + r];
      for (std::size_t j = 0; j < d; ++j) res += row[j] * x[j];
      loss += 0.5 * res * res;
      if (grad) {
        for (std::size_t j = 0; j < d; ++j) (*grad)[j] += weight * res * row[j];
      }
    }
    return loss;
  }

 private:
  Optimum solve_normal_equations() const {
    const std::size_t d = dim();
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < num_samples(); ++i) {
      for (std::size_t r = 0; r < rows_; ++r) {
        Eigen::Map<const Eigen::VectorXd> row(&a_[(i * rows_ + r) * d], d);
        ata.noalias() += row * row.transpose();
        atb.noalias() += b_[i * rows_ + r] * row;
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ConfigError("quadratic problem: normal equations are singular");
    Eigen::VectorXd sol = ldlt.solve(atb);
    Optimum opt{Vector(std::vector<double>(sol.data(), sol.data() + d)), 0.0};
    opt.f = full_loss(*this, opt.x);
    return opt;
  }

  std::size_t rows_;
  std::vector<double> a_;
  std::vector<double> b_;
};

/// f_i(x) = log(1 + exp(-y_i <z_i, x>)), y_i in {-1, +1}, z_i in [-1, 1]^d.
///
/// Data recipe (Rng seeded with data_seed): w_true_j = normal() for
/// j < d; then per sample i the d features uniform(-1, 1), then
/// u = uniform01() and y_i = +1 if u < sigmoid(<w_true, z_i>) else -1.
/// Labels are noisy, so the data are not separable and the minimizer is
/// finite. ||grad f_i(x)|| <= ||z_i|| for every x, so M = max_i ||z_i||.
/// The optimum is found by a damped Newton reference solve.
class LogisticSynthetic final : public FiniteSumProblem {
 public:
  LogisticSynthetic(std::size_t dim, std::size_t samples,
                    std::uint64_t data_seed)
      : FiniteSumProblem(dim, samples, true) {
    Rng rng(data_seed);
    std::vector<double> w(dim);
    for (auto& v : w) v = rng.normal();
    z_.resize(samples * dim);
    y_.resize(samples);
    double max_norm_sq = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      double margin = 0.0;
      double nsq = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = rng.uniform(-1.0, 1.0);
        z_[i * dim + j] = v;
        margin += w[j] * v;
        nsq += v * v;
      }
      y_[i] = rng.uniform01() < detail::sigmoid(margin) ? 1.0 : -1.0;
      max_norm_sq = std::max(max_norm_sq, nsq);
    }
    grad_bound_ = std::sqrt(max_norm_sq);
    optimum_ = newton_reference();
  }

  std::string name() const override { return "logistic"; }

  double sample_loss_grad(const Vector& x, std::size_t i, Vector* grad,
                          double weight) const override {
    const std::size_t d = dim();
    const double* z = &z_[i * d];
    double t = 0.0;
    for (std::size_t j = 0; j < d; ++j) t += z[j] * x[j];
    t *= y_[i];
    // one exponential serves both log(1 + e^{-t}) and sigmoid(-t)
    const double e = std::exp(-std::abs(t));
    if (grad) {
      // d/dx log(1 + e^{-t}) = -sigmoid(-t) y z
      const double sig = t >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
      const double c = -weight * sig * y_[i];
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += c * z[j];
    }
    return (t >= 0.0 ? 0.0 : -t) + std::log1p(e);
  }

  std::span<const double> features(std::size_t i) const {
    return {&z_[i * dim()], dim()};
  }
  double label(std::size_t i) const { return y_[i]; }

 private:
  Optimum newton_reference() const {
    const std::size_t d = dim();
    const std::size_t n = num_samples();
    Vector x(d);
    for (int iter = 0; iter < 200; ++iter) {
      Vector g;
      const double f0 = loss_grad(x, &g);
      if (norm(g) <= 1e-10) break;
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::Map<const Eigen::VectorXd> z(&z_[i * d], d);
        double t = 0.0;
        for (std::size_t j = 0; j < d; ++j) t += z_[i * d + j] * x[j];
        const double s = detail::sigmoid(t);
        hess.noalias() += (s * (1.0 - s) / static_cast<double>(n)) *
                          (z * z.transpose());
      }
      Eigen::Map<const Eigen::VectorXd> gv(g.data(), d);
      Eigen::VectorXd dir = -hess.ldlt().solve(gv);
      // Backtracking far from x*. Near x* the loss stops resolving the
      // improvement, so a step that shrinks the gradient is also accepted.
      const double gnorm = norm(g);
      double step = 1.0;
      Vector trial(d);
      Vector gt;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t j = 0; j < d; ++j) trial[j] = x[j] + step * dir[j];
        const double ft = loss_grad(trial, &gt);
        if (ft < f0 || (ft <= f0 && norm(gt) < gnorm)) break;
        if (std::abs(ft - f0) <= 1e-14 * std::abs(f0) && norm(gt) < gnorm)
          break;
        step *= 0.5;
      }
      x = trial;
    }
    if (norm(full_gradient(*this, x)) > 1e-10)
      throw ConfigError("logistic problem: reference solve did not converge");
    return Optimum{x, full_loss(*this, x)};
  }

  std::vector<double> z_;
  std::vector<double> y_;
};

/// Nonconvex finite sum of shifted Rosenbrock terms, d >= 2:
///   f_i(x) = sum_{j<d-1} 100 (x_{j+1} - x_j^2)^2 + (1 + s_ij - x_j)^2
/// Shifts s_ij = shift_scale * normal() (sample-major), then centred so
/// every column has zero mean. The average then differs from the classic
/// Rosenbrock function by a constant and is minimized at x = (1, ..., 1).
class RosenbrockSum final : public FiniteSumProblem {
 public:
  RosenbrockSum(std::size_t dim, std::size_t samples, double shift_scale,
                std::uint64_t data_seed)
      : FiniteSumProblem(dim, samples, false) {
    if (dim < 2) throw ConfigError("rosenbrock problem needs dim >= 2");
    if (!(shift_scale >= 0.0))
      throw ConfigError("rosenbrock shift_scale must be >= 0");
    Rng rng(data_seed);
    const std::size_t w = dim - 1;
    s_.resize(samples * w);
    for (auto& v : s_) v = shift_scale * rng.normal();
    for (std::size_t j = 0; j < w; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < samples; ++i) mean += s_[i * w + j];
      mean /= static_cast<double>(samples);
      for (std::size_t i = 0; i < samples; ++i) s_[i * w + j] -= mean;
    }
    Vector ones(dim, 1.0);
    optimum_ = Optimum{ones, full_loss(*this, ones)};
  }

  std::string name() const override { return "rosenbrock"; }

  double sample_loss_grad(const Vector& x, std::size_t i, Vector* grad,
                          double weight) const override {
    const std::size_t w = dim() - 1;
    const double* s = &s_[i * w];
    double loss = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      const double c = x[j + 1] - x[j] * x[j];
      const double r = 1.0 + s[j] - x[j];
      loss += 100.0 * c * c + r * r;
      if (grad) {
        (*grad)[j] += weight * (-400.0 * c * x[j] - 2.0 * r);
        (*grad)[j + 1] += weight * (200.0 * c);
      }
    }
    return loss;
  }

 private:
  std::vector<double> s_;
};

/// One-hidden-layer tanh network with a logistic output and cross-entropy
/// loss on two Gaussian blobs.
///
/// Parameter layout: W1 (hidden x inputs, row-major), b1 (hidden),
/// w2 (hidden), b2 (1).
///
/// Data recipe (Rng seeded with data_seed): sample i has label i % 2 and
/// inputs centre + 0.5 * normal() per coordinate, clamped to [-3, 3], where
/// the centre is +1 in every coordinate for label 1 and -1 for label 0.
/// The initial point continues the same stream: W1 entries
/// normal()/sqrt(inputs), then w2 entries normal()/sqrt(hidden); biases 0.
class TinyMLP final : public FiniteSumProblem {
 public:
  TinyMLP(std::size_t inputs, std::size_t hidden, std::size_t samples,
          std::uint64_t data_seed)
      : FiniteSumProblem(check_sizes(inputs, hidden) * hidden + 2 * hidden + 1,
                         samples, false),
        in_(inputs),
        hid_(hidden) {
    Rng rng(data_seed);
    u_.resize(samples * inputs);
    y_.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      y_[i] = static_cast<double>(i % 2);
      const double centre = y_[i] > 0.5 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < inputs; ++j) {
        u_[i * inputs + j] =
            std::clamp(centre + 0.5 * rng.normal(), -3.0, 3.0);
      }
    }
    x0_ = Vector(dim());
    const double s1 = 1.0 / std::sqrt(static_cast<double>(inputs));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t k = 0; k < hidden * inputs; ++k) x0_[k] = s1 * rng.normal();
    for (std::size_t k = 0; k < hidden; ++k)
      x0_[w2_offset() + k] = s2 * rng.normal();
  }

  std::string name() const override { return "mlp"; }
  Vector initial_point() const override { return x0_; }

  std::size_t inputs() const { return in_; }
  std::size_t hidden() const { return hid_; }

  double sample_loss_grad(const Vector& x, std::size_t i, Vector* grad,
                          double weight) const override {
    const double* u = &u_[i * in_];
    const double* w1 = x.data();
    const double* b1 = x.data() + b1_offset();
    const double* w2 = x.data() + w2_offset();
    const double b2 = x[b2_offset()];
    // forward
    std::vector<double> act(hid_);
    double out = b2;
    for (std::size_t k = 0; k < hid_; ++k) {
      double pre = b1[k];
      for (std::size_t j = 0; j < in_; ++j) pre += w1[k * in_ + j] * u[j];
      act[k] = std::tanh(pre);
      out += w2[k] * act[k];
    }
    const double y = y_[i];
    // softplus(out) - y*out
    const double loss = detail::log1p_exp(out) - y * out;
    if (grad) {
      const double dout = weight * (detail::sigmoid(out) - y);
      double* g = grad->data();
      g[b2_offset()] += dout;
      for (std::size_t k = 0; k < hid_; ++k) {
        g[w2_offset() + k] += dout * act[k];
        const double dpre = dout * w2[k] * (1.0 - act[k] * act[k]);
        g[b1_offset() + k] += dpre;
        for (std::size_t j = 0; j < in_; ++j) g[k * in_ + j] += dpre * u[j];
      }
    }
    return loss;
  }

 private:
  static std::size_t check_sizes(std::size_t inputs, std::size_t hidden) {
    if (inputs == 0 || hidden == 0)
      throw ConfigError("mlp inputs and hidden must be > 0");
    return inputs;
  }
  std::size_t b1_offset() const { return hid_ * in_; }
  std::size_t w2_offset() const { return hid_ * in_ + hid_; }
  std::size_t b2_offset() const { return hid_ * in_ + 2 * hid_; }

  std::size_t in_;
  std::size_t hid_;
  std::vector<double> u_;
  std::vector<double> y_;
  Vector x0_;
};

enum class ProblemKind { Quadratic, Logistic, Rosenbrock, Mlp };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Logistic;
  std::size_t dim = 20;        // ignored by Mlp
  std::size_t samples = 1000;
  std::uint64_t data_seed = 1;
  std::size_t rows = 2;        // Quadratic
  double shift_scale = 0.1;    // Rosenbrock
  std::size_t inputs = 2;      // Mlp
  std::size_t hidden = 16;     // Mlp
};

inline std::shared_ptr<const FiniteSumProblem> make_problem(
    const ProblemSpec& s) {
  switch (s.kind) {
    case ProblemKind::Quadratic:
      return std::make_shared<QuadraticSum>(s.dim, s.samples, s.rows,
                                            s.data_seed);
    case ProblemKind::Logistic:
      return std::make_shared<LogisticSynthetic>(s.dim, s.samples,
                                                 s.data_seed);
    case ProblemKind::Rosenbrock:
      return std::make_shared<RosenbrockSum>(s.dim, s.samples, s.shift_scale,
                                             s.data_seed);
    case ProblemKind::Mlp:
      return std::make_shared<TinyMLP>(s.inputs, s.hidden, s.samples,
                                       s.data_seed);
  }
  throw ConfigError("unknown problem kind");
}

enum class Sampling { UniformWithReplacement, EpochPartition };

/// Stochastic gradient oracle drawing minibatches from a shared problem.
/// Owns its random stream; one oracle per run.
class MinibatchOracle {
 public:
  struct Draw {
    Vector grad;
    double loss = 0.0;  // mean sampled loss on the batch
  };

  MinibatchOracle(std::shared_ptr<const FiniteSumProblem> problem,
                  std::size_t batch_size, Sampling sampling,
                  std::uint64_t seed)
      : problem_(std::move(problem)),
        batch_(batch_size),
        sampling_(sampling),
        rng_(seed) {
    const std::size_t t = problem_->num_samples();
    if (batch_size == 0) throw ConfigError("batch_size must be > 0");
    if (batch_size > t) throw ConfigError("batch_size must be <= samples");
    if (sampling == Sampling::EpochPartition && t % batch_size != 0)
      throw ConfigError(
          "epoch partition sampling needs batch_size to divide samples");
    idx_.resize(batch_size);
    if (sampling == Sampling::EpochPartition) {
      perm_.resize(t);
      cursor_ = t;  // forces a shuffle on the first draw
    }
  }

  const FiniteSumProblem& problem() const { return *problem_; }
  std::size_t batch_size() const { return batch_; }
  Sampling sampling() const { return sampling_; }
  /// Batches per epoch in EpochPartition mode.
  std::size_t batches_per_epoch() const {
    return problem_->num_samples() / batch_;
  }

  Draw draw(const Vector& x) {
    next_batch();
    Draw d;
    d.loss = problem_->batch_loss_grad(x, idx_, &d.grad);
    return d;
  }

  Vector sample_gradient(const Vector& x) { return draw(x).grad; }

  /// Indices of the most recent batch.
  std::span<const std::size_t> last_batch() const { return idx_; }

 private:
  void next_batch() {
    const std::size_t t = problem_->num_samples();
    if (sampling_ == Sampling::UniformWithReplacement) {
      for (auto& i : idx_) i = rng_.index(t);
      return;
    }
    if (cursor_ + batch_ > t) {
      std::iota(perm_.begin(), perm_.end(), std::size_t{0});
      rng_.shuffle(perm_);
      cursor_ = 0;
    }
    std::copy_n(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_), batch_,
                idx_.begin());
    cursor_ += batch_;
  }

  std::shared_ptr<const FiniteSumProblem> problem_;
  std::size_t batch_;
  Sampling sampling_;
  Rng rng_;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

/// Max over coordinates of |central difference - analytic| / (1 + |analytic|)
/// for the full loss, with per-coordinate step h * (1 + |x_i|).
inline double finite_diff_check(const FiniteSumProblem& p, const Vector& x,
                                double h = 1e-6) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be > 0");
  const Vector g = full_gradient(p, x);
  double worst = 0.0;
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double hi = h * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + hi;
    const double fp = full_loss(p, probe);
    probe[i] = x[i] - hi;
    const double fm = full_loss(p, probe);
    probe[i] = x[i];
    const double fd = (fp - fm) / (2.0 * hi);
    worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
  }
  return worst;
}

}  // namespace scg
