// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "scg/scg.hpp"

using namespace scg;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass,
            const std::string& detail) {
  std::printf("%s  C%-2d %-44s %s\n", pass ? "PASS" : "FAIL", id,
              title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::shared_ptr<const FiniteSumProblem> logistic20() {
  static const auto p = make_problem(
      {.kind = ProblemKind::Logistic, .dim = 20, .samples = 1000});
  return p;
}

ScheduleParams diminishing() {
  ScheduleParams sp;
  sp.regime = Regime::Diminishing;
  sp.alpha0 = 1.0;
  sp.eta = 0.5;
  sp.beta0 = 0.9;
  sp.gamma0 = 0.1;
  sp.delta0 = 0.5;
  sp.decay_base = 0.5;
  sp.zeta = 0.9;
  return sp;
}

// alpha = 1e-3, beta = zeta = 0.9, theta = 0.999, gamma = 0.1, delta = 1e-3
ScheduleParams scgadam_c() {
  ScheduleParams sp;
  sp.regime = Regime::Constant;
  sp.alpha0 = 1e-3;
  sp.beta0 = 0.9;
  sp.zeta = 0.9;
  sp.gamma0 = 0.1;
  sp.delta0 = 1e-3;
  return sp;
}

TrialSpec logistic_trial(const ScheduleParams& sp, std::uint64_t iters) {
  TrialSpec t;
  t.problem = logistic20();
  t.batch_size = 10;
  t.schedule = HyperSchedule(sp);
  t.precond = PrecondKind{PrecondVariant::AdamMax, 0.999, 1e-8};
  t.iterations = iters;
  t.x_ref = t.problem->optimum()->x;
  return t;
}

struct Domination {
  int violations = 0;
  double min_gap = INFINITY;
  std::uint64_t worst_n = 0;
};

Domination dominate(const std::vector<TraceRow>& mean,
                    const std::function<double(std::uint64_t)>& rhs) {
  Domination d;
  for (const auto& r : mean) {
    if (r.n < 10) continue;
    const double gap = rhs(r.n) - r.avg_V;
    if (gap < 0.0) ++d.violations;
    if (gap < d.min_gap) {
      d.min_gap = gap;
      d.worst_n = r.n;
    }
  }
  return d;
}

Vector random_point(const FiniteSumProblem& p, Rng& rng, double scale) {
  Vector x = p.initial_point();
  if (p.name() == "rosenbrock") x.fill(1.0);
  for (auto& v : x) v += scale * rng.normal();
  return x;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = logistic20();
  const double m = *p->grad_bound();
  const double m2 = m * m;
  const std::size_t K = 10;

  // C1 / C3 / C4 / C9 share the diminishing run.
  const ScheduleParams dim_sp = diminishing();
  const TrialSpec dim_spec = logistic_trial(dim_sp, 100000);
  const std::vector<Trace> dim_traces = run_trials(dim_spec, K, 42, 0);
  const std::vector<TraceRow> dim_mean = trial_mean(dim_traces);

  {
    std::vector<std::pair<double, double>> s;
    for (const auto& r : dim_mean) s.emplace_back(double(r.n), r.avg_V);
    const double slope = fit_rate(s, 1e3, 1e5);
    report(1, "diminishing-rate convergence order",
           slope >= -0.65 && slope <= -0.35,
           fmt("slope %.4f in [-0.65, -0.35]", slope));
  }

  const TrialSpec c_spec = logistic_trial(scgadam_c(), 10000);
  const std::vector<Trace> c_traces = run_trials(c_spec, K, 42, 0);
  const std::vector<TraceRow> c_mean = trial_mean(c_traces);
  {
    const BoundConstants c = estimate_constants(c_traces, scgadam_c(), m);
    const ScheduleParams sp = scgadam_c();
    const Domination d = dominate(c_mean, [&](std::uint64_t n) {
      return theorem1_rhs(c, sp.alpha0, sp.beta0, sp.delta0, n, p->dim());
    });
    report(2, "constant-rate bound domination", d.violations == 0,
           "violations " + std::to_string(d.violations) +
               fmt(", min gap %.4g", d.min_gap) + " at n=" +
               std::to_string(d.worst_n));
  }
  {
    const BoundConstants c = estimate_constants(dim_traces, dim_sp, m);
    const Domination d = dominate(dim_mean, [&](std::uint64_t n) {
      return theorem2_rhs(c, dim_sp.eta, dim_sp.beta0, dim_sp.delta0, n,
                          p->dim());
    });
    report(3, "diminishing-rate bound domination", d.violations == 0,
           "violations " + std::to_string(d.violations) +
               fmt(", min gap %.4g", d.min_gap) + " at n=" +
               std::to_string(d.worst_n));
  }
  {
    const CheckReport a2 = check_lemma2(dim_traces, m2);
    const CheckReport a3 = check_lemma3(dim_traces, m2, dim_spec.schedule);
    const CheckReport b2 = check_lemma2(c_traces, m2);
    const CheckReport b3 = check_lemma3(c_traces, m2, c_spec.schedule);
    const bool controls_fail =
        !check_lemma2(dim_traces, m2 / 1000.0).pass &&
        !check_lemma3(dim_traces, m2 / 1000.0 / 16.0, dim_spec.schedule)
             .pass &&
        !check_lemma2(c_traces, m2 / 1000.0).pass &&
        !check_lemma3(c_traces, m2 / 1000.0 / 16.0, c_spec.schedule).pass;
    const double worst = std::max({a2.worst_violation, a3.worst_violation,
                                   b2.worst_violation, b3.worst_violation});
    report(4, "moment bounds on momentum and direction",
           a2.pass && a3.pass && b2.pass && b3.pass && controls_fail,
           fmt("worst excess %.4g", worst) +
               (controls_fail ? ", controls fail" : ", CONTROL PASSED"));
  }
  {
    bool ok = true;
    double worst = -INFINITY;
    for (auto v : {PrecondVariant::AdamMax, PrecondVariant::AmsGrad}) {
      TrialSpec t = logistic_trial(scgadam_c(), 10000);
      t.precond.variant = v;
      t.record_diag = true;
      const CheckReport r = check_A4(run_trial(t, 42));
      ok = ok && r.pass;
      worst = std::max(worst, r.worst_violation);
    }
    TrialSpec mut = logistic_trial(scgadam_c(), 10000);
    mut.record_diag = true;
    mut.precond_override = [](PrecondState& ps, const Vector& dir,
                              std::uint64_t n) {
      const double theta = 0.999;
      const double c = 1.0 - std::pow(theta, double(n) + 1.0);
      Vector h(dir.size());
      for (std::size_t i = 0; i < dir.size(); ++i) {
        ps.v[i] = theta * ps.v[i] + (1.0 - theta) * dir[i] * dir[i];
        h[i] = std::sqrt(ps.v[i] / c) + 1e-8;
      }
      return DiagPD(std::move(h));
    };
    const bool control_fails = !check_A4(run_trial(mut, 42)).pass;
    report(5, "diagonal monotonicity", ok && control_fails,
           fmt("largest decrease %.3g", worst) +
               (control_fails ? ", mutation fails" : ", MUTATION PASSED"));
  }
  {
    const CheckReport r = check_reductions(c_spec, 42, 1000);
    report(6, "reduction equivalences", r.pass,
           fmt("max relative gap %.3g", r.worst_violation) + ", " + r.note);
  }
  {
    double worst = 0.0;
    bool ok = true;
    Rng rng(2024);
    for (auto kind : {ProblemKind::Quadratic, ProblemKind::Logistic,
                      ProblemKind::Rosenbrock, ProblemKind::Mlp}) {
      const auto q = make_problem({.kind = kind});
      for (int k = 0; k < 5; ++k) {
        const CheckReport r = check_unbiasedness(
            q, random_point(*q, rng, 0.5), 10, Sampling::EpochPartition,
            100 + k);
        ok = ok && r.pass;
        worst = std::max(worst, r.worst_violation);
      }
    }
    report(7, "epoch-partition unbiasedness", ok,
           fmt("max relative error %.3g (tol 1e-10)", worst));
  }
  {
    double worst = 0.0;
    Rng rng(7);
    for (auto kind : {ProblemKind::Quadratic, ProblemKind::Logistic,
                      ProblemKind::Rosenbrock, ProblemKind::Mlp}) {
      const auto q = make_problem({.kind = kind});
      worst = std::max(worst, finite_diff_check(*q, q->initial_point()));
      for (int k = 0; k < 2; ++k)
        worst = std::max(worst,
                         finite_diff_check(*q, random_point(*q, rng, 0.5)));
    }
    report(8, "gradient correctness", worst <= 1e-5,
           fmt("max relative error %.3g (tol 1e-5)", worst));
  }
  {
    double worst = -INFINITY;
    bool ok = true;
    for (const auto& t : dim_traces) {
      const CheckReport r = check_convex_links(t, *p);
      ok = ok && r.pass;
      worst = std::max(worst, r.worst_violation);
    }
    TrialSpec qt = logistic_trial(scgadam_c(), 10000);
    qt.problem = make_problem({.kind = ProblemKind::Quadratic});
    qt.x_ref = qt.problem->optimum()->x;
    for (const auto& t : run_trials(qt, 3, 42, 0)) {
      const CheckReport r = check_convex_links(t, *qt.problem);
      ok = ok && r.pass;
      worst = std::max(worst, r.worst_violation);
    }
    const double fs = p->optimum()->f;
    double r3 = 0.0, r5 = 0.0;
    for (const auto& t : dim_traces) {
      r3 += regret_avg(t, fs, 1000);
      r5 += regret_avg(t, fs, 100000);
    }
    const double ratio = r5 / r3;
    report(9, "convexity links and average regret",
           ok && r3 > 0.0 && ratio <= 0.2,
           fmt("worst excess %.3g", worst) + fmt(", R ratio %.4f <= 0.2", ratio));
  }
  {
    int reached = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TrialSpec t;
      t.problem = make_problem(
          {.kind = ProblemKind::Mlp, .samples = 512, .data_seed = seed});
      t.batch_size = 10;
      t.schedule = HyperSchedule(scgadam_c());
      t.iterations = 5000;
      t.x_ref = Vector(t.problem->dim());
      const double f0 = full_loss(*t.problem, t.problem->initial_point());
      const Trace tr = run_trial(t, seed);
      double best = INFINITY;
      for (const auto& r : tr.rows) best = std::min(best, r.f);
      const double ratio = best / f0;
      worst = std::max(worst, ratio);
      if (ratio <= 0.1) ++reached;
    }
    report(10, "nonconvex training", reached == 10,
           std::to_string(reached) + "/10 seeds" +
               fmt(", worst loss ratio %.4f <= 0.1", worst));
  }
  {
    RunConfig cfg = parse_config(
        "[problem]\ndim = 10\nsamples = 200\n[run]\niterations = 2000\n"
        "trials = 4\n");
    const fs::path base = fs::temp_directory_path() / "scg_acceptance_det";
    fs::remove_all(base);
    std::ostringstream log;
    cfg.threads = 1;
    execute(cfg, base / "a", true, log);
    cfg.threads = 4;
    execute(cfg, base / "b", true, log);
    bool same = true;
    for (const char* f : {"trial_0.csv", "trial_1.csv", "trial_2.csv",
                          "trial_3.csv", "aggregate.csv"}) {
      const std::string a = slurp(base / "a" / f);
      same = same && !a.empty() && a == slurp(base / "b" / f);
    }
    fs::remove_all(base);
    report(11, "byte-identical CSV output", same,
           same ? "5 files identical" : "files differ");
  }

  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  std::printf("%d criteria failed, %.1f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
