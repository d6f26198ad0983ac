#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scg/config.hpp"
#include "scg/conformance.hpp"
#include "scg/diagnostics.hpp"
#include "scg/problems.hpp"
#include "scg/runner.hpp"

namespace scg {

inline constexpr const char* kCsvHeader =
    "n,f,grad_norm,V,avg_V,m_sq,G_sq,h_max,h_min,h_sum,D_hat,f_avg_iterate,"
    "bound_t1,bound_t2";

inline constexpr const char* kSummarySchema = "scg-summary/1";

/// Problem, reference point and trial template built from a config.
struct Experiment {
  RunConfig config;
  std::shared_ptr<const FiniteSumProblem> problem;
  std::optional<double> grad_bound;
  TrialSpec spec;
};

inline bool wants_check(const RunConfig& c, const std::string& name) {
  for (const auto& k : c.checks) {
    if (k == name) return true;
  }
  return false;
}

inline Experiment make_experiment(const RunConfig& c) {
  validate_config(c);
  Experiment e;
  e.config = c;
  e.problem = make_problem(c.problem);
  e.grad_bound = c.grad_bound ? c.grad_bound : e.problem->grad_bound();
  e.spec.problem = e.problem;
  e.spec.batch_size = c.batch_size;
  e.spec.sampling = c.sampling;
  e.spec.schedule = HyperSchedule(c.schedule);
  e.spec.precond = c.precond;
  e.spec.iterations = c.iterations;
  e.spec.x_ref = reference_point(*e.problem);
  e.spec.record_diag = wants_check(c, "a4");
  e.spec.config_hash = config_hash(c);
  return e;
}

/// Theorem-1 bound applies to flat schedules without cosine annealing,
/// the Theorem-2 bound to the diminishing family.
struct BoundColumns {
  std::optional<BoundConstants> constants;
  ScheduleParams schedule;
  std::size_t dim = 0;

  std::optional<double> t1(std::uint64_t n) const {
    if (!constants || schedule.regime != Regime::Constant ||
        schedule.cosine_period > 0)
      return std::nullopt;
    return theorem1_rhs(*constants, schedule.alpha0, schedule.beta0,
                        schedule.delta0, n, dim);
  }
  std::optional<double> t2(std::uint64_t n) const {
    if (!constants || schedule.regime != Regime::Diminishing)
      return std::nullopt;
    return theorem2_rhs(*constants, schedule.eta, schedule.beta0,
                        schedule.delta0, n, dim);
  }
};

inline void write_trace_csv(std::ostream& out,
                            const std::vector<TraceRow>& rows,
                            const BoundColumns& bounds) {
  using detail::fmt17;
  auto opt = [](std::optional<double> v) {
    return v ? fmt17(*v) : std::string("NA");
  };
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << fmt17(r.f) << ',' << fmt17(r.grad_norm) << ','
        << fmt17(r.V) << ',' << fmt17(r.avg_V) << ',' << fmt17(r.m_sq) << ','
        << fmt17(r.G_sq) << ',' << fmt17(r.h_max) << ',' << fmt17(r.h_min)
        << ',' << fmt17(r.h_sum) << ',' << fmt17(r.D_hat) << ','
        << fmt17(r.f_avg_iterate) << ',' << opt(bounds.t1(r.n)) << ','
        << opt(bounds.t2(r.n)) << '\n';
  }
}

/// Machine-readable outcome of a run.
struct Summary {
  std::string schema = kSummarySchema;
  std::string config_hash;
  std::vector<CheckReport> checks;
  std::optional<double> slope_avg_V;
  std::optional<double> margin_t1;  // min over logged n >= 10 of rhs - avg_V
  std::optional<double> margin_t2;
  std::optional<double> final_f;
  std::optional<double> final_avg_V;
};

inline nlohmann::json to_json(const Summary& s) {
  nlohmann::json j;
  j["schema"] = s.schema;
  j["config_hash"] = s.config_hash;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : s.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"worst_violation", c.worst_violation},
                           {"worst_step", c.worst_step},
                           {"trials", c.trials},
                           {"tolerance", c.tolerance},
                           {"note", c.note}});
  }
  auto put = [&j](const char* k, const std::optional<double>& v) {
    j[k] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  put("slope_avg_V", s.slope_avg_V);
  put("margin_theorem1", s.margin_t1);
  put("margin_theorem2", s.margin_t2);
  put("final_f", s.final_f);
  put("final_avg_V", s.final_avg_V);
  return j;
}

inline Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  s.schema = j.at("schema").get<std::string>();
  if (s.schema != kSummarySchema)
    throw ConfigError("unsupported summary schema '" + s.schema + "'");
  s.config_hash = j.value("config_hash", std::string());
  for (const auto& c : j.at("checks")) {
    CheckReport r;
    r.name = c.at("name").get<std::string>();
    r.pass = c.at("pass").get<bool>();
    r.worst_violation = c.at("worst_violation").is_null()
                            ? -std::numeric_limits<double>::infinity()
                            : c.at("worst_violation").get<double>();
    r.worst_step = c.at("worst_step").get<std::uint64_t>();
    r.trials = c.at("trials").get<std::size_t>();
    r.tolerance = c.at("tolerance").get<double>();
    r.note = c.value("note", std::string());
    s.checks.push_back(r);
  }
  auto get = [&j](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  s.slope_avg_V = get("slope_avg_V");
  s.margin_t1 = get("margin_theorem1");
  s.margin_t2 = get("margin_theorem2");
  s.final_f = get("final_f");
  s.final_avg_V = get("final_avg_V");
  return s;
}

inline void emit_summary(const std::filesystem::path& path, const Summary& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json(s).dump(2) << '\n';
}

inline Summary read_summary(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return summary_from_json(nlohmann::json::parse(f));
}

inline void print_check_table(std::ostream& out,
                              const std::vector<CheckReport>& reports) {
  out << std::left << std::setw(22) << "check" << std::setw(6) << "pass"
      << std::setw(16) << "worst" << std::setw(10) << "at" << std::setw(12)
      << "tolerance" << "note\n";
  for (const auto& r : reports) {
    std::ostringstream worst;
    worst << std::setprecision(6) << r.worst_violation;
    out << std::left << std::setw(22) << r.name << std::setw(6)
        << (r.pass ? "yes" : "NO") << std::setw(16) << worst.str()
        << std::setw(10) << r.worst_step << std::setw(12) << r.tolerance
        << r.note << '\n';
  }
}

/// Runs the configured checks on a finished set of trials. Checks that do
/// not apply to the problem (convexity links on a nonconvex problem, moment
/// bounds without any M) are skipped with a note on stderr.
inline std::vector<CheckReport> run_checks(const Experiment& e,
                                           const std::vector<Trace>& traces,
                                           const BoundConstants& c,
                                           std::ostream& log) {
  std::vector<CheckReport> out;
  const RunConfig& cfg = e.config;
  for (const auto& name : cfg.checks) {
    if (name == "lemma2") {
      out.push_back(check_lemma2(traces, c.Mtilde2));
    } else if (name == "lemma3") {
      out.push_back(check_lemma3(traces, c.Mhat2, e.spec.schedule));
      if (!out.back().note.empty()) log << out.back().note << '\n';
    } else if (name == "a4") {
      CheckReport all{.name = "a4", .trials = traces.size(), .tolerance = 0.0};
      for (const auto& t : traces) {
        const CheckReport r = check_A4(t);
        all.observe(r.worst_violation, r.worst_step);
      }
      all.pass = all.worst_violation <= 0.0;
      out.push_back(all);
    } else if (name == "reductions") {
      out.push_back(check_reductions(e.spec, cfg.seed,
                                     std::min<std::uint64_t>(cfg.iterations, 1000)));
    } else if (name == "unbiasedness") {
      out.push_back(check_unbiasedness(e.problem, e.problem->initial_point(),
                                       cfg.batch_size, cfg.sampling, cfg.seed));
    } else if (name == "convex_links") {
      if (!e.problem->convex() || !e.problem->optimum()) {
        log << "skipping convex_links: problem is not convex with known optimum\n";
        continue;
      }
      CheckReport all{.name = "convex_links", .trials = traces.size(),
                      .tolerance = 1e-9};
      for (const auto& t : traces) {
        const CheckReport r = check_convex_links(t, *e.problem);
        all.observe(r.worst_violation, r.worst_step);
      }
      out.push_back(all.finish());
    }
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

/// Slope of the trial-mean running average of V over the last two decades
/// of the run (or whatever part of it lies beyond n = 10).
inline std::optional<double> avg_v_slope(const std::vector<TraceRow>& mean) {
  if (mean.empty()) return std::nullopt;
  const double n_hi = static_cast<double>(mean.back().n);
  const double n_lo = std::max(10.0, n_hi / 100.0);
  std::vector<std::pair<double, double>> series;
  for (const auto& r : mean) series.emplace_back(static_cast<double>(r.n), r.avg_V);
  try {
    return fit_rate(series, n_lo, n_hi);
  } catch (const MetricError&) {
    return std::nullopt;
  }
}

inline std::optional<double> bound_margin(
    const std::vector<TraceRow>& mean,
    const std::function<std::optional<double>(std::uint64_t)>& rhs) {
  std::optional<double> m;
  for (const auto& r : mean) {
    if (r.n < 10) continue;
    const auto b = rhs(r.n);
    if (!b) return std::nullopt;
    const double gap = *b - r.avg_V;
    m = m ? std::min(*m, gap) : gap;
  }
  return m;
}

struct RunOutcome {
  int exit_code = 0;
  Summary summary;
  std::vector<Trace> traces;
  BoundConstants constants;
};

/// Executes the trials, writes trial_<k>.csv, aggregate.csv and
/// summary.json into out_dir (when `write_csv`), and evaluates the requested
/// checks. Exit code 0 when every check passes, 2 otherwise.
inline RunOutcome execute(const RunConfig& cfg,
                          const std::filesystem::path& out_dir,
                          bool write_csv, std::ostream& log) {
  const Experiment e = make_experiment(cfg);
  RunOutcome res;
  if (e.spec.schedule.params().gamma0 > 1.0 && wants_check(cfg, "lemma3"))
    log << "warning: gamma0 > 1; the lemma3 bound assumes gamma_n <= 1\n";
  res.traces = run_trials(e.spec, cfg.trials, cfg.seed, cfg.threads);
  res.constants = estimate_constants(res.traces, cfg.schedule, e.grad_bound);
  const std::vector<TraceRow> mean = trial_mean(res.traces);
  const BoundColumns cols{res.constants, cfg.schedule, e.problem->dim()};

  std::filesystem::create_directories(out_dir);
  if (write_csv) {
    for (std::size_t k = 0; k < res.traces.size(); ++k) {
      std::ofstream f(out_dir / ("trial_" + std::to_string(k) + ".csv"));
      write_trace_csv(f, res.traces[k].rows, cols);
    }
    std::ofstream f(out_dir / "aggregate.csv");
    write_trace_csv(f, mean, cols);
  }

  Summary& s = res.summary;
  s.config_hash = hex64(e.spec.config_hash);
  s.checks = run_checks(e, res.traces, res.constants, log);
  s.slope_avg_V = avg_v_slope(mean);
  s.margin_t1 = bound_margin(mean, [&](std::uint64_t n) { return cols.t1(n); });
  s.margin_t2 = bound_margin(mean, [&](std::uint64_t n) { return cols.t2(n); });
  s.final_f = mean.back().f;
  s.final_avg_V = mean.back().avg_V;
  emit_summary(out_dir / "summary.json", s);

  for (const auto& r : s.checks) {
    if (!r.pass) res.exit_code = 2;
  }
  return res;
}

struct GridPoint {
  std::string value;
  double final_f = 0.0;
  double final_avg_V = 0.0;
};

/// Runs the trials once per candidate value of `param` and ranks the values
/// by trial-mean final training loss. Writes gridsearch.csv.
inline std::vector<GridPoint> gridsearch(const RunConfig& base,
                                         const std::string& param,
                                         const std::vector<std::string>& values,
                                         const std::filesystem::path& out_dir) {
  std::vector<GridPoint> out;
  for (const auto& v : values) {
    RunConfig c = base;
    set_config_value(c, param, v, "--values");
    validate_config(c);
    c.checks.clear();
    const Experiment e = make_experiment(c);
    const auto traces = run_trials(e.spec, c.trials, c.seed, c.threads);
    const auto mean = trial_mean(traces);
    out.push_back({v, mean.back().f, mean.back().avg_V});
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir / "gridsearch.csv");
  f << "value,final_f,final_avg_V\n";
  for (const auto& g : out) {
    f << g.value << ',' << detail::fmt17(g.final_f) << ','
      << detail::fmt17(g.final_avg_V) << '\n';
  }
  return out;
}

}  // namespace scg
