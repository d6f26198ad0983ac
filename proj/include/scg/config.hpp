#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scg/errors.hpp"
#include "scg/optimizer.hpp"
#include "scg/problems.hpp"
#include "scg/schedules.hpp"

namespace scg {

/// Everything a run needs, as read from a config file.
///
/// File format: `key = value` lines grouped under `[problem]`,
/// `[optimizer]`, `[schedule]` and `[run]` headers. `#` starts a comment.
/// Unknown sections or keys are errors. Omitted keys keep the defaults
/// below, which reproduce the SCGAdam-C constant-rate setting on the
/// synthetic logistic problem.
struct RunConfig {
  ProblemSpec problem;
  std::size_t batch_size = 10;
  Sampling sampling = Sampling::UniformWithReplacement;

  PrecondKind precond;
  ScheduleParams schedule;

  std::uint64_t iterations = 1000;
  std::size_t trials = 10;
  std::uint64_t seed = 42;
  std::string out = "out";
  std::vector<std::string> checks;
  unsigned threads = 0;
  std::optional<double> grad_bound;  // overrides the problem's analytic M
};

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> k = {
      "lemma2", "lemma3", "a4", "reductions", "unbiasedness", "convex_links"};
  return k;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"problem.kind",
       [](RunConfig& c, const std::string& v) {
         if (v == "quadratic") c.problem.kind = ProblemKind::Quadratic;
         else if (v == "logistic") c.problem.kind = ProblemKind::Logistic;
         else if (v == "rosenbrock") c.problem.kind = ProblemKind::Rosenbrock;
         else if (v == "mlp") c.problem.kind = ProblemKind::Mlp;
         else throw ConfigError("kind must be quadratic, logistic, rosenbrock or mlp");
       }},
      {"problem.dim",
       [](RunConfig& c, const std::string& v) {
         c.problem.dim = parse_uint(v);
         require(c.problem.dim > 0, "dim must be > 0");
       }},
      {"problem.samples",
       [](RunConfig& c, const std::string& v) {
         c.problem.samples = parse_uint(v);
         require(c.problem.samples > 0, "samples must be > 0");
       }},
      {"problem.data_seed",
       [](RunConfig& c, const std::string& v) { c.problem.data_seed = parse_uint(v); }},
      {"problem.rows",
       [](RunConfig& c, const std::string& v) {
         c.problem.rows = parse_uint(v);
         require(c.problem.rows > 0, "rows must be > 0");
       }},
      {"problem.shift_scale",
       [](RunConfig& c, const std::string& v) {
         c.problem.shift_scale = parse_double(v);
         require(c.problem.shift_scale >= 0.0, "shift_scale must be >= 0");
       }},
      {"problem.inputs",
       [](RunConfig& c, const std::string& v) {
         c.problem.inputs = parse_uint(v);
         require(c.problem.inputs > 0, "inputs must be > 0");
       }},
      {"problem.hidden",
       [](RunConfig& c, const std::string& v) {
         c.problem.hidden = parse_uint(v);
         require(c.problem.hidden > 0, "hidden must be > 0");
       }},
      {"problem.batch_size",
       [](RunConfig& c, const std::string& v) {
         c.batch_size = parse_uint(v);
         require(c.batch_size > 0, "batch_size must be > 0");
       }},
      {"problem.sampling",
       [](RunConfig& c, const std::string& v) {
         if (v == "uniform") c.sampling = Sampling::UniformWithReplacement;
         else if (v == "epoch") c.sampling = Sampling::EpochPartition;
         else throw ConfigError("sampling must be uniform or epoch");
       }},
      {"optimizer.precond",
       [](RunConfig& c, const std::string& v) {
         if (v == "identity") c.precond.variant = PrecondVariant::Identity;
         else if (v == "adammax") c.precond.variant = PrecondVariant::AdamMax;
         else if (v == "amsgrad") c.precond.variant = PrecondVariant::AmsGrad;
         else throw ConfigError("precond must be identity, adammax or amsgrad");
       }},
      {"optimizer.theta",
       [](RunConfig& c, const std::string& v) {
         c.precond.theta = parse_double(v);
         require(c.precond.theta >= 0.0 && c.precond.theta < 1.0,
                 "theta must lie in [0, 1)");
       }},
      {"optimizer.eps",
       [](RunConfig& c, const std::string& v) {
         c.precond.eps = parse_double(v);
         require(c.precond.eps > 0.0, "eps must be > 0");
       }},
      {"schedule.regime",
       [](RunConfig& c, const std::string& v) {
         if (v == "constant") c.schedule.regime = Regime::Constant;
         else if (v == "diminishing") c.schedule.regime = Regime::Diminishing;
         else throw ConfigError("regime must be constant or diminishing");
       }},
      {"schedule.alpha0",
       [](RunConfig& c, const std::string& v) {
         c.schedule.alpha0 = parse_double(v);
         require(c.schedule.alpha0 > 0.0 && c.schedule.alpha0 <= 1.0,
                 "alpha0 must lie in (0, 1]");
       }},
      {"schedule.beta0",
       [](RunConfig& c, const std::string& v) {
         c.schedule.beta0 = parse_double(v);
         require(c.schedule.beta0 >= 0.0 && c.schedule.beta0 < 1.0,
                 "beta0 must lie in [0, 1)");
       }},
      {"schedule.gamma0",
       [](RunConfig& c, const std::string& v) {
         c.schedule.gamma0 = parse_double(v);
         require(c.schedule.gamma0 >= 0.0, "gamma0 must lie in [0, +inf)");
       }},
      {"schedule.delta0",
       [](RunConfig& c, const std::string& v) {
         c.schedule.delta0 = parse_double(v);
         require(c.schedule.delta0 >= 0.0 && c.schedule.delta0 <= 0.5,
                 "delta0 must lie in [0, 1/2]");
       }},
      {"schedule.zeta",
       [](RunConfig& c, const std::string& v) {
         c.schedule.zeta = parse_double(v);
         require(c.schedule.zeta >= 0.0 && c.schedule.zeta < 1.0,
                 "zeta must lie in [0, 1)");
       }},
      {"schedule.eta",
       [](RunConfig& c, const std::string& v) {
         c.schedule.eta = parse_double(v);
         require(c.schedule.eta > 0.0 && c.schedule.eta < 1.0,
                 "eta must lie in (0, 1)");
       }},
      {"schedule.decay_base",
       [](RunConfig& c, const std::string& v) {
         c.schedule.decay_base = parse_double(v);
         require(c.schedule.decay_base > 0.0 && c.schedule.decay_base < 1.0,
                 "decay_base must lie in (0, 1)");
       }},
      {"schedule.cosine_period",
       [](RunConfig& c, const std::string& v) { c.schedule.cosine_period = parse_uint(v); }},
      {"run.iterations",
       [](RunConfig& c, const std::string& v) {
         c.iterations = parse_uint(v);
         require(c.iterations > 0, "iterations must be > 0");
       }},
      {"run.trials",
       [](RunConfig& c, const std::string& v) {
         c.trials = parse_uint(v);
         require(c.trials > 0, "trials must be > 0");
       }},
      {"run.seed",
       [](RunConfig& c, const std::string& v) { c.seed = parse_uint(v); }},
      {"run.out", [](RunConfig& c, const std::string& v) { c.out = v; }},
      {"run.threads",
       [](RunConfig& c, const std::string& v) {
         c.threads = static_cast<unsigned>(parse_uint(v));
       }},
      {"run.grad_bound",
       [](RunConfig& c, const std::string& v) {
         const double m = parse_double(v);
         require(m > 0.0, "grad_bound must be > 0");
         c.grad_bound = m;
       }},
      {"run.checks",
       [](RunConfig& c, const std::string& v) {
         c.checks.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           item = trim(item);
           if (item.empty()) continue;
           bool ok = false;
           for (const auto& k : known_checks()) ok = ok || k == item;
           if (!ok) throw ConfigError("unknown check '" + item + "'");
           c.checks.push_back(item);
         }
       }},
  };
  return table;
}

}  // namespace detail

/// Sets one dotted key (`section.key`). `where` prefixes error messages.
inline void set_config_value(RunConfig& c, const std::string& dotted,
                             const std::string& value,
                             const std::string& where) {
  const auto& table = detail::setters();
  const auto it = table.find(dotted);
  if (it == table.end())
    throw ConfigError(where + ": unknown key '" + dotted + "'");
  try {
    it->second(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": key '" + dotted + "': " + e.what());
  }
}

/// Cross-field validation: everything Algorithm-level ranges require plus
/// problem/batch consistency.
inline void validate_config(const RunConfig& c) {
  HyperSchedule::validate(c.schedule);
  c.precond.validate();
  if (c.batch_size > c.problem.samples)
    throw ConfigError("batch_size must be <= samples");
  if (c.sampling == Sampling::EpochPartition &&
      c.problem.samples % c.batch_size != 0)
    throw ConfigError("epoch sampling needs batch_size to divide samples");
  if (c.problem.kind == ProblemKind::Rosenbrock && c.problem.dim < 2)
    throw ConfigError("rosenbrock needs dim >= 2");
  if (c.problem.kind == ProblemKind::Quadratic &&
      c.problem.rows * c.problem.samples < c.problem.dim)
    throw ConfigError("quadratic needs rows * samples >= dim");
}

inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line =
        detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(where + ": malformed section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "problem" && section != "optimizer" &&
          section != "schedule" && section != "run")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    if (section.empty())
      throw ConfigError(where + ": key outside of any section");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    set_config_value(c, section + "." + key, value, where);
  }
  validate_config(c);
  return c;
}

/// Applies a `section.key=value` override (the CLI's --set).
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  set_config_value(c, detail::trim(assignment.substr(0, eq)),
                   detail::trim(assignment.substr(eq + 1)), "--set");
  validate_config(c);
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Canonical text of every setting that influences results (the output
/// directory, thread count and check list do not). Feeds config_hash().
inline std::string canonical_text(const RunConfig& c) {
  using detail::fmt17;
  std::ostringstream o;
  const char* kinds[] = {"quadratic", "logistic", "rosenbrock", "mlp"};
  o << "problem.kind=" << kinds[static_cast<int>(c.problem.kind)] << '\n'
    << "problem.dim=" << c.problem.dim << '\n'
    << "problem.samples=" << c.problem.samples << '\n'
    << "problem.data_seed=" << c.problem.data_seed << '\n'
    << "problem.rows=" << c.problem.rows << '\n'
    << "problem.shift_scale=" << fmt17(c.problem.shift_scale) << '\n'
    << "problem.inputs=" << c.problem.inputs << '\n'
    << "problem.hidden=" << c.problem.hidden << '\n'
    << "problem.batch_size=" << c.batch_size << '\n'
    << "problem.sampling="
    << (c.sampling == Sampling::EpochPartition ? "epoch" : "uniform") << '\n'
    << "optimizer.precond=" << to_string(c.precond.variant) << '\n'
    << "optimizer.theta=" << fmt17(c.precond.theta) << '\n'
    << "optimizer.eps=" << fmt17(c.precond.eps) << '\n'
    << "schedule.regime="
    << (c.schedule.regime == Regime::Constant ? "constant" : "diminishing")
    << '\n'
    << "schedule.alpha0=" << fmt17(c.schedule.alpha0) << '\n'
    << "schedule.beta0=" << fmt17(c.schedule.beta0) << '\n'
    << "schedule.gamma0=" << fmt17(c.schedule.gamma0) << '\n'
    << "schedule.delta0=" << fmt17(c.schedule.delta0) << '\n'
    << "schedule.zeta=" << fmt17(c.schedule.zeta) << '\n'
    << "schedule.eta=" << fmt17(c.schedule.eta) << '\n'
    << "schedule.decay_base=" << fmt17(c.schedule.decay_base) << '\n'
    << "schedule.cosine_period=" << c.schedule.cosine_period << '\n'
    << "run.iterations=" << c.iterations << '\n'
    << "run.trials=" << c.trials << '\n'
    << "run.seed=" << c.seed << '\n'
    << "run.grad_bound="
    << (c.grad_bound ? fmt17(*c.grad_bound) : std::string("none")) << '\n';
  return o.str();
}

/// 64-bit FNV-1a of canonical_text().
inline std::uint64_t config_hash(const RunConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_text(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace scg
