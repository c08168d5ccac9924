#include "vpcl/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vpcl {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::MicroVsMeanfield: return "micro-vs-meanfield";
    case ExperimentKind::ClassProbability: return "class-probability";
    case ExperimentKind::Lln: return "lln";
    case ExperimentKind::Cardinality: return "cardinality";
    case ExperimentKind::CutoffConvergence: return "cutoff-convergence";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (auto k : {ExperimentKind::MicroVsMeanfield, ExperimentKind::ClassProbability, ExperimentKind::Lln,
                 ExperimentKind::Cardinality, ExperimentKind::CutoffConvergence})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

ModelParams ExperimentConfig::model(std::int64_t particles) const {
  ModelParams m = ModelParams::with_beta(particles, beta, sign, sigma, horizon);
  m.main_theorem_regime = main_theorem_regime;
  return m;
}

TrendSpec ExperimentConfig::trend_spec() const {
  TrendSpec s;
  s.density = density;
  s.beta = beta;
  s.sigma = sigma;
  s.sign = sign;
  s.horizon = horizon;
  s.min_steps = min_steps;
  s.reference_multiplier = reference_multiplier;
  s.reference_stride = reference_stride;
  s.seed = base_seed;
  s.threads = threads;
  return s;
}

LlnSpec ExperimentConfig::lln_spec() const {
  LlnSpec s;
  s.functional = lln.functional;
  s.density = density;
  s.beta = beta;
  s.sigma = sigma;
  s.sign = sign;
  s.horizon = horizon;
  s.steps = (min_steps + reference_stride - 1) / reference_stride * reference_stride;
  s.reference_multiplier = reference_multiplier;
  s.reference_stride = reference_stride;
  s.integral_multiplier = lln.integral_multiplier;
  s.seed = base_seed;
  s.threads = threads;
  return s;
}

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string out;
  for (const auto& i : issues) {
    if (!out.empty()) out += '\n';
    out += i.line > 0 ? "line " + std::to_string(i.line) + ": " + i.message : i.message;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

template <typename T>
T parse_integer(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s) {
  auto one = [&s](std::string_view part) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty())
      throw ConfigError("expected a real number, got '" + s + "'");
    return v;
  };
  const std::size_t slash = s.find('/');
  if (slash == std::string::npos) return one(s);
  const double den = one(trim(std::string_view(s).substr(slash + 1)));
  if (den == 0.0) throw ConfigError("division by zero in '" + s + "'");
  return one(trim(std::string_view(s).substr(0, slash))) / den;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::vector<T> parse_int_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    const std::size_t dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_integer<T>(item));
      continue;
    }
    const T a = parse_integer<T>(trim(std::string_view(item).substr(0, dots)));
    const T b = parse_integer<T>(trim(std::string_view(item).substr(dots + 2)));
    if (b < a) throw ConfigError("empty range '" + item + "'");
    if (b - a > 1000000) throw ConfigError("range '" + item + "' too long");
    for (T v = a;; ++v) {
      out.push_back(v);
      if (v == b) break;
    }
  }
  return out;
}

// Runs of three or more consecutive values print as a..b.
template <typename T>
std::string fmt_int_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[j] + 1) ++j;
    if (!out.empty()) out += ", ";
    if (j - i >= 2) {
      out += std::to_string(v[i]) + ".." + std::to_string(v[j]);
      i = j + 1;
    } else {
      out += std::to_string(v[i]);
      ++i;
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_real(item));
  return out;
}

std::string fmt_real_list(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ", ") + fmt_real(x);
  return out;
}

std::string fmt_snapshots(SnapshotMode m) {
  switch (m) {
    case SnapshotMode::None: return "none";
    case SnapshotMode::Endpoints: return "endpoints";
    case SnapshotMode::Full: return "full";
  }
  return "none";
}

SnapshotMode parse_snapshots(const std::string& s) {
  if (s == "none") return SnapshotMode::None;
  if (s == "endpoints") return SnapshotMode::Endpoints;
  if (s == "full") return SnapshotMode::Full;
  throw ConfigError("snapshots must be none, endpoints or full");
}

std::string fmt_functional(LlnFunctional f) {
  switch (f) {
    case LlnFunctional::Zero: return "zero";
    case LlnFunctional::HalfSpace: return "half-space";
    case LlnFunctional::CutoffForce: return "cutoff-force";
  }
  return "zero";
}

LlnFunctional parse_functional(const std::string& s) {
  if (s == "zero") return LlnFunctional::Zero;
  if (s == "half-space") return LlnFunctional::HalfSpace;
  if (s == "cutoff-force") return LlnFunctional::CutoffForce;
  throw ConfigError("functional must be zero, half-space or cutoff-force");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
  bool hashed = true;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto real = [&f](const char* sec, const char* key, double ExperimentConfig::*member) {
      f.push_back({sec, key, [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_real(v); },
                   [member](const ExperimentConfig& c) { return fmt_real(c.*member); }});
    };
    auto integer = [&f](const char* sec, const char* key, std::int64_t ExperimentConfig::*member) {
      f.push_back({sec, key,
                   [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_integer<std::int64_t>(v); },
                   [member](const ExperimentConfig& c) { return std::to_string(c.*member); }});
    };

    f.push_back({"experiment", "kind",
                 [](ExperimentConfig& c, const std::string& v) { c.kind = experiment_kind_from_string(v); },
                 [](const ExperimentConfig& c) { return to_string(c.kind); }});
    f.push_back({"experiment", "n",
                 [](ExperimentConfig& c, const std::string& v) { c.n = parse_int_list<std::int64_t>(v); },
                 [](const ExperimentConfig& c) { return fmt_int_list(c.n); }});
    f.push_back({"experiment", "seeds",
                 [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_int_list<std::uint64_t>(v); },
                 [](const ExperimentConfig& c) { return fmt_int_list(c.seeds); }});
    f.push_back({"experiment", "base_seed",
                 [](ExperimentConfig& c, const std::string& v) { c.base_seed = parse_integer<std::uint64_t>(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.base_seed); }});
    f.push_back({"experiment", "output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const ExperimentConfig& c) { return c.output_dir; }, false});
    f.push_back({"experiment", "threads",
                 [](ExperimentConfig& c, const std::string& v) { c.threads = parse_integer<int>(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.threads); }, false});
    f.push_back({"experiment", "snapshots",
                 [](ExperimentConfig& c, const std::string& v) { c.snapshots = parse_snapshots(v); },
                 [](const ExperimentConfig& c) { return fmt_snapshots(c.snapshots); }});

    real("model", "beta", &ExperimentConfig::beta);
    real("model", "sigma", &ExperimentConfig::sigma);
    f.push_back({"model", "sign", [](ExperimentConfig& c, const std::string& v) { c.sign = parse_integer<int>(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.sign); }});
    real("model", "horizon", &ExperimentConfig::horizon);
    f.push_back({"model", "main_theorem_regime",
                 [](ExperimentConfig& c, const std::string& v) { c.main_theorem_regime = parse_bool(v); },
                 [](const ExperimentConfig& c) { return fmt_bool(c.main_theorem_regime); }});

    f.push_back({"density", "kind",
                 [](ExperimentConfig& c, const std::string& v) { c.density.kind = density_kind_from_string(v); },
                 [](const ExperimentConfig& c) { return to_string(c.density.kind); }});
    auto dreal = [&f](const char* key, double DensityModel::*member) {
      f.push_back({"density", key,
                   [member](ExperimentConfig& c, const std::string& v) { c.density.*member = parse_real(v); },
                   [member](const ExperimentConfig& c) { return fmt_real(c.density.*member); }});
    };
    dreal("position_scale", &DensityModel::position_scale);
    dreal("velocity_scale", &DensityModel::velocity_scale);
    f.push_back({"density", "bump_order",
                 [](ExperimentConfig& c, const std::string& v) { c.density.bump_order = parse_integer<int>(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.density.bump_order); }});
    dreal("tail_exponent", &DensityModel::tail_exponent);
    dreal("envelope_c", &DensityModel::envelope_c);
    dreal("envelope_delta", &DensityModel::envelope_delta);

    integer("integrator", "min_steps", &ExperimentConfig::min_steps);

    f.push_back({"meanfield", "backend",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "radial-shell") c.backend = MeanFieldBackend::RadialShell;
                   else if (v == "reference-ensemble") c.backend = MeanFieldBackend::ReferenceEnsemble;
                   else throw ConfigError("backend must be radial-shell or reference-ensemble");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.backend == MeanFieldBackend::RadialShell ? "radial-shell" : "reference-ensemble");
                 }});
    f.push_back({"meanfield", "precision",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "double") c.precision = SumPrecision::Double;
                   else if (v == "single") c.precision = SumPrecision::Single;
                   else throw ConfigError("precision must be double or single");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.precision == SumPrecision::Double ? "double" : "single");
                 }});
    integer("meanfield", "reference_multiplier", &ExperimentConfig::reference_multiplier);
    integer("meanfield", "reference_stride", &ExperimentConfig::reference_stride);

    const char* cp = "class-probability";
    f.push_back({cp, "classes",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v != "cover" && v != "schedule" && v != "explicit")
                     throw ConfigError("classes must be cover, schedule or explicit");
                   c.class_probability.classes = v;
                 },
                 [](const ExperimentConfig& c) { return c.class_probability.classes; }});
    auto cpreal = [&f, cp](const char* key, double ClassProbabilityOptions::*member) {
      f.push_back({cp, key,
                   [member](ExperimentConfig& c, const std::string& v) { c.class_probability.*member = parse_real(v); },
                   [member](const ExperimentConfig& c) { return fmt_real(c.class_probability.*member); }});
    };
    auto cpint = [&f, cp](const char* key, std::int64_t ClassProbabilityOptions::*member) {
      f.push_back({cp, key,
                   [member](ExperimentConfig& c, const std::string& v) {
                     c.class_probability.*member = parse_integer<std::int64_t>(v);
                   },
                   [member](const ExperimentConfig& c) { return std::to_string(c.class_probability.*member); }});
    };
    cpreal("delta", &ClassProbabilityOptions::delta);
    cpint("pairs", &ClassProbabilityOptions::pairs);
    cpint("batch", &ClassProbabilityOptions::batch);
    f.push_back({cp, "flow",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "mean-field") c.class_probability.mean_field = true;
                   else if (v == "free") c.class_probability.mean_field = false;
                   else throw ConfigError("flow must be mean-field or free");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.class_probability.mean_field ? "mean-field" : "free");
                 }});
    auto fixed = [&f, cp](const char* key, double CollisionClass::*member) {
      f.push_back({cp, key,
                   [member](ExperimentConfig& c, const std::string& v) {
                     c.class_probability.fixed.*member = v == "inf" ? kInf : parse_real(v);
                   },
                   [member](const ExperimentConfig& c) {
                     const double x = c.class_probability.fixed.*member;
                     return std::isinf(x) ? std::string("inf") : fmt_real(x);
                   }});
    };
    fixed("r_min", &CollisionClass::r_min);
    fixed("r_max", &CollisionClass::r_max);
    fixed("v_min", &CollisionClass::v_min);
    fixed("v_max", &CollisionClass::v_max);
    fixed("t1", &CollisionClass::t1);
    fixed("t2", &CollisionClass::t2);
    cpreal("c_frozen", &ClassProbabilityOptions::c_frozen);
    cpreal("min_fraction", &ClassProbabilityOptions::min_fraction);

    f.push_back({"lln", "functional",
                 [](ExperimentConfig& c, const std::string& v) { c.lln.functional = parse_functional(v); },
                 [](const ExperimentConfig& c) { return fmt_functional(c.lln.functional); }});
    f.push_back({"lln", "integral_multiplier",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.lln.integral_multiplier = parse_integer<std::int64_t>(v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.lln.integral_multiplier); }});

    const char* co = "cutoff-convergence";
    f.push_back({co, "cuts", [](ExperimentConfig& c, const std::string& v) { c.cutoff.cuts = parse_real_list(v); },
                 [](const ExperimentConfig& c) { return fmt_real_list(c.cutoff.cuts); }});
    f.push_back({co, "frozen", [](ExperimentConfig& c, const std::string& v) { c.cutoff.frozen = parse_bool(v); },
                 [](const ExperimentConfig& c) { return fmt_bool(c.cutoff.frozen); }});
    f.push_back({co, "tracers",
                 [](ExperimentConfig& c, const std::string& v) { c.cutoff.tracers = parse_integer<std::int64_t>(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.cutoff.tracers); }});
    f.push_back({co, "reference_count",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.cutoff.reference_count = parse_integer<std::int64_t>(v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.cutoff.reference_count); }});
    f.push_back({co, "min_slope",
                 [](ExperimentConfig& c, const std::string& v) { c.cutoff.min_slope = parse_real(v); },
                 [](const ExperimentConfig& c) { return fmt_real(c.cutoff.min_slope); }});
    return f;
  }();
  return table;
}

const std::vector<std::string>& common_sections() {
  static const std::vector<std::string> s{"experiment", "model", "density", "integrator", "meanfield"};
  return s;
}

bool section_applies(const std::string& section, ExperimentKind kind) {
  if (std::find(common_sections().begin(), common_sections().end(), section) != common_sections().end()) return true;
  return section == to_string(kind) &&
         (kind == ExperimentKind::ClassProbability || kind == ExperimentKind::Lln ||
          kind == ExperimentKind::CutoffConvergence);
}

bool known_section(const std::string& section) {
  for (const auto& f : fields())
    if (f.section == section) return true;
  return false;
}

struct Entry {
  std::string value;
  int line = 0;
};

void validate(const ExperimentConfig& c, const std::map<std::string, Entry>& entries, std::vector<ConfigIssue>& issues) {
  auto line = [&entries](const std::string& key) {
    const auto it = entries.find(key);
    return it == entries.end() ? 0 : it->second.line;
  };
  auto check = [&issues](bool ok, int at, const std::string& msg) {
    if (!ok) issues.push_back({at, msg});
  };
  auto guard = [&issues](int at, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      issues.push_back({at, e.what()});
    }
  };

  check(!c.n.empty(), line("experiment.n"), "experiment.n must list at least one N");
  for (auto n : c.n) check(n >= 2, line("experiment.n"), "experiment.n: every N must be >= 2");
  check(!c.seeds.empty(), line("experiment.seeds"), "experiment.seeds must not be empty");
  {
    auto s = c.seeds;
    std::sort(s.begin(), s.end());
    check(std::adjacent_find(s.begin(), s.end()) == s.end(), line("experiment.seeds"),
          "experiment.seeds contains repeated indices");
  }
  check(c.threads >= 0, line("experiment.threads"), "experiment.threads must be >= 0");
  check(!c.output_dir.empty(), line("experiment.output_dir"), "experiment.output_dir must not be empty");

  if (c.main_theorem_regime && c.beta > 5.0 / 12.0 - c.sigma) {
    issues.push_back({line("model.beta"), "model.beta = " + fmt_real(c.beta) +
                                              " violates beta <= 5/12 - sigma required by main_theorem_regime"});
  } else {
    for (auto n : c.n)
      if (n >= 2) guard(line("model.beta"), [&] { c.model(n).validate(); });
  }
  guard(line("density.kind"), [&] { c.density.validate(); });
  check(c.min_steps >= 1, line("integrator.min_steps"), "integrator.min_steps must be >= 1");
  check(c.reference_multiplier >= 1, line("meanfield.reference_multiplier"),
        "meanfield.reference_multiplier must be >= 1");
  check(c.reference_stride >= 1, line("meanfield.reference_stride"), "meanfield.reference_stride must be >= 1");

  const bool uses_schedule = c.kind == ExperimentKind::MicroVsMeanfield || c.kind == ExperimentKind::Cardinality ||
                             c.kind == ExperimentKind::Lln ||
                             (c.kind == ExperimentKind::ClassProbability && c.class_probability.classes == "schedule");
  if (uses_schedule && !c.n.empty() && c.n.front() >= 2)
    guard(line("model.sigma"), [&] { schedule(c.n.front(), c.sigma); });

  switch (c.kind) {
    case ExperimentKind::ClassProbability: {
      const auto& o = c.class_probability;
      check(o.pairs >= 1, line("class-probability.pairs"), "class-probability.pairs must be >= 1");
      check(o.batch >= 1, line("class-probability.batch"), "class-probability.batch must be >= 1");
      check(o.delta > 0.0, line("class-probability.delta"), "class-probability.delta must be positive");
      check(o.c_frozen >= 0.0, line("class-probability.c_frozen"), "class-probability.c_frozen must be >= 0");
      check(o.min_fraction >= 0.0 && o.min_fraction <= 1.0, line("class-probability.min_fraction"),
            "class-probability.min_fraction must lie in [0, 1]");
      if (o.classes == "explicit") guard(line("class-probability.r_max"), [&] { o.fixed.validate(c.horizon); });
      break;
    }
    case ExperimentKind::Lln:
      check(c.lln.integral_multiplier >= 1, line("lln.integral_multiplier"), "lln.integral_multiplier must be >= 1");
      break;
    case ExperimentKind::Cardinality:
      check(c.seeds.size() >= 20, line("experiment.seeds"), "cardinality needs at least 20 seeds");
      break;
    case ExperimentKind::CutoffConvergence: {
      const auto& o = c.cutoff;
      for (double x : o.cuts)
        check(x > 0.0 && std::isfinite(x), line("cutoff-convergence.cuts"), "cutoff-convergence.cuts must be positive");
      check((o.cuts.empty() ? c.n.size() : o.cuts.size()) >= 2, line("cutoff-convergence.cuts"),
            "cutoff-convergence needs at least two cut radii");
      check(o.tracers >= 1, line("cutoff-convergence.tracers"), "cutoff-convergence.tracers must be >= 1");
      check(o.reference_count >= 0, line("cutoff-convergence.reference_count"),
            "cutoff-convergence.reference_count must be >= 0");
      break;
    }
    case ExperimentKind::MicroVsMeanfield: break;
  }
}

}  // namespace

ConfigParseError::ConfigParseError(std::vector<ConfigIssue> issues)
    : ConfigError(join_issues(issues)), issues_(std::move(issues)) {}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<ConfigIssue> issues;
  std::map<std::string, Entry> entries;  // "section.key"
  std::map<std::string, int> section_lines;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({lineno, "malformed section header"});
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!known_section(section)) issues.push_back({lineno, "unknown section [" + section + "]"});
      const auto [it, fresh] = section_lines.emplace(section, lineno);
      if (!fresh)
        issues.push_back({lineno, "duplicate section [" + section + "] (first at line " + std::to_string(it->second) + ")"});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({lineno, "expected key = value"});
      continue;
    }
    if (section.empty()) {
      issues.push_back({lineno, "key outside of any section"});
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!known_section(section)) continue;
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
    if (!known) {
      issues.push_back({lineno, "unknown key '" + key + "' in [" + section + "]"});
      continue;
    }
    const auto [it, fresh] = entries.emplace(section + "." + key, Entry{value, lineno});
    if (!fresh)
      issues.push_back({lineno, "duplicate key '" + key + "' in [" + section + "] at lines " +
                                    std::to_string(it->second.line) + " and " + std::to_string(lineno)});
  }

  ExperimentConfig cfg;
  const auto kind_it = entries.find("experiment.kind");
  if (kind_it == entries.end()) issues.push_back({0, "missing required key experiment.kind"});
  if (entries.find("experiment.n") == entries.end()) issues.push_back({0, "missing required key experiment.n"});
  if (kind_it != entries.end()) {
    try {
      cfg.kind = experiment_kind_from_string(kind_it->second.value);
    } catch (const ConfigError& e) {
      issues.push_back({kind_it->second.line, e.what()});
    }
  }
  for (const auto& [sec, at] : section_lines)
    if (known_section(sec) && !section_applies(sec, cfg.kind))
      issues.push_back({at, "section [" + sec + "] does not apply to kind " + to_string(cfg.kind)});

  for (const auto& f : fields()) {
    const auto it = entries.find(f.section + "." + f.key);
    if (it == entries.end() || !section_applies(f.section, cfg.kind)) continue;
    try {
      f.set(cfg, it->second.value);
    } catch (const ConfigError& e) {
      issues.push_back({it->second.line, f.section + "." + f.key + ": " + e.what()});
    }
  }
  if (issues.empty()) validate(cfg, entries, issues);
  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(), [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
    throw ConfigParseError(std::move(issues));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

std::string canonical(const ExperimentConfig& cfg, bool hashed_only) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (!section_applies(f.section, cfg.kind) || (hashed_only && !f.hashed)) continue;
    if (f.section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) { return canonical(cfg, false); }

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical(cfg, true);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  const char* root = std::getenv("VPCL_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && dir.is_relative()) return (std::filesystem::path(root) / dir).string();
  return dir.string();
}

}  // namespace vpcl
