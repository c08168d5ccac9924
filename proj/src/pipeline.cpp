#include "vpcl/pipeline.hpp"

#include "vpcl/random.hpp"
#include "vpcl/trajectory_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace vpcl {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

bool RunOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// Rows are buffered and written once, in task order, so thread count never changes the bytes.
class ResultTable {
 public:
  explicit ResultTable(std::string experiment) : experiment_(std::move(experiment)) {}
  void add(std::int64_t n, const std::string& seed, const std::string& statistic, double value) {
    rows_ += experiment_ + "," + std::to_string(n) + "," + seed + "," + statistic + "," + csv_number(value) + "\n";
  }
  void add(std::int64_t n, std::uint64_t seed, const std::string& statistic, double value) {
    add(n, std::to_string(seed), statistic, value);
  }
  std::string text() const { return "experiment,N,seed,statistic,value\n" + rows_; }

 private:
  std::string experiment_;
  std::string rows_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string tag(const std::string& prefix, std::int64_t n, std::uint64_t seed) {
  return prefix + "_N" + std::to_string(n) + "_s" + std::to_string(seed) + ".vpcl";
}

double median_of(std::vector<double> v) { return v.empty() ? 0.0 : median(std::move(v)); }

ojson fit_json(const std::vector<std::pair<double, double>>& pts) {
  std::vector<double> xs;
  for (const auto& p : pts) xs.push_back(p.first);
  std::sort(xs.begin(), xs.end());
  if (std::unique(xs.begin(), xs.end()) - xs.begin() < 3) return nullptr;
  try {
    const ScalingFit f = scaling_fit(pts);
    ojson j{{"slope", f.slope}, {"intercept", f.intercept}, {"residuals", f.residuals}};
    if (!f.warnings.empty()) j["warnings"] = f.warnings;
    return j;
  } catch (const DomainError& e) {
    return ojson{{"warnings", {e.what()}}};
  }
}

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opt;
  fs::path snapshots;
  ResultTable table;
  ojson summary = ojson::object();
  std::vector<CheckResult> checks;

  void log(const std::string& line) const {
    if (opt.log != nullptr) *opt.log << line << '\n';
  }
  void check(const std::string& name, bool passed, double value, double limit) {
    checks.push_back({name, passed, value, limit});
  }
  void snapshot(const std::string& name, const TrajectoryRecord& rec) const {
    if (cfg.snapshots != SnapshotMode::None) write_vpcl((snapshots / name).string(), rec);
  }
};

void run_trend(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const TrendSpec spec = cfg.trend_spec();
  ojson per_n = ojson::array();
  std::vector<std::pair<double, double>> med;
  for (auto n : cfg.n) {
    std::vector<double> sups, taus;
    double bad = 0, superbad = 0, within = 0, threshold = 0;
    std::int64_t steps = 0;
    for (auto s : cfg.seeds) {
      const TrendRun r = run_micro_vs_meanfield(spec, n, s, cfg.snapshots == SnapshotMode::Full);
      const auto& d = r.deviation;
      ctx.log("N=" + std::to_string(n) + " seed=" + std::to_string(s) + " sup=" + csv_number(d.sup) +
              " bad=" + std::to_string(r.taxonomy.bad) + " superbad=" + std::to_string(r.taxonomy.superbad));
      ctx.table.add(n, s, "sup_deviation", d.sup);
      ctx.table.add(n, s, "sup_good", d.sup_good);
      ctx.table.add(n, s, "sup_bad", d.sup_bad);
      ctx.table.add(n, s, "sup_superbad", d.sup_superbad);
      ctx.table.add(n, s, "threshold", d.threshold);
      ctx.table.add(n, s, "exceeds", d.exceeds ? 1 : 0);
      ctx.table.add(n, s, "good", static_cast<double>(r.taxonomy.good));
      ctx.table.add(n, s, "bad", static_cast<double>(r.taxonomy.bad));
      ctx.table.add(n, s, "superbad", static_cast<double>(r.taxonomy.superbad));
      ctx.table.add(n, s, "tau", r.tau.tau);
      ctx.table.add(n, s, "tau_g", r.tau.tau_g);
      ctx.table.add(n, s, "tau_b", r.tau.tau_b);
      ctx.table.add(n, s, "tau_s", r.tau.tau_s);
      ctx.table.add(n, s, "steps", static_cast<double>(r.integ.steps));
      ctx.snapshot(tag("micro", n, s), r.micro);
      ctx.snapshot(tag("tracers", n, s), r.tracers);
      sups.push_back(d.sup);
      taus.push_back(r.tau.tau);
      bad += static_cast<double>(r.taxonomy.bad);
      superbad += static_cast<double>(r.taxonomy.superbad);
      within += d.sup <= d.threshold;
      threshold = d.threshold;
      steps = r.integ.steps;
    }
    const auto seeds = static_cast<double>(cfg.seeds.size());
    const double m = median_of(sups);
    med.emplace_back(static_cast<double>(n), m);
    ctx.table.add(n, "all", "median_sup_deviation", m);
    ctx.table.add(n, "all", "fraction_within_threshold", within / seeds);
    per_n.push_back({{"N", n},
                     {"seeds", cfg.seeds.size()},
                     {"steps", steps},
                     {"median_sup_deviation", m},
                     {"threshold", threshold},
                     {"fraction_within_threshold", within / seeds},
                     {"median_tau", median_of(taus)},
                     {"mean_bad", bad / seeds},
                     {"mean_superbad", superbad / seeds},
                     {"bad_threshold", schedule(n, cfg.sigma).bad_cardinality_threshold()}});
  }
  ctx.summary["per_n"] = per_n;
  ctx.summary["fit"] = fit_json(med);
  if (!ctx.summary["fit"].is_null() && ctx.summary["fit"].contains("slope")) {
    const double slope = ctx.summary["fit"]["slope"];
    ctx.check("median_deviation_slope_negative", slope < 0.0, slope, 0.0);
  }
  const double frac = per_n.back()["fraction_within_threshold"];
  ctx.check("within_threshold_at_max_n", frac >= 0.9, frac, 0.9);
}

void run_cardinality(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const TrendSpec spec = cfg.trend_spec();
  ojson per_n = ojson::array();
  for (auto n : cfg.n) {
    const ThresholdSchedule sched = schedule(n, cfg.sigma);
    std::vector<TaxonomyReport> reports;
    for (auto s : cfg.seeds) {
      const MeanFieldRun run = run_meanfield_tracers(spec, n, s);
      reports.push_back(classify(run.tracers, sched, cfg.threads));
      ctx.log("N=" + std::to_string(n) + " seed=" + std::to_string(s) + " bad=" + std::to_string(reports.back().bad) +
              " superbad=" + std::to_string(reports.back().superbad));
      ctx.table.add(n, s, "bad", static_cast<double>(reports.back().bad));
      ctx.table.add(n, s, "superbad", static_cast<double>(reports.back().superbad));
    }
    const CardinalityStats c = cardinality_stats(reports, sched);
    ctx.table.add(n, "all", "exceed_bad", c.exceed_bad);
    ctx.table.add(n, "all", "exceed_superbad", c.exceed_superbad);
    per_n.push_back({{"N", n},
                     {"seeds", c.seeds},
                     {"mean_bad", c.mean_bad},
                     {"mean_superbad", c.mean_superbad},
                     {"exceed_bad", c.exceed_bad},
                     {"exceed_superbad", c.exceed_superbad},
                     {"bad_threshold", c.threshold_bad},
                     {"superbad_threshold", c.threshold_superbad},
                     {"predicted_bad", c.predicted_bad},
                     {"predicted_superbad", c.predicted_superbad}});
    ctx.check("exceed_bad_N" + std::to_string(n), c.exceed_bad <= 0.05, c.exceed_bad, 0.05);
    ctx.check("exceed_superbad_N" + std::to_string(n), c.exceed_superbad <= 0.05, c.exceed_superbad, 0.05);
  }
  ctx.summary["per_n"] = per_n;
}

std::vector<CollisionClass> sweep_classes(const ExperimentConfig& cfg, std::int64_t n) {
  const auto& o = cfg.class_probability;
  if (o.classes == "cover") return dyadic_cover(n, cfg.beta, o.delta, cfg.horizon);
  if (o.classes == "schedule") {
    const ThresholdSchedule s = schedule(n, cfg.sigma);
    return {s.good_class(cfg.horizon), s.superbad_class(cfg.horizon)};
  }
  return {o.fixed};
}

void run_class_probability(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto& o = cfg.class_probability;
  ojson per_n = ojson::array();
  std::int64_t total = 0, compliant = 0;
  for (auto n : cfg.n) {
    const std::string ntag = "N" + std::to_string(n);
    const auto classes = sweep_classes(cfg, n);
    double max_ratio = 0.0;
    std::int64_t n_total = 0, n_compliant = 0;
    ClassSweepSpec sweep;
    sweep.density = cfg.density;
    sweep.beta = cfg.beta;
    sweep.sign = cfg.sign;
    sweep.horizon = cfg.horizon;
    sweep.min_steps = cfg.min_steps;
    sweep.reference_multiplier = cfg.reference_multiplier;
    sweep.reference_stride = cfg.reference_stride;
    sweep.backend = cfg.backend;
    sweep.precision = cfg.precision;
    sweep.mean_field = o.mean_field;
    sweep.pairs = o.pairs;
    sweep.batch = o.batch;
    sweep.seed = cfg.base_seed;
    sweep.threads = cfg.threads;
    for (auto s : cfg.seeds) {
      const auto probs = class_sweep(sweep, classes, n, s);
      for (const auto& cp : probs) {
        const std::string& label = cp.cls.label;
        ctx.table.add(n, s, "p[" + label + "]", cp.p.estimate);
        ctx.table.add(n, s, "upper[" + label + "]", cp.p.upper);
        ctx.table.add(n, s, "bound[" + label + "]", cp.bound);
        if (cp.bound > 0.0) max_ratio = std::max(max_ratio, cp.p.estimate / cp.bound);
        ++n_total;
        n_compliant += cp.p.estimate <= o.c_frozen * cp.bound;
      }
      ctx.log(ntag + " seed=" + std::to_string(s) + " classes=" + std::to_string(probs.size()));
    }
    total += n_total;
    compliant += n_compliant;
    ojson row{{"N", n}, {"classes", classes.size()}, {"max_ratio", max_ratio}};
    if (o.c_frozen > 0.0) row["compliant_fraction"] = static_cast<double>(n_compliant) / static_cast<double>(n_total);
    per_n.push_back(row);
  }
  ctx.summary["per_n"] = per_n;
  if (o.c_frozen > 0.0) {
    const double frac = static_cast<double>(compliant) / static_cast<double>(total);
    ctx.summary["c_frozen"] = o.c_frozen;
    ctx.check("bound_compliant_fraction", frac >= o.min_fraction, frac, o.min_fraction);
  }
}

void run_lln(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto results = lln_experiment(cfg.lln_spec(), cfg.n, cfg.seeds);
  ojson per_n = ojson::array();
  std::int64_t large = 0;
  bool decreasing = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    for (std::size_t k = 0; k < r.fluctuations.size(); ++k) ctx.table.add(r.n, cfg.seeds[k], "fluctuation", r.fluctuations[k]);
    ctx.table.add(r.n, "all", "median_fluctuation", r.median);
    ctx.table.add(r.n, "all", "h_sup", r.h_sup);
    large += r.at_least_one;
    if (i > 0 && !(r.median < results[i - 1].median)) decreasing = false;
    per_n.push_back({{"N", r.n},
                     {"median_fluctuation", r.median},
                     {"at_least_one", r.at_least_one},
                     {"h_sup", r.h_sup},
                     {"h_bound", r.h_bound},
                     {"integral", {r.integral[0], r.integral[1], r.integral[2]}}});
    ctx.log("N=" + std::to_string(r.n) + " median=" + csv_number(r.median));
  }
  ctx.summary["per_n"] = per_n;
  ctx.check("no_fluctuation_at_least_one", large == 0, static_cast<double>(large), 0.0);
  if (results.size() >= 2) ctx.check("median_strictly_decreasing", decreasing, decreasing ? 1.0 : 0.0, 1.0);
}

void run_cutoff(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto& o = cfg.cutoff;
  std::vector<double> cuts = o.cuts;
  if (cuts.empty())
    for (auto n : cfg.n) cuts.push_back(power_of(static_cast<double>(n), -cfg.beta));
  const std::int64_t max_n = *std::max_element(cfg.n.begin(), cfg.n.end());
  std::map<double, std::vector<double>> by_cut;
  std::vector<double> slopes;
  bool monotone = true;
  for (auto s : cfg.seeds) {
    CutoffSpec spec;
    spec.density = cfg.density;
    spec.cuts = cuts;
    spec.engine.backend = cfg.backend;
    spec.engine.precision = cfg.precision;
    spec.engine.sign = cfg.sign;
    spec.engine.reference_count = o.reference_count > 0 ? o.reference_count : cfg.reference_multiplier * max_n;
    spec.engine.reference_seed = derive_seed(cfg.base_seed, "cutoff-reference", s);
    spec.engine.threads = cfg.threads;
    spec.tracers = sample(SampleSpec{cfg.density, o.tracers, derive_seed(cfg.base_seed, "cutoff-tracers", s)});
    spec.integ = experiment_integrator(cfg.horizon, *std::min_element(cuts.begin(), cuts.end()),
                                       max_speed(spec.tracers), cfg.min_steps, cfg.reference_stride);
    spec.reference_stride = cfg.reference_stride;
    spec.frozen = o.frozen;
    const CutoffConvergence c = cutoff_convergence(spec);
    for (std::size_t i = 0; i < c.cuts.size(); ++i) {
      ctx.table.add(0, s, "deviation[c=" + csv_number(c.cuts[i]) + "]", c.deviations[i]);
      by_cut[c.cuts[i]].push_back(c.deviations[i]);
      if (i > 1 && c.deviations[i] < c.deviations[i - 1]) monotone = false;
      TrajectoryRecord ends = c.tracers[i];
      if (cfg.snapshots != SnapshotMode::Full) {
        ends.frames = {ends.frames.front(), ends.frames.back()};
        ends.frame_dt = cfg.horizon;
      }
      ctx.snapshot("tracers_c" + std::to_string(i) + "_s" + std::to_string(s) + ".vpcl", ends);
    }
    if (!c.fit.x.empty()) {
      ctx.table.add(0, s, "slope", c.fit.slope);
      slopes.push_back(c.fit.slope);
    }
    ctx.log("seed=" + std::to_string(s) + " slope=" + csv_number(c.fit.slope));
  }
  ojson series = ojson::array();
  for (const auto& [cut, devs] : by_cut) series.push_back({{"cut", cut}, {"median_deviation", median_of(devs)}});
  ctx.summary["cuts"] = series;
  ctx.summary["frozen"] = o.frozen;
  if (!slopes.empty()) ctx.summary["median_slope"] = median_of(slopes);
  if (o.frozen) {
    ctx.check("deviation_monotone_in_cut", monotone, monotone ? 1.0 : 0.0, 1.0);
  } else if (!slopes.empty()) {
    const double m = median_of(slopes);
    ctx.check("median_slope_at_least", m >= o.min_slope, m, o.min_slope);
  }
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool has_previous_run(const fs::path& dir) {
  for (const char* f : {"results.csv", "summary.json", "manifest.json"})
    if (fs::exists(dir / f)) return true;
  return fs::exists(dir / "snapshots") && !fs::is_empty(dir / "snapshots");
}

void prepare_dir(const fs::path& dir, const RunOptions& opt) {
  if (has_previous_run(dir) && !opt.force)
    throw OutputExistsError("output directory " + dir.string() + " holds a previous run; pass --force to overwrite");
  fs::create_directories(dir);
  if (opt.force) {
    for (const char* f : {"results.csv", "summary.json", "manifest.json", "config.ini"}) fs::remove(dir / f);
    fs::remove_all(dir / "snapshots");
  }
}

}  // namespace

std::string execution_plan(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "experiment " << to_string(cfg.kind) << "\n";
  os << "config hash " << config_hash(cfg) << "\n";
  os << "output " << resolve_output_dir(cfg) << "\n";
  for (auto n : cfg.n) {
    const double cut = power_of(static_cast<double>(n), -cfg.beta);
    const IntegratorSpec integ =
        experiment_integrator(cfg.horizon, cut, cfg.density.speed_scale(), cfg.min_steps, cfg.reference_stride);
    os << "N=" << n << " cut=" << csv_number(cut) << " steps<=" << integ.steps << " M=" << cfg.reference_multiplier * n
       << " seeds=" << cfg.seeds.size() << "\n";
  }
  return os.str();
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunOutcome out;
  out.output_dir = resolve_output_dir(cfg);
  out.hash = config_hash(cfg);
  if (opt.dry_run) {
    if (opt.log != nullptr) *opt.log << execution_plan(cfg);
    return out;
  }
  const fs::path dir(out.output_dir);
  prepare_dir(dir, opt);
  if (cfg.snapshots != SnapshotMode::None) fs::create_directories(dir / "snapshots");
  const std::string started = iso_now();

  Context ctx{cfg, opt, dir / "snapshots", ResultTable(to_string(cfg.kind)), ojson::object(), {}};
  ctx.summary["experiment"] = to_string(cfg.kind);
  ctx.summary["config_hash"] = out.hash;
  ctx.summary["sigma"] = cfg.sigma;
  switch (cfg.kind) {
    case ExperimentKind::MicroVsMeanfield: run_trend(ctx); break;
    case ExperimentKind::Cardinality: run_cardinality(ctx); break;
    case ExperimentKind::ClassProbability: run_class_probability(ctx); break;
    case ExperimentKind::Lln: run_lln(ctx); break;
    case ExperimentKind::CutoffConvergence: run_cutoff(ctx); break;
  }
  ojson checks = ojson::array();
  for (const auto& c : ctx.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"limit", c.limit}});
  ctx.summary["checks"] = checks;
  out.checks = ctx.checks;
  ctx.summary["passed"] = out.passed();

  write_text(dir / "results.csv", ctx.table.text());
  write_text(dir / "summary.json", ctx.summary.dump(2) + "\n");
  write_text(dir / "config.ini", serialize_config(cfg));

  ojson seeds = ojson::array();
  for (auto n : cfg.n)
    for (auto s : cfg.seeds)
      seeds.push_back({{"N", n}, {"index", s}, {"initial", derive_seed(cfg.base_seed, "initial-N" + std::to_string(n), s)}});
  const ojson manifest{{"config_hash", out.hash},
                       {"experiment", to_string(cfg.kind)},
                       {"base_seed", cfg.base_seed},
                       {"seeds", seeds},
                       {"threads", cfg.threads},
                       {"started", started},
                       {"finished", iso_now()}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out.wrote = true;
  return out;
}

std::vector<std::string> write_samples(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<std::string> paths;
  const fs::path dir = fs::path(resolve_output_dir(cfg)) / "snapshots";
  for (auto n : cfg.n)
    for (auto s : cfg.seeds) paths.push_back((dir / tag("sample", n, s)).string());
  if (opt.dry_run) return paths;
  fs::create_directories(dir);
  for (const auto& p : paths)
    if (fs::exists(p) && !opt.force) throw OutputExistsError(p + " exists; pass --force to overwrite");
  std::size_t k = 0;
  for (auto n : cfg.n)
    for (auto s : cfg.seeds) {
      TrajectoryRecord rec;
      rec.kind = FlowKind::Sample;
      rec.frames = {sample(SampleSpec{cfg.density, n, derive_seed(cfg.base_seed, "initial-N" + std::to_string(n), s)})};
      write_vpcl(paths[k++], rec);
    }
  return paths;
}

std::string emit_plotdata(const std::string& summary_json) {
  std::string out = "series,x,y\n";
  if (summary_json.find_first_not_of(" \t\r\n") == std::string::npos) return out;
  const ojson s = ojson::parse(summary_json);
  auto row = [&out](const char* series, double x, double y) {
    out += std::string(series) + "," + csv_number(x) + "," + csv_number(y) + "\n";
  };
  const double sigma = s.value("sigma", 0.05);
  if (s.contains("per_n")) {
    for (const auto& r : s["per_n"]) {
      const double n = r["N"].get<double>();
      if (r.contains("median_sup_deviation")) {
        row("median_sup_deviation", n, r["median_sup_deviation"].get<double>());
        row("threshold", n, power_of(n, -1.0 / 6.0));
      }
      if (r.contains("mean_bad")) {
        row("mean_bad", n, r["mean_bad"].get<double>());
        row("bad_threshold", n, power_of(n, 0.75 * (1 + sigma)));
      }
    }
  }
  if (s.contains("cuts"))
    for (const auto& c : s["cuts"]) row("cutoff_deviation", c["cut"].get<double>(), c["median_deviation"].get<double>());
  return out;
}

}  // namespace vpcl
