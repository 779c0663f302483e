#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ltrc/error.hpp"
#include "ltrc/io.hpp"
#include "ltrc/kv_config.hpp"
#include "ltrc/mc_harness.hpp"
#include "ltrc/regression.hpp"
#include "ltrc/simulation.hpp"
#include "ltrc/survival.hpp"

namespace ltrc::cli {

enum ExitCode : int { ok = 0, usage = 1, validation = 2, estimation = 3 };

struct CliConfig {
  std::string subcommand;
  std::string input;
  std::string config_path;
  std::string output;
  std::vector<std::string> overrides;
};

namespace detail {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

inline const std::vector<std::string>& estimator_keys() {
  static const std::vector<std::string> k = {"kernel",   "psi",          "psi_scale",     "bandwidth",
                                             "lscv_grid", "support_bound", "root_tol",     "root_max_iter",
                                             "bracket_pad", "min_effective", "eta",         "x_grid",
                                             "x_min",    "x_max",        "x_step"};
  return k;
}

inline std::vector<std::string> join_keys(std::initializer_list<const std::vector<std::string>*> parts) {
  std::vector<std::string> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

inline KeyValueConfig load_config(const CliConfig& c) {
  KeyValueConfig kv = c.config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(c.config_path);
  for (const auto& o : c.overrides) kv.apply_override(o);
  return kv;
}

// "lscv" selects cross-validation; otherwise a positive number.
inline std::optional<double> fixed_bandwidth(const KeyValueConfig& kv, double fallback) {
  if (kv.get_string("bandwidth", "") == "lscv") return std::nullopt;
  return kv.get_double("bandwidth", fallback);
}

inline EstimatorConfig estimator_from_kv(const KeyValueConfig& kv) {
  EstimatorConfig e;
  e.kernel = Kernel::from_name(kv.get_string("kernel", "gaussian"));
  e.psi = Objective::from_name(kv.get_string("psi", "pseudo_huber"));
  if (kv.has("psi_scale")) e.psi = e.psi.scaled(kv.get_double("psi_scale", 1.0));
  if (kv.has("support_bound")) e.support_bound = kv.get_double("support_bound", 0.0);
  e.root_tol = kv.get_double("root_tol", e.root_tol);
  e.root_max_iter = static_cast<int>(kv.get_int("root_max_iter", e.root_max_iter));
  e.bracket_pad = kv.get_double("bracket_pad", e.bracket_pad);
  e.min_effective = static_cast<std::size_t>(kv.get_uint("min_effective", e.min_effective));
  if (auto h = fixed_bandwidth(kv, e.bandwidth)) e.bandwidth = *h;
  e.validate();
  return e;
}

inline std::vector<double> x_grid_from_kv(const KeyValueConfig& kv) {
  if (kv.has("x_grid")) return kv.get_doubles("x_grid", {});
  if (!kv.has("x_min") && !kv.has("x_max") && !kv.has("x_step")) return default_x_grid();
  const double lo = kv.get_double("x_min", -1.0), hi = kv.get_double("x_max", 1.0),
               step = kv.get_double("x_step", 0.1);
  if (!(step > 0.0) || !(hi >= lo)) throw InvalidConfig("x grid needs x_min <= x_max and x_step > 0");
  std::vector<double> g;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= count; ++k) g.push_back(lo + step * static_cast<double>(k));
  return g;
}

inline std::vector<double> lscv_grid_from_kv(const KeyValueConfig& kv) {
  return kv.has("lscv_grid") ? kv.get_doubles("lscv_grid", {}) : default_lscv_grid();
}

// Calibrates (a0, u0) when percent targets are given.
inline SimConfig sim_from_kv(const KeyValueConfig& kv, json& manifest) {
  SimConfig sim = SimConfig::from_kv(kv);
  if (kv.has("cr_percent") || kv.has("tr_percent")) {
    const double cr = kv.get_double("cr_percent", 10.0), tr = kv.get_double("tr_percent", 20.0);
    const auto cal = calibrate_rates_detailed(cr / 100.0, tr / 100.0, sim);
    sim.a0 = cal.a0;
    sim.u0 = cal.u0;
    manifest["calibration"] = {{"cr_percent", cr},        {"tr_percent", tr},       {"a0", cal.a0},
                               {"u0", cal.u0},            {"pilot_cr", cal.cr_pilot}, {"pilot_tr", cal.tr_pilot},
                               {"passes", cal.passes}};
  }
  return sim;
}

inline const std::vector<std::string>& calibration_keys() {
  static const std::vector<std::string> k = {"cr_percent", "tr_percent"};
  return k;
}

inline const std::vector<std::string>& campaign_keys() {
  static const std::vector<std::string> k = {"replications", "eval_point", "threads"};
  return k;
}

inline McConfig campaign_from_kv(const KeyValueConfig& kv, const SimConfig& sim) {
  McConfig m;
  m.sim = sim;
  m.est = estimator_from_kv(kv);
  m.replications = static_cast<std::size_t>(kv.get_uint("replications", m.replications));
  m.x_grid = x_grid_from_kv(kv);
  m.eta = kv.get_double("eta", m.eta);
  m.eval_point = kv.get_double("eval_point", m.eval_point);
  // Campaigns default to per-replication cross-validation.
  const bool fixed = kv.has("bandwidth") && fixed_bandwidth(kv, 1.0);
  m.bandwidth_policy = fixed ? BandwidthPolicy::fixed : BandwidthPolicy::lscv;
  m.lscv_grid = lscv_grid_from_kv(kv);
  m.threads = static_cast<unsigned>(kv.get_uint("threads", 0));
  m.validate();
  return m;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidConfig("cannot create output directory " + dir + ": " + ec.message());
}

inline json base_manifest(const CliConfig& c) {
  json m;
  m["subcommand"] = c.subcommand;
  m["input"] = c.input;
  m["config_file"] = c.config_path;
  m["overrides"] = c.overrides;
  return m;
}

template <class Stream>
void open_or_throw(Stream& s, const std::string& path) {
  s.open(path);
  if (!s) throw InvalidConfig("cannot write " + path);
}

inline void finish(json& manifest, std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw InvalidConfig("write failed for " + path);
  manifest["outputs"].push_back(path);
}

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

// Grid estimation on a sample file.
inline int cmd_estimate(const CliConfig& c, std::ostream& err = std::cerr) {
  using namespace detail;
  const auto t0 = Clock::now();
  json manifest = base_manifest(c);
  KeyValueConfig kv;
  LtrcSample sample = [&] {
    try {
      kv = load_config(c);
      static const std::vector<std::string> csv_keys = {"delimiter", "header"};
      kv.require_known(join_keys({&estimator_keys(), &csv_keys}));
      io::CsvOptions opt;
      const std::string d = kv.get_string("delimiter", ",");
      opt.delimiter = d == "tab" ? '\t' : d.empty() ? ',' : d.front();
      if (kv.has("header")) opt.header = kv.get_bool("header", true);
      return io::read_sample_csv(c.input, opt);
    } catch (const InvalidRecord& e) {
      err << "error: data row " << e.index() + 1 << ": " << e.reason() << '\n';
      throw;
    }
  }();
  const EstimatorConfig est0 = estimator_from_kv(kv);
  const double eta = kv.get_double("eta", 0.05);
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidConfig("eta must lie in (0,1)");
  const std::vector<double> grid = x_grid_from_kv(kv);
  if (sample.dim() != 1) throw InvalidConfig("grid estimation needs one covariate");

  const SurvivalFit fit = fit_survival(sample);
  EstimatorConfig est = est0;
  if (!fixed_bandwidth(kv, 1.0)) {
    est.bandwidth = lscv_bandwidth(sample, fit, est0, lscv_grid_from_kv(kv));
    manifest["bandwidth_selected"] = est.bandwidth;
  }

  std::vector<io::GridRow> rows;
  std::size_t succeeded = 0;
  for (double x : grid) {
    io::GridRow row;
    row.x = x;
    try {
      row.result = estimate_at(sample, fit, est, x, eta);
      ++succeeded;
    } catch (const Error& e) {
      row.status = error_code(e);
      err << "warning: x=" << format_double(x) << ": " << e.what() << '\n';
    }
    rows.push_back(std::move(row));
  }

  ensure_dir(c.output);
  const std::string path = c.output + "/estimates.csv";
  std::ofstream out;
  open_or_throw(out, path);
  io::write_grid_csv(out, rows);
  finish(manifest, out, path);
  const std::string surv = c.output + "/survival";
  ensure_dir(surv);
  io::export_survival_fit(surv, fit, sample.n());
  manifest["outputs"].push_back(surv);

  KeyValueConfig resolved = kv;
  resolved.set("bandwidth", format_double(est.bandwidth));
  resolved.set("eta", format_double(eta));
  manifest["config"] = io::kv_to_json(resolved);
  manifest["n"] = sample.n();
  manifest["mu_n"] = fit.mu_n;
  manifest["points_ok"] = succeeded;
  manifest["points_failed"] = grid.size() - succeeded;
  manifest["seconds"] = seconds_since(t0);
  const int code = succeeded == 0 ? estimation : ok;
  manifest["exit_code"] = code;
  io::write_json(c.output + "/manifest.json", manifest);
  if (code != ok) err << "error: estimation failed at every grid point\n";
  return code;
}

// Writes one simulated sample; the manifest goes next to it.
inline int cmd_simulate(const CliConfig& c, std::ostream& err = std::cerr) {
  using namespace detail;
  (void)err;
  const auto t0 = Clock::now();
  json manifest = base_manifest(c);
  const KeyValueConfig kv = load_config(c);
  kv.require_known(join_keys({&SimConfig::keys(), &calibration_keys()}));
  const SimConfig sim = sim_from_kv(kv, manifest);
  const auto [sample, stats] = gen_ltrc_sample(sim);

  const auto parent = std::filesystem::path(c.output).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  std::ofstream out;
  open_or_throw(out, c.output);
  io::write_sample_csv(out, sample);
  finish(manifest, out, c.output);

  KeyValueConfig resolved;
  sim.to_kv(resolved);
  manifest["config"] = io::kv_to_json(resolved);
  manifest["seed"] = sim.seed;
  manifest["n_drawn"] = stats.n_drawn;
  manifest["cr_realized"] = stats.cr_realized;
  manifest["tr_realized"] = stats.tr_realized;
  manifest["seconds"] = seconds_since(t0);
  manifest["exit_code"] = 0;
  io::write_json(c.output + ".manifest.json", manifest);
  return ok;
}

inline void write_report_files(const std::string& dir, const McReport& r, nlohmann::json& manifest) {
  using namespace detail;
  std::ofstream out;
  auto emit = [&](const std::string& name, auto&& writer) {
    const std::string path = dir + "/" + name;
    open_or_throw(out, path);
    writer(out);
    finish(manifest, out, path);
    out.close();
  };
  emit("coverage.csv", [&](std::ostream& o) { io::write_coverage_csv(o, r); });
  emit("bands.csv", [&](std::ostream& o) { io::write_bands_csv(o, r.bands); });
  emit("mn.csv", [&](std::ostream& o) { io::write_mn_csv(o, r.mn_values); });
  if (r.density_curve) emit("mn_density.csv", [&](std::ostream& o) { io::write_density_csv(o, *r.density_curve); });
  if (!r.qq_pairs.empty()) emit("qq.csv", [&](std::ostream& o) { io::write_qq_csv(o, r.qq_pairs); });
}

inline KeyValueConfig resolved_campaign_kv(const KeyValueConfig& kv, const McConfig& m) {
  KeyValueConfig r = kv;
  m.sim.to_kv(r);
  r.set("replications", std::to_string(m.replications));
  r.set("eta", format_double(m.eta));
  r.set("eval_point", format_double(m.eval_point));
  r.set("kernel", m.est.kernel.name());
  r.set("psi", m.est.psi.name());
  r.set("psi_scale", format_double(m.est.psi.scale()));
  r.set("bandwidth", m.bandwidth_policy == BandwidthPolicy::lscv ? "lscv" : format_double(m.est.bandwidth));
  std::string g;
  for (double x : m.x_grid) g += (g.empty() ? "" : ",") + format_double(x);
  r.set("x_grid", g);
  if (m.bandwidth_policy == BandwidthPolicy::lscv) {
    std::string h;
    for (double x : m.lscv_grid) h += (h.empty() ? "" : ",") + format_double(x);
    r.set("lscv_grid", h);
  }
  return r;
}

// One Monte Carlo campaign at fixed design parameters.
inline int cmd_campaign(const CliConfig& c, std::ostream& err = std::cerr) {
  using namespace detail;
  const auto t0 = Clock::now();
  json manifest = base_manifest(c);
  const KeyValueConfig kv = load_config(c);
  kv.require_known(join_keys({&SimConfig::keys(), &calibration_keys(), &estimator_keys(), &campaign_keys()}));
  const SimConfig sim = sim_from_kv(kv, manifest);
  const McConfig m = campaign_from_kv(kv, sim);
  ensure_dir(c.output);
  manifest["config"] = io::kv_to_json(resolved_campaign_kv(kv, m));
  manifest["seed"] = m.sim.seed;
  McReport r;
  try {
    r = run_campaign(m);
  } catch (const AllReplicationsFailed& e) {
    err << "error: " << e.what() << '\n';
    manifest["exit_code"] = estimation;
    io::write_json(c.output + "/manifest.json", manifest);
    return estimation;
  }
  write_report_files(c.output, r, manifest);

  Table1Row row;
  row.cell = {100.0 * r.mean_tr_realized, 100.0 * r.mean_cr_realized, m.sim.n};
  row.a0 = m.sim.a0;
  row.u0 = m.sim.u0;
  row.report = r;
  std::ofstream out;
  const std::string path = c.output + "/table1.csv";
  open_or_throw(out, path);
  io::write_table1_csv(out, {row});
  finish(manifest, out, path);

  manifest["report"] = io::report_summary(r);
  manifest["seconds"] = seconds_since(t0);
  manifest["exit_code"] = 0;
  io::write_json(c.output + "/manifest.json", manifest);
  return ok;
}

// Campaigns over a (TR, CR, n) grid with calibrated rates per (TR, CR).
inline int cmd_table1(const CliConfig& c, std::ostream& err = std::cerr) {
  using namespace detail;
  const auto t0 = Clock::now();
  json manifest = base_manifest(c);
  const KeyValueConfig kv = load_config(c);
  static const std::vector<std::string> lists = {"tr_list", "cr_list", "n_list"};
  kv.require_known(join_keys({&SimConfig::keys(), &estimator_keys(), &campaign_keys(), &lists}));
  const SimConfig sim = SimConfig::from_kv(kv);
  const McConfig m = campaign_from_kv(kv, sim);
  std::vector<std::size_t> ns;
  for (double v : kv.get_doubles("n_list", {50, 100, 300})) {
    if (!(v >= 1.0) || v != std::floor(v)) throw InvalidConfig("n_list entries must be positive integers");
    ns.push_back(static_cast<std::size_t>(v));
  }
  const auto cells = table1_grid(kv.get_doubles("tr_list", {20, 60}), kv.get_doubles("cr_list", {10, 40}), ns);
  ensure_dir(c.output);

  const auto rows = run_table1(cells, m);
  std::ofstream out;
  const std::string path = c.output + "/table1.csv";
  open_or_throw(out, path);
  io::write_table1_csv(out, rows);
  finish(manifest, out, path);

  bool any_failed = false;
  manifest["cells"] = json::array();
  for (const auto& row : rows) {
    json cell = {{"tr_percent", row.cell.tr_percent}, {"cr_percent", row.cell.cr_percent},
                 {"n", row.cell.n},                   {"a0", row.a0},
                 {"u0", row.u0}};
    if (row.failure.empty()) {
      cell["report"] = io::report_summary(row.report);
    } else {
      cell["failure"] = row.failure;
      any_failed = true;
      err << "error: cell TR=" << format_double(row.cell.tr_percent) << " CR=" << format_double(row.cell.cr_percent)
          << " n=" << row.cell.n << ": " << row.failure << '\n';
    }
    manifest["cells"].push_back(cell);
  }
  KeyValueConfig resolved = resolved_campaign_kv(kv, m);
  resolved.set("tr_list", kv.get_string("tr_list", "20,60"));
  resolved.set("cr_list", kv.get_string("cr_list", "10,40"));
  resolved.set("n_list", kv.get_string("n_list", "50,100,300"));
  manifest["config"] = io::kv_to_json(resolved);
  manifest["seed"] = m.sim.seed;
  manifest["seconds"] = seconds_since(t0);
  const int code = any_failed ? estimation : ok;
  manifest["exit_code"] = code;
  io::write_json(c.output + "/manifest.json", manifest);
  return code;
}

inline int dispatch(const CliConfig& c, std::ostream& err = std::cerr) {
  try {
    if (c.subcommand == "estimate") return cmd_estimate(c, err);
    if (c.subcommand == "simulate") return cmd_simulate(c, err);
    if (c.subcommand == "campaign") return cmd_campaign(c, err);
    if (c.subcommand == "table1") return cmd_table1(c, err);
    err << "error: unknown subcommand '" << c.subcommand << "'\n";
    return usage;
  } catch (const InvalidRecord&) {
    return validation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return validation;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Kernel M-estimation of a regression function from left-truncated right-censored data"};
  app.require_subcommand(1);
  CliConfig c;
  auto add_common = [&](CLI::App* sub, bool input) {
    if (input) sub->add_option("--input", c.input, "sample CSV (x..., z, t, delta)")->required();
    sub->add_option("--config", c.config_path, "key=value config file");
    sub->add_option("--out", c.output, "output location")->required();
    sub->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  };
  add_common(app.add_subcommand("estimate", "estimate m(x) with intervals over an x grid"), true);
  add_common(app.add_subcommand("simulate", "generate one simulated sample"), false);
  add_common(app.add_subcommand("campaign", "run one Monte Carlo campaign"), false);
  add_common(app.add_subcommand("table1", "run campaigns over a (TR, CR, n) grid"), false);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? ok : usage;
  }
  c.subcommand = app.get_subcommands().front()->get_name();
  return dispatch(c, err);
}

}  // namespace ltrc::cli
