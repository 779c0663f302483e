#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ltrc/error.hpp"
#include "ltrc/kv_config.hpp"
#include "ltrc/mc_harness.hpp"
#include "ltrc/sample.hpp"
#include "ltrc/step_function.hpp"
#include "ltrc/survival.hpp"

namespace ltrc::io {

// ---------------------------------------------------------------------------
// Samples: columns x1..xd, z, t, delta

struct CsvOptions {
  char delimiter = ',';
  // Unset: a first line whose leading field is not a number is a header.
  std::optional<bool> header;
};

inline LtrcSample read_sample_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<LtrcObservation> obs;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, opt.delimiter);
    if (first) {
      first = false;
      double probe;
      const bool is_header = opt.header ? *opt.header : !parse_double(fields.front(), probe);
      if (is_header) continue;
    }
    const std::size_t row = obs.size();
    const std::string where = " (line " + std::to_string(lineno) + ")";
    if (fields.size() < 4) throw InvalidRecord(row, "expected at least 4 columns" + where);
    if (width == 0) width = fields.size();
    if (fields.size() != width) throw InvalidRecord(row, "column count differs from first row" + where);
    std::vector<double> vals(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!parse_double(fields[k], vals[k]))
        throw InvalidRecord(row, "unparsable field '" + fields[k] + "'" + where);
    const double dv = vals.back();
    if (dv != 0.0 && dv != 1.0) throw InvalidRecord(row, "delta not in {0,1}" + where);
    LtrcObservation o;
    o.x.assign(vals.begin(), vals.end() - 3);
    o.z = vals[vals.size() - 3];
    o.t = vals[vals.size() - 2];
    o.delta = static_cast<int>(dv);
    obs.push_back(std::move(o));
    lines.push_back(lineno);
  }
  try {
    return validate_sample(std::move(obs));
  } catch (const InvalidRecord& e) {
    throw InvalidRecord(e.index(), e.reason() + " (line " + std::to_string(lines[e.index()]) + ")");
  }
}

inline LtrcSample read_sample_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open input file " + path);
  return read_sample_csv(in, opt);
}

inline void write_sample_csv(std::ostream& out, const LtrcSample& s, char delim = ',', bool header = true) {
  if (header) {
    for (std::size_t k = 0; k < s.dim(); ++k) out << 'x' << (k + 1) << delim;
    out << 'z' << delim << 't' << delim << "delta\n";
  }
  for (const auto& o : s.observations()) {
    for (double v : o.x) out << format_double(v) << delim;
    out << format_double(o.z) << delim << format_double(o.t) << delim << o.delta << '\n';
  }
}

// ---------------------------------------------------------------------------
// Step functions

inline void write_step_csv(std::ostream& out, const StepFunction& f) {
  out << "y,value\n";
  const auto& p = f.jump_points();
  const auto& v = f.values();
  for (std::size_t k = 0; k < p.size(); ++k) out << format_double(p[k]) << ',' << format_double(v[k]) << '\n';
}

inline nlohmann::json step_metadata(const std::string& estimator, std::size_t n, double mu_n,
                                    const StepFunction& f) {
  return {{"estimator", estimator},
          {"n", n},
          {"mu_n", mu_n},
          {"value_before_first", f.value_before_first()},
          {"jumps", f.size()}};
}

inline void export_survival_fit(const std::string& dir, const SurvivalFit& fit, std::size_t n) {
  const std::pair<const char*, const StepFunction*> items[] = {
      {"f_n", &fit.f_n},   {"g_n", &fit.g_n},          {"l_n", &fit.l_n},
      {"h_n", &fit.h_n_lb}, {"lambda_n", &fit.lambda_n}, {"c_n", &fit.c_n}};
  for (const auto& [name, f] : items) {
    std::ofstream csv(dir + "/" + name + ".csv");
    write_step_csv(csv, *f);
    std::ofstream meta(dir + "/" + name + ".json");
    meta << step_metadata(name, n, fit.mu_n, *f).dump(2) << '\n';
    if (!csv || !meta) throw InvalidConfig("cannot write to " + dir);
  }
}

// ---------------------------------------------------------------------------
// Grid estimation

struct GridRow {
  double x = 0.0;
  std::optional<EstimateResult> result;
  std::string status = "ok";
};

inline void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "x,m_hat,sigma_hat,ci_lo,ci_hi,n_effective,status\n";
  for (const auto& r : rows) {
    out << format_double(r.x) << ',';
    if (r.result) {
      const auto& e = *r.result;
      out << format_double(e.m_hat) << ',' << format_double(e.sigma_hat) << ',' << format_double(e.ci_lo)
          << ',' << format_double(e.ci_hi) << ',' << e.n_effective;
    } else {
      out << ",,,,";
    }
    out << ',' << r.status << '\n';
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo reports

namespace detail {
inline std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }
}  // namespace detail

inline void write_coverage_csv(std::ostream& out, const McReport& r) {
  out << "x,coverage,avg_width,n_ok,n_fail\n";
  for (std::size_t k = 0; k < r.x_grid.size(); ++k)
    out << format_double(r.x_grid[k]) << ',' << detail::num(r.coverage[k]) << ','
        << detail::num(r.avg_width[k]) << ',' << r.point_successes[k] << ',' << r.point_failures[k] << '\n';
}

inline void write_density_csv(std::ostream& out, const DensityCurve& c) {
  out << "y,density\n";
  for (std::size_t k = 0; k < c.grid.size(); ++k)
    out << format_double(c.grid[k]) << ',' << format_double(c.density[k]) << '\n';
}

inline void write_qq_csv(std::ostream& out, const std::vector<std::pair<double, double>>& qq) {
  out << "theoretical,sample\n";
  for (const auto& [a, b] : qq) out << format_double(a) << ',' << format_double(b) << '\n';
}

inline void write_bands_csv(std::ostream& out, const std::vector<BandPoint>& bands) {
  out << "x,median_m_hat,ci_lo,ci_hi\n";
  for (const auto& b : bands)
    out << format_double(b.x) << ',' << detail::num(b.median_m_hat) << ',' << detail::num(b.median_ci_lo)
        << ',' << detail::num(b.median_ci_hi) << '\n';
}

inline void write_mn_csv(std::ostream& out, const std::vector<double>& mn) {
  out << "m_n\n";
  for (double v : mn) out << format_double(v) << '\n';
}

inline void write_table1_csv(std::ostream& out, const std::vector<Table1Row>& rows) {
  out << "TR,CR,n,coverage,avg_width,coverage_mean_over_points,avg_width_mean_over_points,a0,u0,"
         "failed_replications,status\n";
  for (const auto& row : rows) {
    out << format_double(row.cell.tr_percent) << ',' << format_double(row.cell.cr_percent) << ','
        << row.cell.n << ',';
    if (row.failure.empty()) {
      const auto& r = row.report;
      out << format_double(r.coverage_pooled) << ',' << format_double(r.avg_width_pooled) << ','
          << format_double(r.coverage_mean) << ',' << format_double(r.avg_width_mean) << ','
          << format_double(row.a0) << ',' << format_double(row.u0) << ',' << r.failed_replications << ",ok\n";
    } else {
      out << ",,,," << format_double(row.a0) << ',' << format_double(row.u0) << ",,"
          << '"' << row.failure << "\"\n";
    }
  }
}

inline nlohmann::json report_summary(const McReport& r) {
  nlohmann::json j;
  j["replications"] = r.replications;
  j["failed_replications"] = r.failed_replications;
  j["coverage_pooled"] = r.coverage_pooled;
  j["avg_width_pooled"] = r.avg_width_pooled;
  j["coverage_mean_over_points"] = r.coverage_mean;
  j["avg_width_mean_over_points"] = r.avg_width_mean;
  j["headline_aggregation"] = "pooled";
  j["mean_cr_realized"] = r.mean_cr_realized;
  j["mean_tr_realized"] = r.mean_tr_realized;
  j["failure_reasons"] = r.failure_reasons;
  j["m_n_count"] = r.mn_values.size();
  if (r.normality) {
    j["ks"] = r.normality->ks;
    j["ks_scaled"] = r.normality->ks_scaled;
  }
  j["seeds"] = r.seeds;
  j["bandwidths"] = r.bandwidths;
  return j;
}

inline nlohmann::json kv_to_json(const KeyValueConfig& kv) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw InvalidConfig("cannot write " + path);
}

}  // namespace ltrc::io
