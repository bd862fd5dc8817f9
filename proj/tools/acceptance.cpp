// Acceptance runner: executes the lab scenarios into a work directory, then
// judges every criterion from the CSV files alone. Slopes are refitted here
// with a plain least-squares fit rather than read back from the reports.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vdlab/lab.hpp"

namespace fs = std::filesystem;
using namespace vdlab;
using namespace vdlab::lab;

namespace {

#ifndef VDLAB_CONFIG_DIR
#define VDLAB_CONFIG_DIR "configs"
#endif

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::vector<Row> rows;
  std::vector<std::string> header;
  std::string line;
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    Row r;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) r[header[i]] = cells[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

double num(const Row& r, const std::string& key) {
  const auto it = r.find(key);
  if (it == r.end()) throw std::runtime_error("csv column '" + key + "' missing");
  return std::stod(it->second);
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) throw std::runtime_error("slope fit needs two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// Slope of rows where `key` == `value`, as a function of epsilon.
double series_slope(const std::vector<Row>& rows, const std::string& key, const std::string& value,
                    const std::string& x = "epsilon", const std::string& y = "value") {
  std::vector<double> xs, ys;
  for (const auto& r : rows)
    if (r.at(key) == value) {
      xs.push_back(num(r, x));
      ys.push_back(std::abs(num(r, y)));
    }
  return loglog_slope(xs, ys);
}

// Slope over the first decade of positive times, t_1 .. 10 t_1.
double first_decade_slope(const std::vector<Row>& rows, const std::string& column) {
  double t1 = 0.0;
  for (const auto& r : rows)
    if (num(r, "t") > 0.0) {
      t1 = num(r, "t");
      break;
    }
  std::vector<double> t, v;
  for (const auto& r : rows) {
    const double ti = num(r, "t");
    if (ti > 0.0 && ti <= 10.0 * t1 * (1.0 + 1e-12)) {
      t.push_back(ti);
      v.push_back(std::max(std::abs(num(r, column)), 1e-300));
    }
  }
  return loglog_slope(t, v);
}

std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Run {
  std::string name;
  Scenario scenario;
  fs::path config;
  fs::path dir;
  Outcome outcome;
  double seconds = 0.0;
};

Run execute(const std::string& name, Scenario s, const fs::path& config, const fs::path& dir, int jobs) {
  fs::remove_all(dir);
  Run r{name, s, config, dir, {}, 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  r.outcome = run_scenario(s, Config::load(config.string()), {dir.string(), jobs, false});
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!r.outcome.error.empty()) throw std::runtime_error(name + ": " + r.outcome.error);
  return r;
}

// Accumulates the parts of one criterion.
struct Judgement {
  bool ok = true;
  std::vector<std::string> parts;
  void expect(bool cond, const std::string& what) {
    ok = ok && cond;
    parts.push_back((cond ? "" : "FAILED ") + what);
  }
};

std::string file_body(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  std::string line;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') os << line << '\n';
  return os.str();
}

std::set<fs::path> csv_files(const fs::path& dir) {
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.insert(fs::relative(e.path(), dir));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria for the variable-density lab"};
  std::string config_dir = VDLAB_CONFIG_DIR;
  std::string work = (fs::temp_directory_path() / "vdlab_acceptance").string();
  std::vector<int> only;
  int jobs = 1;
  app.add_option("--configs", config_dir, "directory holding the scenario configs");
  app.add_option("--work", work, "scratch directory for scenario outputs");
  app.add_option("--only", only, "run only these criteria; 9 reruns whatever the others ran");
  app.add_option("--jobs", jobs, "worker threads for the first pass; the determinism rerun uses one more")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const fs::path cfg(config_dir), root(work);
  const auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  std::deque<Run> runs;  // references handed out by go() stay valid
  int failures = 0;

  const auto report = [&](int k, const std::string& title, Judgement v, double seconds, double budget) {
    if (budget > 0.0) v.expect(seconds <= budget, "runtime " + brief(seconds) + " s <= " + brief(budget) + " s");
    std::string detail;
    for (const auto& p : v.parts) detail += (detail.empty() ? "" : "; ") + p;
    std::cout << (v.ok ? "PASS" : "FAIL") << "  criterion " << k << " " << title << ": " << detail << std::endl;
    if (!v.ok) ++failures;
  };
  const auto guarded = [&](int k, const std::string& title, double budget, auto&& body) {
    if (!wanted(k)) return;
    Judgement v;
    double seconds = 0.0;
    try {
      seconds = body(v);
    } catch (const std::exception& e) {
      v.expect(false, std::string("error: ") + e.what());
    }
    report(k, title, v, seconds, budget);
  };
  const auto go = [&](const std::string& name, Scenario s, const std::string& file) -> const Run& {
    runs.push_back(execute(name, s, cfg / file, root / "first" / name, jobs));
    return runs.back();
  };

  guarded(1, "mollifier rates", 10.0, [&](Judgement& v) {
    const auto& r = go("mollifier", Scenario::mollifier_check, "mollifier.cfg");
    const auto rows = read_csv(r.dir / "mollifier.csv");
    for (const char* a : {"0.3", "0.5", "0.7"}) {
      const double alpha = std::stod(a);
      std::vector<Row> sub;
      for (const auto& row : rows)
        if (std::abs(num(row, "alpha") - alpha) < 1e-12) sub.push_back(row);
      const double d = series_slope(sub, "quantity", "mollifier_difference");
      const double g = series_slope(sub, "quantity", "mollified_gradient");
      v.expect(std::abs(d - alpha) <= 0.1, std::string("alpha ") + a + " ||w^eps - w|| slope " + brief(d));
      v.expect(g >= alpha - 1.0 - 0.1, std::string("grad slope ") + brief(g) + " >= " + brief(alpha - 1.1));
    }
    return r.seconds;
  });

  guarded(2, "Besov estimator fidelity", 10.0, [&](Judgement& v) {
    const auto& r = go("besov", Scenario::besov_estimate, "besov.cfg");
    bool saw_constant = false, saw_smooth = false;
    int lacunary = 0;
    for (const auto& row : read_csv(r.dir / "besov_estimates.csv")) {
      const auto& f = row.at("field");
      if (f == "constant") {
        saw_constant = true;
        v.expect(row.at("no_increments") == "1" && num(row, "increment_sup") == 0.0, "constant: zero increments");
      } else if (f == "smooth") {
        saw_smooth = true;
        v.expect(num(row, "alpha_hat") >= 0.95, "smooth alpha_hat " + brief(num(row, "alpha_hat")) + " >= 0.95");
      } else if (f.rfind("alpha=", 0) == 0) {
        ++lacunary;
        const double a = std::stod(f.substr(6)), ah = num(row, "alpha_hat");
        v.expect(std::abs(ah - a) <= 0.05, f + " alpha_hat " + brief(ah));
      }
    }
    v.expect(saw_constant && saw_smooth && lacunary == 3, "battery complete");
    return r.seconds;
  });

  guarded(3, "commutator lemma", 30.0, [&](Judgement& v) {
    const auto& r = go("lemma", Scenario::commutator_sweep, "lemma.cfg");
    const auto rows = read_csv(r.dir / "commutator.csv");
    for (const char* a : {"0.3", "0.5", "0.7"}) {
      const double s = series_slope(rows, "term", std::string("commutator[alpha=") + a + "]");
      v.expect(s >= std::stod(a) - 0.1, std::string("alpha ") + a + " slope " + brief(s));
    }
    double zero = 0.0, oracle = -1.0;
    for (const auto& row : rows) {
      if (row.at("term") == "commutator[constant]") zero = std::max(zero, std::abs(num(row, "value")));
      if (row.at("term") == "oracle_max_diff") oracle = num(row, "value");
    }
    v.expect(zero <= 1e-13, "constant f max " + brief(zero) + " (round-off zero, <= 1e-13)");
    v.expect(oracle >= 0.0 && oracle <= 1e-10, "32^2 oracle diff " + brief(oracle) + " <= 1e-10");
    return r.seconds;
  });

  guarded(4, "Theorem-1 term sweeps", 120.0, [&](Judgement& v) {
    const auto& r = go("thm1", Scenario::thm1_suite, "thm1.cfg");
    const auto rows = read_csv(r.dir / "terms_alpha_0.5.csv");
    const double b1 = series_slope(rows, "term", "B1"), b2 = series_slope(rows, "term", "B2");
    v.expect(b2 >= 0.4, "alpha 0.5 B2 slope " + brief(b2) + " >= 0.4");
    v.expect(b1 >= 1.4, "alpha 0.5 B1 slope " + brief(b1) + " >= 1.4");
    bool low_ineligible = false;
    for (const auto& row : read_csv(r.dir / "exponents.csv"))
      if (std::abs(num(row, "alpha") - 0.2) < 1e-12 && row.at("eligible") == "0") low_ineligible = true;
    bool low_informational = fs::exists(r.dir / "terms_alpha_0.2.csv");
    for (const auto& c : r.outcome.checks)
      if (c.name.find("alpha=0.2") != std::string::npos)
        low_informational = low_informational && c.verdict == Verdict::informational &&
                            c.note.find("no guaranteed decay") != std::string::npos;
    v.expect(low_ineligible && low_informational, "alpha 0.2 reported as no guaranteed decay, informational");
    return r.seconds;
  });

  guarded(5, "Theorem-2 term sweeps", 180.0, [&](Judgement& v) {
    const auto& r = go("thm2", Scenario::thm2_suite, "thm2.cfg");
    const auto rows = read_csv(r.dir / "terms_0.4_0.4.csv");
    const double a2 = series_slope(rows, "term", "A2");
    v.expect(a2 >= 0.1, "A2 slope " + brief(a2) + " >= 0.1");
    for (const char* b : {"B1", "B2", "B_total"}) {
      const double s = series_slope(rows, "term", b);
      v.expect(s >= 0.1, std::string(b) + " slope " + brief(s) + " >= 0.1");
    }
    bool rejected = false;
    for (const auto& row : read_csv(r.dir / "exponents.csv"))
      if (std::abs(num(row, "alpha") - 0.5) < 1e-12 && std::abs(num(row, "beta") - 0.2) < 1e-12 &&
          row.at("condition") == "alpha + 2 beta > 1" && row.at("holds") == "0" && row.at("eligible") == "0")
        rejected = true;
    v.expect(rejected && !fs::exists(r.dir / "terms_0.5_0.2.csv"), "(0.5, 0.2) rejected without a sweep");
    return r.seconds;
  });

  guarded(6, "solver conservation", 300.0, [&](Judgement& v) {
    const auto drift = [](const std::vector<Row>& log, const std::string& col) {
      const double x0 = num(log.front(), col);
      double m = 0.0;
      for (const auto& row : log) m = std::max(m, std::abs(num(row, col) - x0) / std::abs(x0));
      return m;
    };
    const auto& tg = go("taylor_green", Scenario::evolve, "taylor_green.cfg");
    const double tg_seconds = tg.seconds;
    const auto log = read_csv(tg.dir / "run_log.csv");
    double div = 0.0;
    for (const auto& row : log) div = std::max(div, num(row, "div_residual"));
    v.expect(std::abs(num(log.back(), "t") - 1.0) < 1e-9, "TG reaches T = 1");
    v.expect(drift(log, "E") <= 1e-6, "TG energy drift " + brief(drift(log, "E")));
    v.expect(drift(log, "mass") <= 1e-10, "TG mass drift " + brief(drift(log, "mass")));
    v.expect(div <= 1e-9, "TG div " + brief(div));
    std::vector<double> dts, errs;
    for (const auto& row : read_csv(tg.dir / "order.csv")) {
      dts.push_back(num(row, "dt"));
      errs.push_back(num(row, "error"));
    }
    const double order = loglog_slope(dts, errs);
    v.expect(std::abs(order - 4.0) <= 0.3, "dt order " + brief(order));
    const auto& vd = go("variable_density", Scenario::evolve, "variable_density.cfg");
    const auto vlog = read_csv(vd.dir / "run_log.csv");
    v.expect(std::abs(num(vlog.back(), "t") - 0.5) < 1e-9, "VD reaches T = 0.5");
    v.expect(drift(vlog, "E") <= 1e-5, "VD energy drift " + brief(drift(vlog, "E")));
    return tg_seconds + vd.seconds;
  });

  guarded(7, "pressure projection", 5.0, [&](Judgement& v) {
    const auto& r = go("projection", Scenario::evolve, "projection.cfg");
    double l2 = -1.0, grad = -1.0;
    for (const auto& row : read_csv(r.dir / "projection.csv")) {
      if (row.at("case") == "manufactured_pressure") l2 = std::max(l2, num(row, "error"));
      if (row.at("case") == "pure_gradient") grad = std::max(grad, num(row, "error"));
    }
    v.expect(l2 >= 0.0 && l2 <= 1e-9, "manufactured P L2 error " + brief(l2));
    v.expect(grad >= 0.0 && grad <= 1e-10, "pure gradient residual " + brief(grad));
    return r.seconds;
  });

  guarded(8, "initial-time continuity", 60.0, [&](Judgement& v) {
    const auto& r = go("energy_audit", Scenario::energy_audit, "energy_audit.cfg");
    const auto energy = read_csv(r.dir / "energy.csv");
    const double ws = first_decade_slope(energy, "W"), ss = first_decade_slope(energy, "sqrt_continuity");
    v.expect(num(energy.front(), "W") == 0.0 && ws > 0.0, "W slope " + brief(ws));
    v.expect(num(energy.front(), "sqrt_continuity") == 0.0 && ss > 0.0, "sqrt continuity slope " + brief(ss));
    double gap = 0.0;
    for (const auto& row : read_csv(r.dir / "window.csv")) gap = std::max(gap, num(row, "gap"));
    v.expect(gap <= 1e-6, "max window gap " + brief(gap));
    double dmin = 1e300, closed = 0.0;
    for (const auto& row : read_csv(r.dir / "damped_window.csv")) {
      const double t = num(row, "t_tilde"), h = num(row, "eps") / 2.0, g = num(row, "gap");
      dmin = std::min(dmin, g);
      closed = std::max(closed, std::abs(g - (1.0 - std::exp(-t) * std::sinh(h) / h)));
    }
    v.expect(dmin > 1e-6, "damped copy flagged, min gap " + brief(dmin));
    v.expect(closed <= 1e-3, "damped gap vs closed form " + brief(closed));
    return r.seconds;
  });

  guarded(9, "determinism", 0.0, [&](Judgement& v) {
    const auto first = runs;
    double seconds = 0.0;
    for (const auto& r : first) {
      const auto again = execute(r.name, r.scenario, r.config, root / "rerun" / r.name, jobs + 1);
      seconds += again.seconds;
      const auto a = csv_files(r.dir), b = csv_files(again.dir);
      bool same = a == b && !a.empty();
      for (const auto& f : a) same = same && b.count(f) && file_body(r.dir / f) == file_body(again.dir / f);
      v.expect(same, r.name + " " + std::to_string(a.size()) + " csv");
    }
    v.expect(!first.empty(), "scenarios rerun");
    return seconds;
  });

  std::cout << (failures == 0 ? "all criteria pass" : "criteria failing: " + std::to_string(failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
