#pragma once

// Batch front end: experiment configs (JSON), figure presets, concurrent
// execution over parameter points, CSV/manifest/SVG persistence. The whole
// pipeline is deterministic: no randomness anywhere, worker parallelism only
// across parameter points, results gathered in input order.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmotor/csv.hpp"
#include "qmotor/load.hpp"
#include "qmotor/parallel.hpp"
#include "qmotor/svg.hpp"
#include "qmotor/version.hpp"

namespace qmotor {

using json = nlohmann::json;

struct OutputConfig {
  std::string dir = "out";
  bool svg = false;
};

struct ExperimentConfig {
  std::string experiment = "theta_scan";  ///< theta_scan | t0_dispersion_scan | load_scan |
                                          ///< trace | spectrum | crossing_scan
  ModelParams model;
  Integrator integrator;
  std::vector<double> theta_grid;
  std::vector<int> L_grid;
  std::vector<int> q_grid;
  int r = 10;
  int n_t0 = 16;
  int horizon_periods = 200;
  int samples_per_period = 128;  ///< Floquet period scans
  int direct_samples = 64;       ///< direct-propagation sampling per period
  int carrier_site = 1;
  bool include_direct = true;                   ///< theta_scan: also run the direct horizon
  std::string trace_target = "initial_state";   ///< or "floquet_k0_state"
  std::string dispersion_mode = "direct";       ///< direct | floquet
  CrossingOptions crossing;
  int refine_levels = 2;
  int refine_points = 9;
  OutputConfig output;
  int workers = 0;            ///< 0 = available parallelism
  std::string scale = "desk"; ///< desk | full (metadata)

  void validate() const {
    static const std::vector<std::string> kinds = {"theta_scan", "t0_dispersion_scan",
                                                   "load_scan", "trace", "spectrum",
                                                   "crossing_scan"};
    if (std::find(kinds.begin(), kinds.end(), experiment) == kinds.end())
      throw std::invalid_argument("config field 'experiment': unknown value '" + experiment + "'");
    model.validate();
    integrator.validate();
    if (carrier_site < 1 || carrier_site > model.L)
      throw std::invalid_argument("config field 'carrier_site': out of 1..L");
    if (n_t0 < 1) throw std::invalid_argument("config field 'n_t0': must be >= 1");
    if (horizon_periods < 1)
      throw std::invalid_argument("config field 'horizon_periods': must be >= 1");
    if (samples_per_period < 32)
      throw std::invalid_argument("config field 'samples_per_period': must be >= 32");
    if (direct_samples < 4)
      throw std::invalid_argument("config field 'direct_samples': must be >= 4");
    const bool needs_theta = experiment == "theta_scan" || experiment == "crossing_scan" ||
                             (experiment == "trace" && trace_target == "floquet_k0_state");
    if (needs_theta && theta_grid.empty())
      throw std::invalid_argument("config field 'theta_grid': must be non-empty for experiment " +
                                  experiment);
    if (experiment == "t0_dispersion_scan" && L_grid.empty())
      throw std::invalid_argument("config field 'L_grid': must be non-empty for experiment t0_dispersion_scan");
    if (experiment == "load_scan" && q_grid.empty())
      throw std::invalid_argument("config field 'q_grid': must be non-empty for experiment load_scan");
    if (experiment == "load_scan" && r < 1)
      throw std::invalid_argument("config field 'r': must be >= 1");
    if (trace_target != "initial_state" && trace_target != "floquet_k0_state")
      throw std::invalid_argument("config field 'trace_target': unknown value '" + trace_target + "'");
    if (dispersion_mode != "direct" && dispersion_mode != "floquet")
      throw std::invalid_argument("config field 'dispersion_mode': unknown value '" +
                                  dispersion_mode + "'");
    if (refine_levels < 0 || refine_points < 5)
      throw std::invalid_argument("config fields 'refine_levels'/'refine_points': need levels >= 0, points >= 5");
    for (double th : theta_grid)
      if (!std::isfinite(th)) throw std::invalid_argument("config field 'theta_grid': non-finite entry");
    for (int l : L_grid)
      if (l < 2) throw std::invalid_argument("config field 'L_grid': entries must be >= 2");
  }
};

// --------------------------------------------------------------------------
// JSON (de)serialization. Unknown keys are ignored; missing keys keep the
// defaults, so parse(serialize(c)) == c.

inline void to_json(json& j, const ModelParams& p) {
  j = json{{"L", p.L},     {"J_c", p.J_c},     {"J_s", p.J_s},
           {"W", p.W},     {"A1", p.A1},       {"A2", p.A2},
           {"omega", p.omega}, {"Theta", p.Theta}, {"omega_B", p.omega_B},
           {"t0", p.t0}};
}

inline void from_json(const json& j, ModelParams& p) {
  p.L = j.value("L", p.L);
  p.J_c = j.value("J_c", p.J_c);
  p.J_s = j.value("J_s", p.J_s);
  p.W = j.value("W", p.W);
  p.A1 = j.value("A1", p.A1);
  p.A2 = j.value("A2", p.A2);
  p.omega = j.value("omega", p.omega);
  p.Theta = j.value("Theta", p.Theta);
  p.omega_B = j.value("omega_B", p.omega_B);
  p.t0 = j.value("t0", p.t0);
}

inline std::string scheme_name(Scheme s) {
  return s == Scheme::midpoint_exponential ? "midpoint" : "cf4";
}

inline Scheme scheme_from_name(const std::string& s) {
  if (s == "midpoint") return Scheme::midpoint_exponential;
  if (s == "cf4") return Scheme::commutator_free_4;
  throw std::invalid_argument("config field 'integrator.scheme': unknown value '" + s + "'");
}

inline void to_json(json& j, const Integrator& i) {
  j = json{{"steps_per_period", i.steps_per_period},
           {"scheme", scheme_name(i.scheme)},
           {"tolerance", i.tolerance}};
}

inline void from_json(const json& j, Integrator& i) {
  i.steps_per_period = j.value("steps_per_period", i.steps_per_period);
  if (j.contains("scheme")) i.scheme = scheme_from_name(j.at("scheme").get<std::string>());
  i.tolerance = j.value("tolerance", i.tolerance);
}

inline void to_json(json& j, const CrossingOptions& c) {
  j = json{{"gap_threshold", c.gap_threshold},
           {"exact_tol", c.exact_tol},
           {"ambiguity_margin", c.ambiguity_margin},
           {"include_cross_block", c.include_cross_block}};
}

inline void from_json(const json& j, CrossingOptions& c) {
  c.gap_threshold = j.value("gap_threshold", c.gap_threshold);
  c.exact_tol = j.value("exact_tol", c.exact_tol);
  c.ambiguity_margin = j.value("ambiguity_margin", c.ambiguity_margin);
  c.include_cross_block = j.value("include_cross_block", c.include_cross_block);
}

inline void to_json(json& j, const OutputConfig& o) {
  j = json{{"dir", o.dir}, {"svg", o.svg}};
}

inline void from_json(const json& j, OutputConfig& o) {
  o.dir = j.value("dir", o.dir);
  o.svg = j.value("svg", o.svg);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment", c.experiment},
           {"model", c.model},
           {"integrator", c.integrator},
           {"theta_grid", c.theta_grid},
           {"L_grid", c.L_grid},
           {"q_grid", c.q_grid},
           {"r", c.r},
           {"n_t0", c.n_t0},
           {"horizon_periods", c.horizon_periods},
           {"samples_per_period", c.samples_per_period},
           {"direct_samples", c.direct_samples},
           {"carrier_site", c.carrier_site},
           {"include_direct", c.include_direct},
           {"trace_target", c.trace_target},
           {"dispersion_mode", c.dispersion_mode},
           {"crossing", c.crossing},
           {"refine_levels", c.refine_levels},
           {"refine_points", c.refine_points},
           {"output", c.output},
           {"workers", c.workers},
           {"scale", c.scale}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  c.experiment = j.value("experiment", c.experiment);
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("integrator")) j.at("integrator").get_to(c.integrator);
  c.theta_grid = j.value("theta_grid", c.theta_grid);
  c.L_grid = j.value("L_grid", c.L_grid);
  c.q_grid = j.value("q_grid", c.q_grid);
  c.r = j.value("r", c.r);
  c.n_t0 = j.value("n_t0", c.n_t0);
  c.horizon_periods = j.value("horizon_periods", c.horizon_periods);
  c.samples_per_period = j.value("samples_per_period", c.samples_per_period);
  c.direct_samples = j.value("direct_samples", c.direct_samples);
  c.carrier_site = j.value("carrier_site", c.carrier_site);
  c.include_direct = j.value("include_direct", c.include_direct);
  c.trace_target = j.value("trace_target", c.trace_target);
  c.dispersion_mode = j.value("dispersion_mode", c.dispersion_mode);
  if (j.contains("crossing")) j.at("crossing").get_to(c.crossing);
  c.refine_levels = j.value("refine_levels", c.refine_levels);
  c.refine_points = j.value("refine_points", c.refine_points);
  if (j.contains("output")) j.at("output").get_to(c.output);
  c.workers = j.value("workers", c.workers);
  c.scale = j.value("scale", c.scale);
}

// --------------------------------------------------------------------------
// Execution

struct RunResult {
  int exit_code = 0;  ///< 0 ok, 2 = numerical failure at >= 1 point
  std::vector<std::string> outputs;
  json manifest;
};

namespace detail {

struct PointLog {
  std::vector<std::string> labels;
  std::vector<std::string> errors;  // empty string = ok

  json to_json() const {
    json arr = json::array();
    for (size_t i = 0; i < labels.size(); ++i)
      arr.push_back({{"index", i},
                     {"label", labels[i]},
                     {"status", errors[i].empty() ? "ok" : "failed: " + errors[i]}});
    return arr;
  }
  bool any_failed() const {
    for (const auto& e : errors)
      if (!e.empty()) return true;
    return false;
  }
};

inline std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output.dir) / name).string();
}

// ---- theta_scan -----------------------------------------------------------

struct ThetaPoint {
  double v_floquet = 0.0;
  double v_direct = 0.0;
  double band = 0.0;
};

inline void run_theta_scan(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  const int n = static_cast<int>(cfg.theta_grid.size());
  std::vector<ThetaPoint> pts(static_cast<size_t>(n));
  for (double th : cfg.theta_grid) log.labels.push_back("theta=" + csv_num(th));
  log.errors = parallel_points(n, cfg.workers, [&](int i) {
    ModelParams p = cfg.model;
    p.Theta = cfg.theta_grid[static_cast<size_t>(i)];
    const auto d = make_drive(p);
    auto& pt = pts[static_cast<size_t>(i)];
    pt.v_floquet = solve_transport(p, d, cfg.carrier_site, cfg.n_t0, cfg.integrator,
                                   cfg.samples_per_period)
                       .v_c_avg();
    if (cfg.include_direct) {
      const auto ens = direct_t0_ensemble(p, d, cfg.carrier_site, cfg.n_t0,
                                          cfg.horizon_periods, cfg.direct_samples,
                                          cfg.integrator);
      pt.v_direct = ens.v_at_horizon.mean();
      // fluctuation band of the mean running average over the last 10%
      double lo = 1e300, hi = -1e300;
      const int total = static_cast<int>(ens.mean_running.size()) - 1;
      for (int m = (9 * total) / 10; m <= total; ++m) {
        lo = std::min(lo, ens.mean_running[m]);
        hi = std::max(hi, ens.mean_running[m]);
      }
      pt.band = hi - lo;
    }
  });

  const std::string direct_col = "v_direct_" + std::to_string(cfg.horizon_periods) + "T";
  std::vector<std::string> cols = {"theta", "v_floquet"};
  if (cfg.include_direct) {
    cols.push_back(direct_col);
    cols.push_back("band");
  }
  CsvWriter csv(out_path(cfg, "theta_scan.csv"), cols);
  for (int i = 0; i < n; ++i) {
    if (!log.errors[static_cast<size_t>(i)].empty()) continue;
    const auto& pt = pts[static_cast<size_t>(i)];
    if (cfg.include_direct)
      csv.row({cfg.theta_grid[static_cast<size_t>(i)], pt.v_floquet, pt.v_direct, pt.band});
    else
      csv.row({cfg.theta_grid[static_cast<size_t>(i)], pt.v_floquet});
  }
  res.outputs.push_back("theta_scan.csv");

  if (cfg.output.svg) {
    std::vector<SvgSeries> series;
    SvgSeries fs{"v_floquet", {}, false};
    for (const auto& pt : pts) fs.y.push_back(pt.v_floquet);
    series.push_back(fs);
    if (cfg.include_direct) {
      SvgSeries ds{direct_col, {}, false};
      for (const auto& pt : pts) ds.y.push_back(pt.v_direct);
      series.push_back(ds);
    }
    svg_line_plot(out_path(cfg, "theta_scan.svg"), "t0-averaged motor velocity", "Theta",
                  "v_c [v0]", cfg.theta_grid, series);
    res.outputs.push_back("theta_scan.svg");
  }
}

// ---- spectrum --------------------------------------------------------------

inline void run_spectrum(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  log.labels.push_back("spectrum");
  log.errors = parallel_points(1, 1, [&](int) {
    const auto d = make_drive(cfg.model);
    const auto spec =
        floquet_analyze(cfg.model, d, cfg.model.t0, cfg.integrator, cfg.samples_per_period);
    CsvWriter csv(out_path(cfg, "spectrum.csv"),
                  {"state", "k_index", "k", "quasienergy", "vbar_c", "vbar_s"});
    for (int nn = 0; nn < spec.dim(); ++nn)
      csv.row({static_cast<double>(nn), static_cast<double>(spec.block_of(nn)), spec.k_label(nn),
               spec.quasienergy(nn), spec.mean_velocity(nn), spec.mean_velocity_starter(nn)});
  });
  res.outputs.push_back("spectrum.csv");
}

// ---- crossing_scan ---------------------------------------------------------

inline void run_crossing_scan(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  const int n = static_cast<int>(cfg.theta_grid.size());
  std::vector<TransportSolution> sols(static_cast<size_t>(n));
  for (double th : cfg.theta_grid) log.labels.push_back("theta=" + csv_num(th));
  log.errors = parallel_points(n, cfg.workers, [&](int i) {
    ModelParams p = cfg.model;
    p.Theta = cfg.theta_grid[static_cast<size_t>(i)];
    const auto d = make_drive(p);
    sols[static_cast<size_t>(i)] =
        solve_transport(p, d, cfg.carrier_site, cfg.n_t0, cfg.integrator, cfg.samples_per_period);
  });
  for (const auto& e : log.errors)
    if (!e.empty())
      throw numerical_error("crossing_scan: a grid point failed, cannot continue curves: " + e);

  std::vector<FloquetSpectrum> spectra;
  spectra.reserve(static_cast<size_t>(n));
  for (const auto& s : sols) spectra.push_back(s.spectrum);
  const Continuation cont = track_states(spectra, cfg.crossing.ambiguity_margin);

  {
    CsvWriter csv(out_path(cfg, "crossing_spectrum.csv"),
                  {"theta", "curve", "state", "k_index", "quasienergy", "vbar_c"});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < spectra[static_cast<size_t>(i)].dim(); ++c) {
        const int s = cont.state_of_curve[static_cast<size_t>(i)][static_cast<size_t>(c)];
        const auto& sp = spectra[static_cast<size_t>(i)];
        csv.row({cfg.theta_grid[static_cast<size_t>(i)], static_cast<double>(c),
                 static_cast<double>(s), static_cast<double>(sp.block_of(s)), sp.quasienergy(s),
                 sp.mean_velocity(s)});
      }
    res.outputs.push_back("crossing_spectrum.csv");
  }
  {
    CsvWriter csv(out_path(cfg, "crossing_velocity.csv"), {"theta", "v_c", "v_s"});
    for (int i = 0; i < n; ++i) {
      const auto& sol = sols[static_cast<size_t>(i)];
      // v_s converted to units of v0 for direct comparison with v_c
      csv.row({cfg.theta_grid[static_cast<size_t>(i)], sol.v_c_avg(),
               sol.v_s_avg() * cfg.model.J_s / cfg.model.J_c});
    }
    res.outputs.push_back("crossing_velocity.csv");
  }

  const CrossingScan scan = detect_avoided_crossings(cfg.theta_grid, spectra, cfg.crossing);
  std::vector<Crossing> all = scan.crossings;

  if (cfg.refine_levels > 0) {
    auto provider = [&](double theta) {
      ModelParams p = cfg.model;
      p.Theta = theta;
      const auto d = make_drive(p);
      return floquet_decompose(monodromy(p, d, p.t0, d.period(), cfg.integrator), p);
    };
    int refined = 0;
    for (const auto& c : scan.crossings) {
      if (!c.same_block || refined >= 8) continue;
      ++refined;
      const double h = cfg.theta_grid[1] - cfg.theta_grid[0];
      const auto sub = refine_window(provider, c.theta_star - h, c.theta_star + h,
                                     cfg.refine_points, cfg.refine_levels, cfg.crossing);
      all.insert(all.end(), sub.begin(), sub.end());
    }
  }
  {
    CsvWriter csv(out_path(cfg, "crossings.csv"),
                  {"theta_star", "gap", "t_obs", "block_a", "block_b", "curve_a", "curve_b",
                   "same_block", "exact", "level"});
    for (const auto& c : all)
      csv.row({c.theta_star, c.gap, c.t_obs, static_cast<double>(c.block_a),
               static_cast<double>(c.block_b), static_cast<double>(c.curve_a),
               static_cast<double>(c.curve_b), c.same_block ? 1.0 : 0.0, c.exact ? 1.0 : 0.0,
               static_cast<double>(c.level)});
    res.outputs.push_back("crossings.csv");
  }
  if (!scan.ambiguities.empty()) {
    CsvWriter csv(out_path(cfg, "continuation_ambiguities.csv"),
                  {"grid_index", "block", "best_overlap", "second_overlap"});
    for (const auto& a : scan.ambiguities)
      csv.row({static_cast<double>(a.grid_index), static_cast<double>(a.block), a.best, a.second});
    res.outputs.push_back("continuation_ambiguities.csv");
  }

  if (cfg.output.svg) {
    std::vector<SvgSeries> eps_series(static_cast<size_t>(spectra.front().dim()));
    for (int c = 0; c < spectra.front().dim(); ++c) {
      eps_series[static_cast<size_t>(c)].name = "";
      for (int i = 0; i < n; ++i) {
        const int s = cont.state_of_curve[static_cast<size_t>(i)][static_cast<size_t>(c)];
        eps_series[static_cast<size_t>(c)].y.push_back(spectra[static_cast<size_t>(i)].quasienergy(s));
      }
    }
    svg_line_plot(out_path(cfg, "crossing_spectrum.svg"), "quasienergy curves", "Theta",
                  "quasienergy [J_c]", cfg.theta_grid, eps_series);
    std::vector<SvgSeries> vel(2);
    vel[0].name = "v_c";
    vel[1].name = "v_s";
    for (const auto& sol : sols) {
      vel[0].y.push_back(sol.v_c_avg());
      vel[1].y.push_back(sol.v_s_avg() * cfg.model.J_s / cfg.model.J_c);
    }
    svg_line_plot(out_path(cfg, "crossing_velocity.svg"), "asymptotic velocities", "Theta",
                  "v [v0]", cfg.theta_grid, vel);
    res.outputs.push_back("crossing_spectrum.svg");
    res.outputs.push_back("crossing_velocity.svg");
  }
}

// ---- t0_dispersion_scan ----------------------------------------------------

inline void run_dispersion_scan(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  const int n = static_cast<int>(cfg.L_grid.size());
  std::vector<double> sigma(static_cast<size_t>(n)), vmean(static_cast<size_t>(n));
  std::vector<T0Ensemble> traces(static_cast<size_t>(n));
  const bool direct = cfg.dispersion_mode == "direct";
  for (int l : cfg.L_grid) log.labels.push_back("L=" + std::to_string(l));
  log.errors = parallel_points(n, cfg.workers, [&](int i) {
    ModelParams p = cfg.model;
    p.L = cfg.L_grid[static_cast<size_t>(i)];
    const int site = std::min(cfg.carrier_site, p.L);
    if (direct) {
      const auto d = make_drive(p);
      traces[static_cast<size_t>(i)] = direct_t0_ensemble(p, d, site, cfg.n_t0,
                                                          cfg.horizon_periods, cfg.direct_samples,
                                                          cfg.integrator, true);
      const auto& v = traces[static_cast<size_t>(i)].v_at_horizon;
      vmean[static_cast<size_t>(i)] = v.mean();
      sigma[static_cast<size_t>(i)] =
          std::sqrt(std::max(0.0, v.squaredNorm() / v.size() - v.mean() * v.mean()));
    } else {
      const auto d = make_drive(p);
      const auto sol = solve_transport(p, d, site, cfg.n_t0, cfg.integrator,
                                       cfg.samples_per_period);
      const auto& v = sol.v_c_of_t0;
      vmean[static_cast<size_t>(i)] = v.mean();
      sigma[static_cast<size_t>(i)] =
          std::sqrt(std::max(0.0, v.squaredNorm() / v.size() - v.mean() * v.mean()));
    }
  });

  {
    CsvWriter csv(out_path(cfg, "dispersion.csv"), {"L", "Sigma_v", "v_mean"});
    for (int i = 0; i < n; ++i) {
      if (!log.errors[static_cast<size_t>(i)].empty()) continue;
      csv.row({static_cast<double>(cfg.L_grid[static_cast<size_t>(i)]),
               sigma[static_cast<size_t>(i)], vmean[static_cast<size_t>(i)]});
    }
    res.outputs.push_back("dispersion.csv");
  }
  if (direct) {
    for (int i = 0; i < n; ++i) {
      if (!log.errors[static_cast<size_t>(i)].empty()) continue;
      const auto& ens = traces[static_cast<size_t>(i)];
      std::vector<std::string> cols = {"t_over_T"};
      for (int m = 0; m < cfg.n_t0; ++m) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "member_%02d", m);
        cols.push_back(buf);
      }
      cols.push_back("mean");
      const std::string name =
          "trace_L" + std::to_string(cfg.L_grid[static_cast<size_t>(i)]) + ".csv";
      CsvWriter csv(out_path(cfg, name), cols);
      const double T = 2.0 * pi / cfg.model.omega;
      for (int per = 0; per <= cfg.horizon_periods; ++per) {
        std::vector<double> row = {ens.period_marks[per] / T};
        double mean = 0.0;
        for (int m = 0; m < cfg.n_t0; ++m) {
          row.push_back(ens.member_running[static_cast<size_t>(m)][per]);
          mean += ens.member_running[static_cast<size_t>(m)][per];
        }
        row.push_back(mean / cfg.n_t0);
        csv.row(row);
      }
      res.outputs.push_back(name);
    }
  }
  if (cfg.output.svg) {
    std::vector<double> x;
    SvgSeries s{"Sigma_v", {}, true};
    for (int i = 0; i < n; ++i) {
      x.push_back(cfg.L_grid[static_cast<size_t>(i)]);
      s.y.push_back(sigma[static_cast<size_t>(i)]);
    }
    svg_line_plot(out_path(cfg, "dispersion.svg"), "start-time dispersion", "L", "Sigma_v [v0]",
                  x, {s});
    res.outputs.push_back("dispersion.svg");
  }
}

// ---- load_scan --------------------------------------------------------------

inline void run_load_scan(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  const int n = static_cast<int>(cfg.q_grid.size());
  std::vector<LoadPoint> pts(static_cast<size_t>(n));
  for (int q : cfg.q_grid)
    log.labels.push_back("q=" + std::to_string(q) + "/r=" + std::to_string(cfg.r));
  log.errors = parallel_points(n, cfg.workers, [&](int i) {
    pts[static_cast<size_t>(i)] =
        load_point(cfg.model, cfg.q_grid[static_cast<size_t>(i)], cfg.r, cfg.carrier_site,
                   cfg.n_t0, cfg.integrator, cfg.samples_per_period);
  });
  CsvWriter csv(out_path(cfg, "load.csv"), {"q", "r", "omega_B", "v_min", "v_max", "v_c"});
  for (int i = 0; i < n; ++i) {
    if (!log.errors[static_cast<size_t>(i)].empty()) continue;
    const auto& pt = pts[static_cast<size_t>(i)];
    csv.row({static_cast<double>(pt.q), static_cast<double>(pt.r), pt.omega_B, pt.v_min,
             pt.v_max, pt.v_c});
  }
  res.outputs.push_back("load.csv");
  if (cfg.output.svg) {
    std::vector<double> x;
    SvgSeries smin{"v_min", {}, true}, smax{"v_max", {}, true}, sc{"v_c", {}, true};
    for (const auto& pt : pts) {
      x.push_back(pt.omega_B);
      smin.y.push_back(pt.v_min);
      smax.y.push_back(pt.v_max);
      sc.y.push_back(pt.v_c);
    }
    // scatter only: the load characteristic must not be interpolated
    svg_line_plot(out_path(cfg, "load.svg"), "load characteristic", "omega_B", "v [v0]", x,
                  {smin, smax, sc});
    res.outputs.push_back("load.svg");
  }
}

// ---- trace -------------------------------------------------------------------

inline void run_trace(const ExperimentConfig& cfg, RunResult& res, PointLog& log) {
  if (cfg.trace_target == "initial_state") {
    log.labels.push_back("trace");
    log.errors = parallel_points(1, 1, [&](int) {
      const auto d = make_drive(cfg.model);
      const StateVector psi0 = initial_state(cfg.model, cfg.carrier_site);
      const auto r = propagate(psi0, d, cfg.model.t0 + cfg.horizon_periods * d.period(),
                               cfg.horizon_periods * cfg.direct_samples, cfg.integrator);
      CsvWriter csv(out_path(cfg, "trace.csv"), {"t", "v_c", "v_s", "running_avg"});
      for (int i = 0; i < r.trace.size(); ++i)
        csv.row({r.trace.times[i], r.trace.v_c[i], r.trace.v_s[i], r.trace.running_avg[i]});
      if (cfg.output.svg) {
        std::vector<double> x(r.trace.times.begin(), r.trace.times.end());
        SvgSeries vc{"v_c", std::vector<double>(r.trace.v_c.begin(), r.trace.v_c.end()), false};
        SvgSeries ra{"running_avg",
                     std::vector<double>(r.trace.running_avg.begin(), r.trace.running_avg.end()),
                     false};
        svg_line_plot(out_path(cfg, "trace.svg"), "velocity trace", "t", "v [v0]", x, {vc, ra});
        res.outputs.push_back("trace.svg");
      }
    });
    res.outputs.push_back("trace.csv");
    return;
  }

  // floquet_k0_state: instantaneous quasimomentum-resolved velocity map of a
  // selected k = 0 Floquet state at every grid Theta. The state is picked at
  // the last grid point (largest |vbar| in the k = 0 block) and followed to
  // the other Thetas by eigenvector overlap.
  log.labels.push_back("floquet_k0_map");
  log.errors = parallel_points(1, 1, [&](int) {
    const int n = static_cast<int>(cfg.theta_grid.size());
    std::vector<FloquetSpectrum> specs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      ModelParams p = cfg.model;
      p.Theta = cfg.theta_grid[static_cast<size_t>(i)];
      const auto d = make_drive(p);
      specs[static_cast<size_t>(i)] =
          floquet_analyze(p, d, p.t0, cfg.integrator, cfg.samples_per_period);
    }
    const auto& ref = specs[static_cast<size_t>(n - 1)];
    int pick = 0;
    for (int j = 1; j < ref.L; ++j)
      if (std::abs(ref.vbar_c[0][j]) > std::abs(ref.vbar_c[0][pick])) pick = j;

    CsvWriter map_csv(out_path(cfg, "floquet_map.csv"), {"theta", "t", "kappa", "weight"});
    CsvWriter vel_csv(out_path(cfg, "floquet_velocity.csv"), {"theta", "t", "v_c"});
    for (int i = 0; i < n; ++i) {
      ModelParams p = cfg.model;
      p.Theta = cfg.theta_grid[static_cast<size_t>(i)];
      const auto d = make_drive(p);
      const auto& spec = specs[static_cast<size_t>(i)];
      Eigen::Index slot = pick;
      if (i != n - 1)
        (spec.vectors[0].adjoint() * ref.vectors[0].col(pick)).cwiseAbs().maxCoeff(&slot);
      Vec w = spec.vectors[0].col(slot);
      const double T = d.period();
      const int S = cfg.samples_per_period;
      const int steps = qmotor::detail::effective_steps(cfg.integrator, T, T, S);
      const double dt = T / steps;
      const int stride = steps / S;
      // the state lives in the k = 0 block; the other blocks stay empty
      std::vector<Mat> blocks(static_cast<size_t>(p.L), Mat::Zero(p.L, 1));
      blocks[0] = w;
      for (int s = 0; s <= S; ++s) {
        const double t = p.t0 + s * T / S;
        const double a = d.value(t);
        const Vec cur = blocks[0].col(0);
        const Eigen::VectorXd rho = kspace::rho_carrier_single_block(p.L, 0, cur);
        double v = 0.0;
        for (int j = 0; j < p.L; ++j) {
          const double kap = kspace::kappa(p.L, j);
          const double weight = rho[j] * std::sin(kap - a);
          map_csv.row({p.Theta, t, kap, weight});
          v += weight;
        }
        vel_csv.row({p.Theta, t, v});
        if (s < S)
          for (int sub = 0; sub < stride; ++sub)
            step_blocks(p, d, cfg.integrator.scheme, blocks, t + sub * dt, dt);
      }
    }
  });
  res.outputs.push_back("floquet_map.csv");
  res.outputs.push_back("floquet_velocity.csv");
}

}  // namespace detail

/// Executes the experiment, writing CSV data files, a JSON manifest echoing
/// the resolved config and per-point status, and optional SVG quick-looks.
inline RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.output.dir);
  RunResult res;
  detail::PointLog log;
  if (cfg.experiment == "theta_scan")
    detail::run_theta_scan(cfg, res, log);
  else if (cfg.experiment == "spectrum")
    detail::run_spectrum(cfg, res, log);
  else if (cfg.experiment == "crossing_scan")
    detail::run_crossing_scan(cfg, res, log);
  else if (cfg.experiment == "t0_dispersion_scan")
    detail::run_dispersion_scan(cfg, res, log);
  else if (cfg.experiment == "load_scan")
    detail::run_load_scan(cfg, res, log);
  else
    detail::run_trace(cfg, res, log);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.manifest = json{{"tool", "qmotor"},
                      {"version", version},
                      {"config", cfg},
                      {"wall_time_s", wall},
                      {"points", log.to_json()},
                      {"outputs", res.outputs}};
  std::ofstream mf(detail::out_path(cfg, "manifest.json"));
  mf << res.manifest.dump(2) << '\n';
  res.outputs.push_back("manifest.json");
  res.exit_code = log.any_failed() ? 2 : 0;
  return res;
}

// --------------------------------------------------------------------------
// Presets: the five bundled parameter studies.

struct Preset {
  std::string name;
  std::string description;
  ExperimentConfig config;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n, bool endpoint) {
  std::vector<double> g(static_cast<size_t>(n));
  const int div = endpoint ? n - 1 : n;
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = lo + (hi - lo) * i / div;
  return g;
}

inline ModelParams ring16_params() {
  ModelParams p;
  p.L = 16;
  p.J_c = 1.0;
  p.J_s = 1.0;
  p.W = 0.2;
  p.A1 = 0.5;
  p.A2 = 0.25;
  p.omega = 0.1;
  p.t0 = 0.0;
  return p;
}

}  // namespace detail

inline std::vector<Preset> presets(const std::string& scale = "desk") {
  const bool full = scale == "full";
  std::vector<Preset> out;

  {
    ExperimentConfig c;
    c.experiment = "trace";
    c.trace_target = "floquet_k0_state";
    c.model = detail::ring16_params();
    c.theta_grid = {0.0, pi / 2};
    c.samples_per_period = 128;
    c.scale = scale;
    out.push_back({"fig2",
                   "quasimomentum-resolved velocity map of a k=0 Floquet state at Theta=0 and "
                   "pi/2 (L=16, W=0.2, A1=0.5, A2=0.25, hw=0.1)",
                   c});
  }
  {
    ExperimentConfig c;
    c.experiment = "theta_scan";
    c.model = detail::ring16_params();
    c.theta_grid = detail::linspace(-pi, pi, full ? 64 : 32, false);
    c.n_t0 = 16;
    c.horizon_periods = 200;
    c.include_direct = true;
    c.direct_samples = 64;
    c.scale = scale;
    out.push_back({"fig3",
                   "t0-averaged motor velocity vs Theta: Floquet asymptotics against 200T direct "
                   "propagation (L=16)",
                   c});
  }
  {
    ExperimentConfig c;
    c.experiment = "crossing_scan";
    c.model = detail::ring16_params();
    c.model.L = 4;
    c.model.W = 0.01;
    c.model.A1 = 1.0;
    c.model.A2 = 0.5;
    c.model.omega = 0.05;
    c.integrator.scheme = Scheme::commutator_free_4;
    c.integrator.steps_per_period = 2048;
    c.theta_grid = detail::linspace(-pi, pi, full ? 401 : 201, true);
    c.n_t0 = 16;
    c.refine_levels = 2;
    c.refine_points = 9;
    c.scale = scale;
    out.push_back({"fig4",
                   "quasienergy spectrum and velocity resonances vs Theta with avoided-crossing "
                   "detection (L=4, hw=0.05, A1=1, A2=0.5, W=0.01)",
                   c});
  }
  {
    ExperimentConfig c;
    c.experiment = "t0_dispersion_scan";
    c.model = detail::ring16_params();
    c.model.Theta = pi / 2;
    c.L_grid = full ? std::vector<int>{4, 8, 16, 32, 64} : std::vector<int>{4, 8, 16, 32};
    c.n_t0 = 20;
    c.horizon_periods = full ? 500 : 200;
    c.direct_samples = 60;
    c.dispersion_mode = "direct";
    c.scale = scale;
    out.push_back({"fig5",
                   "start-time dispersion of the asymptotic velocity vs ring size, 20 t0 "
                   "realizations (Theta=pi/2)",
                   c});
  }
  {
    ExperimentConfig c;
    c.experiment = "load_scan";
    c.model = detail::ring16_params();
    c.model.L = 4;
    c.model.Theta = pi / 2;
    c.q_grid.clear();
    for (int q = -30; q <= 30; ++q) c.q_grid.push_back(q);
    c.r = 10;
    c.n_t0 = 20;
    c.samples_per_period = full ? 128 : 64;
    c.scale = scale;
    out.push_back({"fig6",
                   "load characteristic: velocity range and mean motor velocity vs Bloch bias "
                   "omega_B = omega q/r (L=4, r=10, Theta=pi/2)",
                   c});
  }
  return out;
}

inline ExperimentConfig preset(const std::string& name, const std::string& scale = "desk") {
  for (auto& p : presets(scale))
    if (p.name == name) return p.config;
  throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace qmotor
