#include "commands.hpp"

#include "nonstat/calibrate.hpp"
#include "nonstat/diagnostics.hpp"
#include "nonstat/emulator.hpp"
#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"
#include "nonstat/local_mle.hpp"
#include "nonstat/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>

namespace nonstat::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  int workers = default_workers();
};

struct CalibrateArgs {
  double nu = 1.0;
  int n = 51;
  std::vector<double> sweep{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  bool anisotropic = false;
  double ratio = 4.0;
  std::vector<double> thetas_deg{0, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  std::string out_dir = "calibration";
  std::string cross = "centered";
};

struct FitArgs {
  std::string input;
  std::string out = "params.nsf";
  std::string diagnostics;
  int window = 9;
  int stride = 1;
  double nu = 1.0;
  std::string constraint = "sum-to-one";
  bool no_standardize = false;
  bool isotropic = false;
  int max_iter = 2000;
  double tol = 1e-4;
  std::string encoding = "f64le";
};

struct BuildArgs {
  std::string params;
  std::string table;
  std::string aniso_table;
  std::string out = "model.json";
  int order = 0;
  int buffer = -1;
  std::string normalization = "post-scale";
  bool nugget = false;
  std::string cross = "centered";
  std::string boundary = "clip";
};

struct SimulateArgs {
  std::string model;
  int n = 1;
  std::uint64_t seed = 1;
  std::string out = "simulated.nsf";
  std::string encoding = "f64le";
};

struct CorrmapArgs {
  std::string model;
  std::vector<std::size_t> nodes;
  std::string out_dir = "corrmaps";
  std::string encoding = "f64le";
};

struct WhitenArgs {
  std::string model;
  std::string input;
  std::string out = "whitened.nsf";
  std::string report = "whiteness.json";
  std::string variance_out;
  int rim = -1;
  int pool_radius = 2;
  double max_lag = 0.1;
  double var_lo = 0.7;
  double var_hi = 1.3;
  std::string encoding = "f64le";
};

struct McArgs {
  std::string design = "desk";
  std::vector<int> windows;
  std::vector<double> multipliers;
  std::vector<double> nus;
  std::vector<int> ps;
  int repetitions = 0;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "mc";
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

CrossTerm cross_from(const std::string& s) {
  if (s == "centered")
    return CrossTerm::Centered;
  if (s == "as-printed")
    return CrossTerm::AsPrinted;
  throw ConfigError("cross term must be 'centered' or 'as-printed', got '" + s + "'");
}

std::string cross_name(CrossTerm c) { return c == CrossTerm::Centered ? "centered" : "as-printed"; }

Boundary boundary_from(const std::string& s) {
  if (s == "clip")
    return Boundary::Clip;
  if (s == "truncate")
    return Boundary::Truncate;
  throw ConfigError("boundary must be 'clip' or 'truncate', got '" + s + "'");
}

std::string boundary_name(Boundary b) { return b == Boundary::Clip ? "clip" : "truncate"; }

Normalization normalization_from(const std::string& s) {
  if (s == "post-scale")
    return Normalization::PostScale;
  if (s == "row-weight")
    return Normalization::RowWeight;
  throw ConfigError("normalization must be 'post-scale' or 'row-weight', got '" + s + "'");
}

std::string normalization_name(Normalization n) {
  return n == Normalization::PostScale ? "post-scale" : "row-weight";
}

Encoding encoding_arg(const std::string& s) {
  try {
    return encoding_from(s);
  } catch (const DomainError&) {
    throw ConfigError("encoding must be 'f64le' or 'csv', got '" + s + "'");
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty())
    throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(path))
    throw IoError(what + " file not found: " + path);
}

std::string theta_tag(double deg) {
  const auto r = std::lround(deg);
  return std::abs(deg - double(r)) < 1e-9 ? std::to_string(r) : format_double(deg);
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const CalibrateArgs& a, const Common& c) {
  const Smoothness nu = smoothness_from(a.nu);
  if (nu == Smoothness::Half)
    throw ConfigError("calibration needs nu = 1 or 2");
  if (a.n < 1 || a.n % 2 == 0)
    throw ConfigError("lattice size N must be odd and positive");
  if (a.sweep.empty())
    throw ConfigError("calibration sweep is empty");
  std::vector<double> sweep = a.sweep;
  std::sort(sweep.begin(), sweep.end());
  CalibrationOptions opt;
  opt.n = a.n;
  opt.workers = c.workers;
  opt.assembly.cross = cross_from(a.cross);
  if (a.n < 51)
    warn("lattice N=" + std::to_string(a.n) + " is smaller than 51; edge effects grow");
  const fs::path out(a.out_dir);
  const std::string tag = "nu" + format_double(a.nu);

  if (!a.anisotropic) {
    for (double r : sweep)
      if (!(r >= opt.min_range && r <= opt.max_range))
        throw ConfigError("sweep value " + format_double(r) + " outside [1, 20]");
    const auto points = calibrate_sweep(sweep, nu, opt);
    write_file_bytes(out / ("error_curve_" + tag + ".csv"), calibration_points_csv(points));
    const CalibrationTable table(points);
    table.write_csv(out / ("table_" + tag + ".csv"));
    return Ok;
  }

  if (!(a.ratio >= 1.0))
    throw ConfigError("anisotropy ratio must be at least 1");
  for (double r : sweep)
    if (!(r > 0.0))
      throw ConfigError("anisotropic sweep values must be positive");
  if (a.thetas_deg.empty())
    throw ConfigError("no rotation angles given");
  std::vector<CalibrationPoint> curve;
  std::vector<std::pair<double, std::vector<AnisotropicCalibration>>> per_theta;
  for (double deg : a.thetas_deg) {
    const double theta = deg * std::numbers::pi / 180.0;
    auto cal = calibrate_anisotropic_sweep(sweep, a.ratio, theta, nu, opt);
    for (const auto& x : cal) {
      curve.push_back(x.first);
      curve.push_back(x.second);
    }
    per_theta.emplace_back(deg, std::move(cal));
  }
  write_file_bytes(out / ("aniso_error_curve_" + tag + ".csv"), calibration_points_csv(curve));
  for (const auto& [deg, cal] : per_theta)
    build_anisotropic_table(cal).write_csv(out / ("aniso_table_" + tag + "_theta" + theta_tag(deg) + ".csv"));
  return Ok;
}

// ---------------------------------------------------------------------- fit

int cmd_fit(const FitArgs& a, const Common& c) {
  require_file(a.input, "input ensemble");
  WindowSpec spec{a.window, a.stride};
  FitOptions fo;
  fo.nu = smoothness_from(a.nu);
  if (fo.nu == Smoothness::Half)
    throw ConfigError("fit needs nu = 1 or 2");
  if (a.constraint == "sum-to-one")
    fo.constraint = VarianceConstraint::SumToOne;
  else if (a.constraint == "none")
    fo.constraint = VarianceConstraint::None;
  else
    throw ConfigError("constraint must be 'sum-to-one' or 'none', got '" + a.constraint + "'");
  fo.max_iter = a.max_iter;
  fo.tol = a.tol;
  fo.isotropic = a.isotropic;
  fo.init.nu = fo.nu;
  fo.validate();
  const Encoding enc = encoding_arg(a.encoding);

  FieldEnsemble ens = read_ensemble(a.input);
  spec.validate(ens.grid);
  if (ens.size() == 1) {
    if (fo.constraint == VarianceConstraint::SumToOne)
      warn("a single replicate separates the nugget from the process variance poorly");
    if (!a.no_standardize)
      warn("standardization needs p >= 2; fitting the raw field");
  } else if (!a.no_standardize) {
    ens = standardize(ens).ensemble;
  }

  const LocalFit fit = fit_all_windows(ens, spec, fo, c.workers);
  if (!fit.warning.empty())
    warn(fit.warning);
  write_param_fields(fit.fields, a.out, enc);
  const std::string diag = a.diagnostics.empty() ? a.out + ".windows.csv" : a.diagnostics;
  write_file_bytes(diag, window_diagnostics_csv(fit.windows));
  return Ok;
}

// -------------------------------------------------------------------- build

json file_ref(const std::string& path) {
  return json{{"path", fs::absolute(path).lexically_normal().string()}, {"hash", content_hash(path)}};
}

struct LoadedModel {
  NonstatSarModel model;
  json meta;
};

NonstatSarModel build_model(const json& meta) {
  auto load = [](const json& ref, const std::string& what) {
    const std::string path = ref.at("path").get<std::string>();
    require_file(path, what);
    if (content_hash(path) != ref.at("hash").get<std::string>())
      throw ConfigError(what + " changed since the model was built: " + path);
    return path;
  };
  const ParamFields params = read_param_fields(load(meta.at("params"), "parameter-field"));
  const CalibrationTable iso = CalibrationTable::read_csv(load(meta.at("table"), "calibration table"));
  std::optional<CalibrationTable> aniso;
  if (!meta.at("aniso_table").is_null())
    aniso = CalibrationTable::read_csv(load(meta.at("aniso_table"), "anisotropic calibration table"));
  const json& o = meta.at("options");
  ModelOptions mo;
  mo.order = o.at("order").get<int>();
  mo.normalization = normalization_from(o.at("normalization").get<std::string>());
  mo.add_nugget = o.at("nugget").get<bool>();
  mo.assembly.cross = cross_from(o.at("cross").get<std::string>());
  mo.assembly.boundary = boundary_from(o.at("boundary").get<std::string>());
  return build_from_params(params, iso, aniso ? &*aniso : nullptr, mo, o.at("buffer").get<int>());
}

LoadedModel load_model(const std::string& path) {
  require_file(path, "model");
  json meta;
  try {
    meta = json::parse(read_file_bytes(path));
    if (meta.at("format").get<std::string>() != "NSM1")
      throw FormatError("format", "not a model file");
    return {build_model(meta), meta};
  } catch (const json::exception& e) {
    throw FormatError("model", std::string("malformed model file: ") + e.what());
  }
}

int cmd_build(const BuildArgs& a, const Common&) {
  require_file(a.params, "parameter-field");
  require_file(a.table, "calibration table");
  if (!a.aniso_table.empty())
    require_file(a.aniso_table, "anisotropic calibration table");
  const ParamFields params = read_param_fields(a.params);
  const int order = a.order == 0 ? sar_order(params.nu) : a.order;
  if (order != 1 && order != 2)
    throw ConfigError("order must be 1 or 2");
  if (a.buffer < -1)
    throw ConfigError("buffer must be non-negative");
  const Boundary boundary = boundary_from(a.boundary);
  const int buffer = a.buffer < 0 ? default_buffer(params) : a.buffer;
  if (boundary == Boundary::Truncate && buffer == 0)
    throw ConfigError("truncated boundary rows need a buffer of at least one node");

  json meta;
  meta["format"] = "NSM1";
  meta["params"] = file_ref(a.params);
  meta["table"] = file_ref(a.table);
  meta["aniso_table"] = a.aniso_table.empty() ? json(nullptr) : file_ref(a.aniso_table);
  meta["options"] = {{"order", order},
                     {"normalization", normalization_name(normalization_from(a.normalization))},
                     {"nugget", a.nugget},
                     {"cross", cross_name(cross_from(a.cross))},
                     {"boundary", boundary_name(boundary)},
                     {"buffer", buffer}};
  const NonstatSarModel model = build_model(meta);
  const auto clamped = std::stoul(model.provenance.at("clamped_nodes"));
  if (clamped > 0)
    warn(std::to_string(clamped) + " nodes had ranges outside the calibration table and were clamped");
  meta["summary"] = {{"nodes", model.grid().total_size()},
                     {"clamped_nodes", clamped},
                     {"min_pivot", model.factor().min_pivot()},
                     {"nx", model.grid().nx},
                     {"ny", model.grid().ny}};
  write_file_bytes(a.out, meta.dump(2) + "\n");
  return Ok;
}

// ----------------------------------------------------------------- simulate

int cmd_simulate(const SimulateArgs& a, const Common& c) {
  if (a.n < 0)
    throw ConfigError("number of draws must be non-negative");
  const Encoding enc = encoding_arg(a.encoding);
  const LoadedModel m = load_model(a.model);
  const FieldEnsemble ens = simulate_ensemble(m.model, a.n, a.seed, c.workers);
  if (ens.size() == 0) {
    warn("no draws requested; nothing written");
    return Ok;
  }
  write_ensemble(ens, a.out, enc);
  return Ok;
}

int cmd_corrmap(const CorrmapArgs& a, const Common&) {
  if (a.nodes.empty())
    throw ConfigError("at least one --node is required");
  const Encoding enc = encoding_arg(a.encoding);
  const LoadedModel m = load_model(a.model);
  for (auto node : a.nodes)
    if (node >= m.model.grid().interior_size())
      throw ConfigError("node " + std::to_string(node) + " is outside the lattice");
  for (auto node : a.nodes)
    write_field(correlation_map(m.model, node), fs::path(a.out_dir) / ("corrmap_" + std::to_string(node) + ".nsf"),
                enc);
  return Ok;
}

int cmd_whiten(const WhitenArgs& a, const Common& c) {
  require_file(a.input, "input ensemble");
  const Encoding enc = encoding_arg(a.encoding);
  const LoadedModel m = load_model(a.model);
  const FieldEnsemble ens = read_ensemble(a.input);
  const FieldEnsemble w = whiten(m.model, ens, c.workers);
  write_ensemble(w, a.out, enc);
  WhitenessOptions wo;
  wo.rim = a.rim < 0 ? m.model.order() : a.rim;
  wo.pool_radius = a.pool_radius;
  const WhitenessReport rep = whiteness_stats(w, wo);
  write_file_bytes(a.report, rep.summary_json());
  if (!a.variance_out.empty()) {
    Field v = rep.variance;
    for (auto& x : v.values)
      if (!std::isfinite(x))
        x = 0.0;
    write_field(v, a.variance_out, enc);
  }
  const bool pass = rep.max_abs_lag < a.max_lag && rep.variance_q05 >= a.var_lo && rep.variance_q95 <= a.var_hi;
  if (!pass) {
    std::cerr << "diagnostic failed: max |lag-1 corr| " << rep.max_abs_lag << ", variance 5%-95% ["
              << rep.variance_q05 << ", " << rep.variance_q95 << "]\n";
    return DiagnosticFailed;
  }
  return Ok;
}

// Extrapolates from one fit on the largest window with the most replicates.
void warn_runtime(const McDesign& d, int workers) {
  McDesign probe = d;
  probe.window_sizes = {*std::max_element(d.window_sizes.begin(), d.window_sizes.end())};
  probe.range_multipliers = {d.range_multipliers.front()};
  probe.nus = {d.nus.front()};
  probe.replicate_counts = {*std::max_element(d.replicate_counts.begin(), d.replicate_counts.end())};
  probe.repetitions = 1;
  const auto t0 = std::chrono::steady_clock::now();
  run_mc_study(probe, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double estimate = secs * double(d.cells()) * d.repetitions / std::max(1, workers);
  warn("design has " + std::to_string(d.cells()) + " cells x " + std::to_string(d.repetitions) +
       " repetitions; estimated runtime up to " + std::to_string(long(std::ceil(estimate / 60.0))) + " min on " +
       std::to_string(workers) + " workers");
}

int cmd_mc(const McArgs& a, const Common& c) {
  McDesign d;
  if (a.design == "desk")
    d = McDesign::desk();
  else if (a.design == "full")
    d = McDesign::full();
  else
    throw ConfigError("design must be 'desk' or 'full', got '" + a.design + "'");
  if (!a.windows.empty())
    d.window_sizes = a.windows;
  if (!a.multipliers.empty())
    d.range_multipliers = a.multipliers;
  if (!a.nus.empty()) {
    d.nus.clear();
    for (double v : a.nus)
      d.nus.push_back(smoothness_from(v));
  }
  if (!a.ps.empty())
    d.replicate_counts = a.ps;
  if (a.repetitions > 0)
    d.repetitions = a.repetitions;
  if (a.seed)
    d.seed = *a.seed;
  d.validate();

  const McDesign desk = McDesign::desk();
  if (d.cells() * std::size_t(d.repetitions) > desk.cells() * std::size_t(desk.repetitions))
    warn_runtime(d, c.workers);

  const McResult r = run_mc_study(d, c.workers);
  write_file_bytes(fs::path(a.out_dir) / "mc_raw.csv", r.raw_csv());
  write_file_bytes(fs::path(a.out_dir) / "mc_summary.csv", r.summary_csv());
  return Ok;
}

} // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Non-stationary SAR emulation of locally stationary Matérn fields"};
  app.set_config("--config", "", "TOML/INI file with command options; flags override it");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--workers", common.workers, "worker threads (default: NONSTAT_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "translate Matérn ranges into SAR parameters");
  cal->add_option("--nu", ca.nu, "smoothness (1 or 2)");
  cal->add_option("--N", ca.n, "odd lattice size");
  cal->add_option("--sweep", ca.sweep, "ranges (minor-axis ranges when anisotropic)")->delimiter(',');
  cal->add_flag("--anisotropic", ca.anisotropic, "calibrate H eigenvalues at fixed angles");
  cal->add_option("--ratio", ca.ratio, "major/minor range ratio");
  cal->add_option("--thetas", ca.thetas_deg, "rotation angles in degrees")->delimiter(',');
  cal->add_option("--out-dir", ca.out_dir, "output directory");
  cal->add_option("--cross", ca.cross, "cross-term weights: centered | as-printed");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "moving-window likelihood fits");
  fit->add_option("--input", fa.input, "ensemble file")->required();
  fit->add_option("--out", fa.out, "parameter-field file");
  fit->add_option("--diagnostics", fa.diagnostics, "per-window CSV (default <out>.windows.csv)");
  fit->add_option("--window", fa.window, "odd window size");
  fit->add_option("--stride", fa.stride, "window-centre spacing");
  fit->add_option("--nu", fa.nu, "smoothness (1 or 2)");
  fit->add_option("--constraint", fa.constraint, "sum-to-one | none");
  fit->add_flag("--no-standardize", fa.no_standardize, "fit the raw ensemble");
  fit->add_flag("--isotropic", fa.isotropic, "fit a single range per window");
  fit->add_option("--max-iter", fa.max_iter, "simplex iterations per run");
  fit->add_option("--tol", fa.tol, "simplex diameter tolerance");
  fit->add_option("--encoding", fa.encoding, "f64le | csv");

  BuildArgs ba;
  auto* build = app.add_subcommand("build", "assemble the global SAR model");
  build->add_option("--params", ba.params, "parameter-field file")->required();
  build->add_option("--table", ba.table, "isotropic calibration table")->required();
  build->add_option("--aniso-table", ba.aniso_table, "anisotropic calibration table");
  build->add_option("--out", ba.out, "model file");
  build->add_option("--order", ba.order, "SAR order (default from nu)");
  build->add_option("--buffer", ba.buffer, "buffer width (default max(10, 2 x largest range))");
  build->add_option("--normalization", ba.normalization, "post-scale | row-weight");
  build->add_flag("--nugget", ba.nugget, "add nugget noise to simulations");
  build->add_option("--cross", ba.cross, "centered | as-printed");
  build->add_option("--boundary", ba.boundary, "clip | truncate");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "unconditional simulations");
  sim->add_option("--model", sa.model, "model file")->required();
  sim->add_option("--n", sa.n, "number of draws");
  sim->add_option("--seed", sa.seed, "random seed");
  sim->add_option("--out", sa.out, "ensemble file");
  sim->add_option("--encoding", sa.encoding, "f64le | csv");

  CorrmapArgs cma;
  auto* cm = app.add_subcommand("corrmap", "correlation maps at chosen nodes");
  cm->add_option("--model", cma.model, "model file")->required();
  cm->add_option("--node", cma.nodes, "interior node index (repeatable)")->delimiter(',');
  cm->add_option("--out-dir", cma.out_dir, "output directory");
  cm->add_option("--encoding", cma.encoding, "f64le | csv");

  WhitenArgs wa;
  auto* wh = app.add_subcommand("whiten", "whiten fields and summarize whiteness");
  wh->add_option("--model", wa.model, "model file")->required();
  wh->add_option("--input", wa.input, "ensemble file")->required();
  wh->add_option("--out", wa.out, "whitened ensemble file");
  wh->add_option("--report", wa.report, "summary JSON");
  wh->add_option("--variance-out", wa.variance_out, "variance field file");
  wh->add_option("--rim", wa.rim, "edge nodes excluded from statistics (default: order)");
  wh->add_option("--pool-radius", wa.pool_radius, "variance pooling radius");
  wh->add_option("--max-lag", wa.max_lag, "largest acceptable |lag-1 correlation|");
  wh->add_option("--var-lo", wa.var_lo, "lowest acceptable 5% variance quantile");
  wh->add_option("--var-hi", wa.var_hi, "highest acceptable 95% variance quantile");
  wh->add_option("--encoding", wa.encoding, "f64le | csv");

  McArgs ma;
  auto* mc = app.add_subcommand("mc-study", "Monte Carlo study of local range estimation");
  mc->add_option("--design", ma.design, "desk | full");
  mc->add_option("--windows", ma.windows, "window sizes")->delimiter(',');
  mc->add_option("--multipliers", ma.multipliers, "range = multiplier x window")->delimiter(',');
  mc->add_option("--nus", ma.nus, "smoothness values")->delimiter(',');
  mc->add_option("--ps", ma.ps, "replicate counts")->delimiter(',');
  mc->add_option("--repetitions", ma.repetitions, "repetitions per cell");
  mc->add_option("--seed", ma.seed, "random seed");
  mc->add_option("--out-dir", ma.out_dir, "output directory");

  std::vector<const char*> argv;
  for (const auto& s : args)
    argv.push_back(s.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return Validation;
  }

  try {
    if (*cal)
      return cmd_calibrate(ca, common);
    if (*fit)
      return cmd_fit(fa, common);
    if (*build)
      return cmd_build(ba, common);
    if (*sim)
      return cmd_simulate(sa, common);
    if (*cm)
      return cmd_corrmap(cma, common);
    if (*wh)
      return cmd_whiten(wa, common);
    if (*mc)
      return cmd_mc(ma, common);
  } catch (const FactorizationError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return Numerical;
  } catch (const CalibrationError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return Numerical;
  } catch (const DegenerateError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return Numerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Validation;
  }
  return Validation;
}

} // namespace nonstat::cli
