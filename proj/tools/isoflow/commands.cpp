#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "isoflow/geometry.hpp"
#include "isoflow/io.hpp"
#include "isoflow/optimize.hpp"
#include "isoflow/profiles.hpp"
#include "isoflow/spectrum.hpp"
#include "isoflow/transport.hpp"

namespace isoflow::cli {

namespace {

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(format_double(x)); }

template <class Writer>
void write_output(const RunOptions& opt, const std::string& name, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_file_atomic(opt.out / name, os.str());
}

void write_json(const RunOptions& opt, const std::string& name, const Json& j) {
  write_file_atomic(opt.out / name, j.dump(2) + "\n");
}

Json ode_json(const OdeReport& r) {
  return {{"verdict", ode_verdict_name(r.verdict)},
          {"checked", r.checked},
          {"max_abs_residual", number(r.max_abs_residual)},
          {"max_residual", number(r.max_residual)},
          {"counterexamples", r.counterexamples.size()}};
}

Json comparison_json(const Comparison& c) {
  return {{"verdict", comparison_verdict_name(c.verdict)},
          {"strict", c.verdict == ComparisonVerdict::Strict},
          {"compared", c.compared},
          {"ties", c.ties.size()},
          {"violations", c.violations.size()},
          {"min_difference", number(c.min_difference)},
          {"min_relative_difference", number(c.min_relative_difference)},
          {"max_abs_difference", number(c.max_abs_difference)}};
}

double max_ode_location(const Profile& p, double c) {
  double worst = -kInf, where = 0.0;
  for (const auto& r : p.records) {
    const double res = std::abs(r.ddF * r.F + 2.0 * c);
    if (res > worst) worst = res, where = r.v;
  }
  return where;
}

VerdictRecord cmd_profile(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& pc = cfg.profile;
  VerdictRecord rec{"profile"};
  rec.tolerance = pc.ode_tolerance;
  ProfileOptions po;
  po.endpoint_fraction = pc.endpoint_fraction;
  po.volume_tol = pc.volume_tolerance;
  po.threads = opt.threads;
  const double c = d.c();
  const bool affine = d.weight().is_affine();

  auto perp = build_profile(d, Family::Perpendicular, pc.grid, po);
  write_output(opt, "profile_perp.csv", [&](std::ostream& os) { write_profile_csv(os, perp); });
  const auto ode_g = check_profile_ode(perp, c, pc.ode_tolerance * 2.0 * c, pc.interior_fraction);
  rec.metrics["total_volume"] = number(perp.total_volume);
  rec.metrics["ode_perpendicular"] = ode_json(ode_g);
  if (ode_g.verdict != OdeVerdict::Equality)
    rec.violate("perpendicular ODE at v=" + format_double(max_ode_location(perp, c)), ode_g.max_abs_residual);

  if (d.weight().smoothness() != Smoothness::Smooth) {
    rec.notes.push_back("parallel family skipped: weight is only continuous");
    rec.metrics["strict"] = nullptr;
    return rec;
  }

  auto par = build_profile(d, Family::Parallel, pc.grid, po);
  write_output(opt, "profile_parallel.csv", [&](std::ostream& os) { write_profile_csv(os, par); });
  const double ode_tol = affine ? pc.equality_tolerance : pc.ode_tolerance;
  const auto ode_f = check_profile_ode(par, c, ode_tol, pc.interior_fraction);
  rec.metrics["ode_parallel"] = ode_json(ode_f);
  if (ode_f.verdict == OdeVerdict::Violated)
    rec.violate("parallel ODE at v=" + format_double(ode_f.counterexamples.front().v),
                ode_f.counterexamples.front().residual);
  else if (affine && ode_f.verdict != OdeVerdict::Equality)
    rec.violate("parallel ODE equality at v=" + format_double(max_ode_location(par, c)), ode_f.max_abs_residual);

  const auto cmp = compare_profiles(par, perp, pc.tie_tolerance);
  rec.metrics["comparison"] = comparison_json(cmp);
  rec.metrics["strict"] = cmp.verdict == ComparisonVerdict::Strict;
  for (const auto& v : cmp.violations) rec.violate("F < G at v=" + format_double(v.v), v.F - v.G);
  if (!affine && !d.slab().whole_line() && cmp.verdict == ComparisonVerdict::WithTies)
    rec.violate("tie at v=" + format_double(cmp.ties.front().v), cmp.ties.front().F - cmp.ties.front().G);

  if (affine && d.slab().whole_line()) {
    std::vector<double> normal(d.ambient_dim(), 0.0);
    normal.front() = normal.back() = std::sqrt(0.5);
    auto tilted = tilted_profile_wholespace(d, normal, pc.grid, po);
    write_output(opt, "profile_tilted.csv", [&](std::ostream& os) { write_profile_csv(os, tilted); });
    const auto ct = compare_profiles(tilted, perp, pc.tie_tolerance);
    rec.metrics["comparison_tilted"] = comparison_json(ct);
    if (!ct.all_tied()) rec.violate("tilted family differs", ct.max_abs_difference);
    if (!cmp.all_tied()) rec.violate("parallel family differs", cmp.max_abs_difference);
  }
  return rec;
}

VerdictRecord cmd_transport(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& tc = cfg.transport;
  VerdictRecord rec{"transport"};
  rec.tolerance = tc.contraction_tolerance;
  TransportGrid grid;
  grid.nodes = tc.nodes;
  grid.half_width = tc.half_width;
  grid.clip = tc.clip;
  grid.allow_nonconcave = cfg.density.allow_nonconcave;
  const auto m = build_transport(d, grid);
  rec.notes.insert(rec.notes.end(), m.warnings.begin(), m.warnings.end());
  write_output(opt, "transport.csv", [&](std::ostream& os) { write_transport_csv(os, m); });
  const bool concave = check_concavity(d.weight()).concave;

  const auto con = check_contraction(m, tc.contraction_tolerance);
  rec.metrics["alpha"] = number(m.norm.alpha);
  rec.metrics["beta"] = number(m.norm.beta);
  rec.metrics["contraction"] = {{"certified", con.certified}, {"max_drho", number(con.max_drho)},
                                {"argmax_s", number(con.argmax_s)}};
  if (!con.certified) {
    if (concave) rec.violate("max rho' at s=" + format_double(con.argmax_s), con.max_drho);
    else rec.notes.push_back("weight is not concave: contraction is not expected");
  }

  if (d.weight().is_affine() && d.slab().whole_line()) {
    double dev = 0.0, where = 0.0;
    for (std::size_t i = 0; i < m.s.size(); ++i)
      if (std::abs(m.drho[i] - 1.0) > dev) dev = std::abs(m.drho[i] - 1.0), where = m.s[i];
    rec.metrics["isometry_deviation"] = number(dev);
    if (dev > tc.identity_tolerance) rec.violate("rho' != 1 at s=" + format_double(where), dev);
  }

  const double ident = derivative_identity_residual(m);
  rec.metrics["derivative_identity_residual"] = number(ident);
  if (ident > tc.derivative_tolerance) rec.violate("derivative identity", ident);

  std::mt19937_64 rng(split_seed(cfg.run.seed, "transport.intervals"));
  const auto intervals = random_intervals(m, static_cast<std::size_t>(tc.intervals), rng);
  if (!intervals.empty()) {
    const auto pf = pushforward_check(m, intervals);
    rec.metrics["pushforward"] = {{"checked", pf.checked}, {"max_residual", number(pf.max_residual)}};
    if (pf.max_residual > tc.pushforward_tolerance)
      rec.violate("pushforward on (" + format_double(pf.worst_lo) + ", " + format_double(pf.worst_hi) + ")",
                  pf.max_residual);
  }

  if (tc.curves > 0) {
    std::mt19937_64 crng(split_seed(cfg.run.seed, "transport.curves"));
    const double lo = m.rho.front(), hi = m.rho.back();
    const double scale = 1.0 / std::sqrt(d.c());
    double min_slack = kInf;
    std::ostringstream rows;
    write_csv_header(rows, {"curve", "weighted_length", "gaussian_pullback", "slack"});
    for (int k = 0; k < tc.curves; ++k) {
      auto x = random_chord(lo, hi, 10, scale, 2.0, 0.3 * scale, crng);
      const auto b = transported_perimeter_bound(m, chord_curve(x, tc.curve_samples));
      write_csv_row(rows, {double(k), b.weighted_length, b.gaussian_pullback, b.slack});
      if (b.slack < min_slack) min_slack = b.slack;
      if (b.slack < -tc.perimeter_tolerance) rec.violate("perimeter bound on curve " + std::to_string(k), b.slack);
    }
    const auto vertical = transported_perimeter_bound(m, chord_curve(ChordSpline::line(lo, hi, 10, 0.0, 0.0),
                                                                     tc.curve_samples));
    write_file_atomic(opt.out / "perimeter.csv", rows.str());
    rec.metrics["perimeter"] = {{"curves", tc.curves}, {"min_slack", number(min_slack)},
                                {"vertical_slack", number(vertical.slack)}};
    if (std::abs(vertical.slack) > tc.perimeter_tolerance) rec.violate("vertical line equality", vertical.slack);
  }
  return rec;
}

VerdictRecord cmd_spectrum(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& sc = cfg.spectrum;
  VerdictRecord rec{"spectrum"};
  rec.tolerance = sc.relative_tolerance;
  PoincareOptions po;
  po.nodes = sc.nodes;
  po.cutoff = sc.cutoff;
  po.relative_tolerance = sc.relative_tolerance;
  const auto cert = poincare_certify(d, po);
  const auto p = build_spectral_problem(d, sc.nodes, sc.cutoff);
  const auto e = spectral_gap_1d(p);
  write_output(opt, "spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, p, e); });
  rec.metrics["lambda"] = number(cert.lambda);
  rec.metrics["bound"] = number(cert.bound);
  rec.metrics["hyperplane_gap"] = number(cert.hyperplane_gap);
  rec.metrics["truncation_shift"] = number(cert.truncation_shift);
  rec.metrics["certified"] = cert.certified;
  const bool concave = check_concavity(d.weight()).concave;
  if (!cert.certified) {
    if (concave || opt.expect_bound) rec.violate("spectral gap below 2c", cert.lambda);
    else rec.notes.push_back("weight is not concave: the bound 2c is not expected");
  }
  return rec;
}

VerdictRecord cmd_stability(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& sc = cfg.stability;
  VerdictRecord rec{"stability"};
  rec.tolerance = sc.witness_tolerance;
  const auto v = parallel_halfspace_stability(d, sc.level, sc.nodes);
  rec.metrics["level"] = number(sc.level);
  rec.metrics["parallel"] = v.stable ? "stable" : "unstable";
  rec.metrics["omega2"] = number(v.omega2);
  rec.metrics["witness"] = number(v.witness);
  rec.metrics["closed_form"] = number(v.closed_form);
  rec.metrics["witness_error_estimate"] = number(v.witness_error);
  if (v.closed_form != 0.0) {
    const double rel = std::abs(v.witness - v.closed_form) / std::abs(v.closed_form);
    rec.metrics["witness_relative_error"] = number(rel);
    if (rel > sc.witness_tolerance) rec.violate("parallel witness at t=" + format_double(sc.level), v.witness);
  } else if (std::abs(v.witness) > sc.neutral_tolerance) {
    rec.violate("neutral witness at t=" + format_double(sc.level), v.witness);
  }
  if ((v.witness < 0.0) == v.stable && std::abs(v.witness) > sc.neutral_tolerance)
    rec.violate("witness sign disagrees with the verdict", v.witness);

  const auto line = vertical_line(d, sc.line_x, sc.line_nodes);
  std::mt19937_64 rng(split_seed(cfg.run.seed, "stability.samples"));
  std::ostringstream rows;
  write_csv_header(rows, {"sample", "index_form", "error_estimate"});
  double min_value = kInf;
  for (int k = 0; k < sc.samples; ++k) {
    const auto u = random_mean_zero(d, line, rng);
    const auto r = index_form(d, line, u, u);
    write_csv_row(rows, {double(k), r.value, r.error_estimate});
    min_value = std::min(min_value, r.value);
    if (r.value < -sc.sample_tolerance) rec.violate("vertical-line sample " + std::to_string(k), r.value);
  }
  write_file_atomic(opt.out / "stability.csv", rows.str());
  rec.metrics["vertical_samples"] = sc.samples;
  rec.metrics["vertical_min_index_form"] = number(min_value);
  return rec;
}

VerdictRecord cmd_jacobi(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& jc = cfg.jacobi;
  VerdictRecord rec{"jacobi"};
  rec.tolerance = jc.min_ratio;
  std::ostringstream rows;
  write_csv_header(rows, {"target", "h", "residual", "ratio"});
  Json studies = Json::array();
  for (std::size_t k = 0; k < jc.targets.size(); ++k) {
    const double target = jc.targets[k];
    std::vector<double> res;
    DiscreteCurve finest;
    for (double h : jc.steps) {
      auto c = cmc_shoot(d, target, jc.x0, jc.t0, jc.angle, h, jc.length);
      res.push_back(jacobi_residual(d, c, {1.0, 0.0}));
      finest = std::move(c);
    }
    double min_ratio = kInf;
    for (std::size_t i = 0; i < res.size(); ++i) {
      double ratio = std::numeric_limits<double>::quiet_NaN();
      if (i > 0 && res[i - 1] > jc.exact_floor) {
        ratio = res[i - 1] / res[i];
        min_ratio = std::min(min_ratio, ratio);
        if (ratio < jc.min_ratio)
          rec.violate("target " + format_double(target) + " h=" + format_double(jc.steps[i]), ratio);
      }
      write_csv_row(rows, {target, jc.steps[i], res[i], ratio});
    }
    write_output(opt, "jacobi_curve_" + std::to_string(k) + ".csv",
                 [&](std::ostream& os) { write_curve_csv(os, finest); });
    studies.push_back({{"target", number(target)},
                       {"finest_residual", number(res.back())},
                       {"min_ratio", number(min_ratio)},
                       {"reached_boundary", finest.end_on_boundary}});
  }
  write_file_atomic(opt.out / "jacobi.csv", rows.str());
  rec.metrics["studies"] = studies;
  return rec;
}

VerdictRecord cmd_optimize(const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto& oc = cfg.optimize;
  VerdictRecord rec{"optimize"};
  rec.tolerance = oc.length_tolerance;
  const auto [lo, hi] = chord_interval(d);
  const double vtot = gaussian_factor(d.horizontal_dim(), d.c()) * vertical_mass(d, lo, hi).value;
  const double target = oc.area_fraction * vtot;
  const double reference = perpendicular_value(d, target);
  OptimizerConfig ocfg;
  ocfg.target_area = target;
  ocfg.max_iterations = oc.max_iterations;
  ocfg.grad_tol = oc.grad_tolerance;
  std::mt19937_64 rng(split_seed(cfg.run.seed, "optimize.starts"));
  const double scale = 1.0 / std::sqrt(d.c());
  Json runs = Json::array();
  for (int k = 0; k < oc.starts; ++k) {
    auto start = random_chord(lo, hi, oc.controls, oc.spread * scale, oc.max_slope, oc.wiggle * scale, rng);
    const auto r = minimize(d, ocfg, start);
    const double rel = (r.length - reference) / reference;
    const double drift = std::abs(r.area - target) / vtot;
    const std::string tag = std::to_string(k);
    write_output(opt, "optimize_trace_" + tag + ".csv", [&](std::ostream& os) { write_trace_csv(os, r.trace); });
    write_output(opt, "optimize_chord_" + tag + ".csv",
                 [&](std::ostream& os) { write_curve_csv(os, chord_curve(r.chord, 201)); });
    runs.push_back({{"start", k},
                    {"status", optimizer_status_name(r.status)},
                    {"iterations", r.trace.size() - 1},
                    {"length", number(r.length)},
                    {"relative_gap", number(rel)},
                    {"area_drift", number(drift)},
                    {"stationary", r.stationarity.stationary},
                    {"hf_spread", number(r.stationarity.hf_spread())},
                    {"angle_bottom_deg", number(r.stationarity.angle_bottom_deg)},
                    {"angle_top_deg", number(r.stationarity.angle_top_deg)}});
    if (std::abs(rel) > oc.length_tolerance) rec.violate("start " + tag + " final length", r.length);
    if (drift > oc.area_tolerance) rec.violate("start " + tag + " area drift", drift);
    if (!r.stationarity.stationary) rec.violate("start " + tag + " not stationary", r.stationarity.hf_spread());
    if (r.status != OptimizerStatus::Converged)
      rec.notes.push_back("start " + tag + ": " + std::string(optimizer_status_name(r.status)));
  }
  rec.metrics["target_area"] = number(target);
  rec.metrics["total_volume"] = number(vtot);
  rec.metrics["perpendicular_value"] = number(reference);
  rec.metrics["runs"] = runs;
  return rec;
}

}  // namespace

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Verified: return "verified";
    case Status::Violated: return "violated";
    case Status::Error: return "error";
  }
  return "error";
}

void VerdictRecord::violate(std::string location, double value) {
  if (status != Status::Error) status = Status::Violated;
  witnesses.push_back({std::move(location), value});
}

Json to_json(const VerdictRecord& r) {
  Json w = Json::array();
  for (const auto& x : r.witnesses) w.push_back({{"location", x.location}, {"value", number(x.value)}});
  return {{"command", r.command},       {"status", status_name(r.status)}, {"metrics", r.metrics},
          {"tolerance", number(r.tolerance)}, {"wall_time_s", r.wall_time}, {"witnesses", w},
          {"notes", r.notes}};
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"profile", "transport", "spectrum", "stability", "jacobi", "optimize"};
  return names;
}

std::uint64_t split_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : label) h = (h ^ ch) * 1099511628211ull;
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

VerdictRecord run_command(std::string_view name, const RunConfig& cfg, const Density& d, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  VerdictRecord rec;
  try {
    if (name == "profile") rec = cmd_profile(cfg, d, opt);
    else if (name == "transport") rec = cmd_transport(cfg, d, opt);
    else if (name == "spectrum") rec = cmd_spectrum(cfg, d, opt);
    else if (name == "stability") rec = cmd_stability(cfg, d, opt);
    else if (name == "jacobi") rec = cmd_jacobi(cfg, d, opt);
    else if (name == "optimize") rec = cmd_optimize(cfg, d, opt);
    else throw ValidationError("unknown command " + std::string(name));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    rec = VerdictRecord{std::string(name)};
    rec.status = Status::Error;
    rec.notes.push_back(e.what());
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string file = name == "profile" ? "compare.json" : std::string(name) + ".json";
  write_json(opt, file, to_json(rec));
  return rec;
}

int exit_code(const std::vector<VerdictRecord>& records) {
  int code = 0;
  for (const auto& r : records) {
    if (r.status == Status::Violated) code = 2;
    else if (r.status == Status::Error) code = std::max(code, 1);
  }
  return code;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"isoflow: isoperimetric diagnostics for perturbed Gaussian densities"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  bool expect_bound = false;
  std::vector<std::string> choices = command_names();
  choices.push_back("all");
  app.add_option("command", command, "command to run")->required()->check(CLI::IsMember(choices));
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--out", out_dir, "output directory (overrides [output] dir)");
  app.add_option("--threads", threads, "worker threads (overrides [run] threads)")->check(CLI::PositiveNumber);
  app.add_flag("--expect-bound", expect_bound, "treat a spectral gap below 2c as a violation for any weight");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    auto cfg = load_config(config_path);
    if (threads > 0) cfg.run.threads = threads;
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    const auto d = make_density(cfg.density);
    resolve(cfg, d);
    validate(cfg, d, command);

    RunOptions opt{cfg.output.dir, cfg.run.threads, expect_bound};
    std::error_code ec;
    std::filesystem::create_directories(opt.out, ec);
    if (ec || !std::filesystem::is_directory(opt.out))
      throw IoError("cannot create output directory " + opt.out.string());
    write_file_atomic(opt.out / "resolved_config.ini", emit_config(cfg));

    std::vector<VerdictRecord> records;
    if (command == "all") {
      for (const auto& name : command_names()) records.push_back(run_command(name, cfg, d, opt));
      Json list = Json::array();
      for (const auto& r : records) list.push_back(to_json(r));
      const int code = exit_code(records);
      const Status overall = code == 0 ? Status::Verified : code == 2 ? Status::Violated : Status::Error;
      write_json(opt, "summary.json", {{"status", status_name(overall)}, {"exit_code", code}, {"records", list}});
    } else {
      records.push_back(run_command(command, cfg, d, opt));
    }
    for (const auto& r : records) {
      std::cout << r.command << ": " << status_name(r.status);
      for (const auto& w : r.witnesses) std::cout << "\n  " << w.location << " = " << format_double(w.value);
      for (const auto& n : r.notes) std::cout << "\n  note: " << n;
      std::cout << '\n';
    }
    return exit_code(records);
  } catch (const std::exception& e) {
    std::cerr << "isoflow: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace isoflow::cli
