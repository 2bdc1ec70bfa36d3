// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fstrisk/csv.hpp"
#include "fstrisk/dsl.hpp"
#include "fstrisk/elicitation.hpp"
#include "fstrisk/errors.hpp"
#include "fstrisk/inference.hpp"
#include "fstrisk/propagate.hpp"
#include "fstrisk/report.hpp"

namespace fstrisk::cli {
namespace fs = std::filesystem;
namespace {

constexpr double kRhatWarning = 1.1;

struct Selection {
  std::string estimates;
  int round = 2;
  std::string scope{kCombinedScope};
  std::vector<std::string> exclude;
  bool carry_forward = false;
};

struct FitFlags {
  std::string out_dir = ".";
  McmcConfig mcmc;
};

struct CurveFlags {
  std::vector<std::string> posteriors;
  std::string csv_path = "curve.csv";
  std::string svg_path = "curve.svg";
  ReportConfig report;
  std::vector<std::string> markers;
};

struct PropagateFlags {
  std::string scenario;
  std::vector<std::string> posteriors;
  std::size_t replicates = 100000;
  std::uint64_t seed = kDefaultSeed;
  std::string uplift;
  std::string out_path;
  std::string dump_samples;
};

struct Loaded {
  ElicitationDataset dataset;
  AggregateResult aggregate;
};

void add_selection(CLI::App& cmd, Selection& sel) {
  cmd.add_option("estimates", sel.estimates, "Estimates file")->required();
  cmd.add_option("--round", sel.round, "Estimation round")->check(CLI::IsMember({1, 2}));
  cmd.add_option("--scope", sel.scope, "Group label or 'combined'");
  cmd.add_option("--exclude", sel.exclude, "Expert ids to drop")->delimiter(',');
  cmd.add_flag("--carry-forward", sel.carry_forward, "Use round 1 where a round-2 cell is empty");
}

void add_mcmc(CLI::App& cmd, McmcConfig& cfg) {
  cmd.add_option("--seed", cfg.seed, "Random seed");
  cmd.add_option("--chains", cfg.chains, "Number of chains");
  cmd.add_option("--warmup", cfg.warmup, "Warmup iterations per chain");
  cmd.add_option("--draws", cfg.draws, "Retained draws per chain");
  cmd.add_option("--noise-floor", cfg.noise_floor, "Minimum likelihood sd (probability units)");
  cmd.add_option("--target-accept", cfg.target_accept, "Warmup acceptance target");
}

void add_curve_config(CLI::App& cmd, CurveFlags& flags) {
  cmd.add_option("--grid-min", flags.report.grid_min_fst, "Smallest FST on the grid (minutes)");
  cmd.add_option("--grid-max", flags.report.grid_max_fst, "Largest FST on the grid (minutes)");
  cmd.add_option("--grid-points", flags.report.grid_points, "Number of log-spaced grid points");
  cmd.add_option("--level", flags.report.credible_level, "Credible level of the band");
  cmd.add_option("--marker", flags.markers, "Reference marker label=fst (replaces the default)");
}

std::vector<ReferenceMarker> parse_markers(const std::vector<std::string>& specs) {
  std::vector<ReferenceMarker> markers;
  for (const auto& spec : specs) {
    const auto eq = spec.rfind('=');
    const auto fst = eq == std::string::npos ? std::nullopt : csv::parse_real(std::string_view(spec).substr(eq + 1));
    if (!fst) throw InputError(fmt::format("marker '{}' must look like label=minutes", spec));
    markers.push_back({spec.substr(0, eq), *fst});
  }
  return markers;
}

Loaded load_selection(const Selection& sel, std::ostream& err) {
  auto dataset = load_estimates(sel.estimates);
  if (!sel.exclude.empty()) {
    auto excluded = apply_exclusions(dataset, {sel.exclude.begin(), sel.exclude.end()});
    for (const auto& w : excluded.warnings) err << "warning: " << w << '\n';
    dataset = std::move(excluded.dataset);
  }
  auto agg = aggregate(dataset, {sel.round, sel.scope, sel.carry_forward});
  for (const auto& task : agg.omitted_tasks) {
    err << fmt::format("warning: task '{}' has no round-{} estimates for scope '{}'\n", task, sel.round, sel.scope);
  }
  return {std::move(dataset), std::move(agg)};
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw InputError(fmt::format("failed writing '{}'", path.string()));
}

std::string aggregate_table(const AggregateResult& agg) {
  std::string out = "fst,mean,sd,n,se\n";
  for (const auto& p : agg.points) {
    out += fmt::format("{},{},{},{},{}\n", csv::format_real(p.fst_minutes), csv::format_real(p.mean_p),
                       csv::format_real(p.sd_p), p.n, csv::format_real(p.se_p));
  }
  return out;
}

std::string diagnostics_text(const PosteriorSamples& samples, const Diagnostics& diag) {
  std::string out = "parameter,rhat,ess,flag\n";
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& d = diag.params[k];
    out += fmt::format("{},{},{},{}\n", Diagnostics::kNames[k], d.rhat ? csv::format_real(*d.rhat) : "unavailable",
                       csv::format_real(d.ess), d.degenerate ? "zero-variance" : "ok");
  }
  out += "chain,acceptance_rate\n";
  for (std::size_t c = 0; c < samples.acceptance_rate.size(); ++c) {
    out += fmt::format("{},{}\n", c, csv::format_real(samples.acceptance_rate[c]));
  }
  if (!diag.rhat_available()) out += "# R-hat unavailable: a single chain was run\n";
  if (diag.max_rhat() > kRhatWarning) {
    out += fmt::format("# WARNING: R-hat {} exceeds {}\n", csv::format_real(diag.max_rhat()), kRhatWarning);
  }
  return out;
}

nlohmann::ordered_json manifest(const Selection& sel, const McmcConfig& cfg, const AggregateResult& agg, double baseline_p) {
  nlohmann::ordered_json m;
  m["estimates"] = sel.estimates;
  m["round"] = sel.round;
  m["scope"] = sel.scope;
  m["exclude"] = sel.exclude;
  m["carry_forward"] = sel.carry_forward;
  m["baseline_p"] = baseline_p;
  m["seed"] = cfg.seed;
  m["chains"] = cfg.chains;
  m["warmup"] = cfg.warmup;
  m["draws"] = cfg.draws;
  m["noise_floor"] = cfg.noise_floor;
  m["target_accept"] = cfg.target_accept;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& p : agg.points) {
    points.push_back({{"fst", p.fst_minutes}, {"mean", p.mean_p}, {"sd", p.sd_p}, {"n", p.n}, {"se", p.se_p}});
  }
  m["points"] = points;
  return m;
}

// Fits one selection and writes posterior, diagnostics and manifest under
// `dir` with the given file-name suffix.
PosteriorSamples fit_and_write(const Selection& sel, const McmcConfig& cfg, const fs::path& dir, const std::string& suffix,
                               std::ostream& out, std::ostream& err) {
  const auto loaded = load_selection(sel, err);
  const double baseline_p = loaded.dataset.baseline_pct / 100.0;
  auto samples = fit_curve(loaded.aggregate.points, baseline_p, cfg);
  const auto diag = diagnostics(samples);

  std::ostringstream posterior;
  write_posterior(posterior, samples);
  write_file(dir / fmt::format("posterior{}.csv", suffix), posterior.str());
  write_file(dir / fmt::format("diagnostics{}.txt", suffix), diagnostics_text(samples, diag));
  write_file(dir / fmt::format("manifest{}.json", suffix), manifest(sel, cfg, loaded.aggregate, baseline_p).dump(2) + "\n");

  out << fmt::format("fit scope={} round={} points={} chains={} draws={} seed={}\n", sel.scope, sel.round,
                     loaded.aggregate.points.size(), cfg.chains, cfg.draws, cfg.seed);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& d = diag.params[k];
    out << fmt::format("  {:<9} rhat={:<12} ess={:.0f}\n", Diagnostics::kNames[k],
                       d.rhat ? fmt::format("{:.4f}", *d.rhat) : "unavailable", d.ess);
  }
  if (!diag.rhat_available()) err << "note: R-hat unavailable with a single chain\n";
  if (diag.max_rhat() > kRhatWarning) {
    err << fmt::format("WARNING: R-hat {:.3f} exceeds {} - chains have not mixed; the fit is still written\n",
                       diag.max_rhat(), kRhatWarning);
  }
  return samples;
}

std::pair<std::string, std::string> split_binding(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) return {"", spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

void write_curves(std::vector<CurveSeries> series, const CurveFlags& flags, double baseline_p, std::ostream& out) {
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::ostringstream csv_out;
    write_curve_summary(csv_out, series[s].summary);
    fs::path path = flags.csv_path;
    if (s > 0) path.replace_extension(fmt::format(".{}.csv", series[s].label));
    write_file(path, csv_out.str());
    out << "wrote " << path.string() << '\n';
  }
  write_file(flags.svg_path, render_curve_svg(series, flags.report, baseline_p));
  out << "wrote " << flags.svg_path << '\n';
}

int cmd_aggregate(const Selection& sel, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto loaded = load_selection(sel, err);
  const auto table = aggregate_table(loaded.aggregate);
  if (out_path.empty()) {
    out << table;
  } else {
    write_file(out_path, table);
  }
  return kOk;
}

int cmd_fit(const Selection& sel, const FitFlags& flags, std::ostream& out, std::ostream& err) {
  fit_and_write(sel, flags.mcmc, flags.out_dir, "", out, err);
  return kOk;
}

int cmd_curve(CurveFlags flags, std::ostream& out) {
  if (!flags.markers.empty()) flags.report.reference_markers = parse_markers(flags.markers);
  flags.report.validate();
  if (flags.posteriors.empty()) throw InputError("curve needs at least one --posterior");
  const auto grid = flags.report.grid();
  std::vector<CurveSeries> series;
  double baseline_p = 0.25;
  for (std::size_t i = 0; i < flags.posteriors.size(); ++i) {
    auto [label, path] = split_binding(flags.posteriors[i]);
    if (label.empty()) label = fs::path(path).stem().string();
    const auto samples = load_posterior(path);
    if (i == 0) baseline_p = samples.p0;
    series.push_back({label, summarize_curve(samples, grid, flags.report.credible_level), i == 0});
  }
  write_curves(std::move(series), flags, baseline_p, out);
  return kOk;
}

int cmd_propagate(const PropagateFlags& flags, std::ostream& out, std::ostream& err) {
  std::ifstream in(flags.scenario, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot read '{}'", flags.scenario));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto parsed = parse_scenario(buffer.str());
  if (!parsed) {
    err << flags.scenario << ':' << parsed.error().to_string() << '\n';
    return kInputError;
  }

  std::set<std::string> referenced;
  for (const auto& step : parsed->steps) {
    if (const auto* c = std::get_if<CurveBinding>(&step.binding)) referenced.insert(c->curve_id);
  }
  CurveSources curves;
  for (const auto& spec : flags.posteriors) {
    const auto [id, path] = split_binding(spec);
    auto samples = std::make_shared<const PosteriorSamples>(load_posterior(path));
    if (id.empty()) {
      for (const auto& r : referenced) curves[r] = samples;
    } else {
      curves[id] = samples;
    }
  }
  const auto model = compile(parsed.value(), curves, flags.replicates, flags.seed);
  const auto result = sample_annual_loss(model);
  if (result.aborted_replicates > 0) {
    err << fmt::format("warning: {} replicate(s) aborted: attempt count overflowed 64 bits\n", result.aborted_replicates);
  }

  std::optional<UpliftReport> report;
  if (!flags.uplift.empty()) {
    const auto comma = flags.uplift.find(',');
    if (comma == std::string::npos) throw InputError("--uplift expects fst_a,fst_b (fst_a may be 'none')");
    const auto a_text = csv::trim(std::string_view(flags.uplift).substr(0, comma));
    std::optional<double> fst_a;
    if (a_text != "none") {
      fst_a = csv::parse_real(a_text);
      if (!fst_a) throw InputError("--uplift fst_a must be a number or 'none'");
    }
    const auto fst_b = csv::parse_real(std::string_view(flags.uplift).substr(comma + 1));
    if (!fst_b) throw InputError("--uplift fst_b must be a number");
    report = uplift(model, fst_a, *fst_b);
  }

  std::ostringstream doc;
  write_risk_result(doc, result, report ? &*report : nullptr);
  if (flags.out_path.empty()) {
    out << doc.str();
  } else {
    write_file(flags.out_path, doc.str());
  }
  if (!flags.dump_samples.empty()) {
    std::string lines;
    for (double v : result.loss_samples) lines += csv::format_real(v) + '\n';
    write_file(flags.dump_samples, lines);
  }
  return kOk;
}

int cmd_report(const Selection& sel, const FitFlags& fit, CurveFlags curve, bool groups, std::ostream& out,
               std::ostream& err) {
  if (!curve.markers.empty()) curve.report.reference_markers = parse_markers(curve.markers);
  curve.report.validate();
  const fs::path dir = fit.out_dir;
  const auto loaded = load_selection(sel, err);
  write_file(dir / "aggregate.csv", aggregate_table(loaded.aggregate));

  const auto grid = curve.report.grid();
  const auto samples = fit_and_write(sel, fit.mcmc, dir, "", out, err);
  std::vector<CurveSeries> series{{sel.scope, summarize_curve(samples, grid, curve.report.credible_level), true}};
  curve.csv_path = (dir / "curve.csv").string();
  curve.svg_path = (dir / "curve.svg").string();
  write_curves(series, curve, samples.p0, out);

  if (groups) {
    for (const auto& label : fstrisk::groups(loaded.dataset)) {
      Selection group_sel = sel;
      group_sel.scope = label;
      const auto group_samples = fit_and_write(group_sel, fit.mcmc, dir, "_" + label, out, err);
      series.push_back({label, summarize_curve(group_samples, grid, curve.report.credible_level), false});
    }
    curve.csv_path = (dir / "groups.csv").string();
    curve.svg_path = (dir / "groups.svg").string();
    write_curves(series, curve, samples.p0, out);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map Cybench first-solve-time capability levels to risk estimates", "fstrisk"};
  app.require_subcommand(1);

  Selection sel;
  FitFlags fit;
  CurveFlags curve;
  PropagateFlags prop;
  std::string aggregate_out;
  bool groups = false;

  auto* agg_cmd = app.add_subcommand("aggregate", "Per-task mean, sd, n and se of the estimates");
  add_selection(*agg_cmd, sel);
  agg_cmd->add_option("--out", aggregate_out, "Write CSV here instead of standard output");

  auto* fit_cmd = app.add_subcommand("fit", "Fit the FST curve by MCMC");
  add_selection(*fit_cmd, sel);
  add_mcmc(*fit_cmd, fit.mcmc);
  fit_cmd->add_option("--out-dir", fit.out_dir, "Directory for posterior.csv, diagnostics.txt, manifest.json");

  auto* curve_cmd = app.add_subcommand("curve", "Summarize posteriors into CSV and SVG curve bands");
  curve_cmd->add_option("--posterior", curve.posteriors, "[label=]posterior.csv (repeatable; the first gets the band)")
      ->required();
  curve_cmd->add_option("--csv", curve.csv_path, "Curve CSV output");
  curve_cmd->add_option("--svg", curve.svg_path, "Curve SVG output");
  add_curve_config(*curve_cmd, curve);

  auto* prop_cmd = app.add_subcommand("propagate", "Monte Carlo annual loss for a scenario");
  prop_cmd->add_option("scenario", prop.scenario, "Scenario file (.riskdsl)")->required();
  prop_cmd->add_option("--posterior", prop.posteriors, "[curve_id=]posterior.csv (repeatable)");
  prop_cmd->add_option("--replicates", prop.replicates, "Monte Carlo replicates");
  prop_cmd->add_option("--seed", prop.seed, "Random seed");
  prop_cmd->add_option("--uplift", prop.uplift, "Compare capability levels: fst_a,fst_b (fst_a may be 'none')");
  prop_cmd->add_option("--out", prop.out_path, "Write the result document here instead of standard output");
  prop_cmd->add_option("--dump-samples", prop.dump_samples, "Write one loss sample per line");

  auto* report_cmd = app.add_subcommand("report", "aggregate + fit + curve in one run");
  add_selection(*report_cmd, sel);
  add_mcmc(*report_cmd, fit.mcmc);
  report_cmd->add_option("--out-dir", fit.out_dir, "Output directory");
  add_curve_config(*report_cmd, curve);
  report_cmd->add_flag("--groups", groups, "Also fit each group and plot them together");

  std::vector<std::string> argv_store{"fstrisk"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  try {
    if (agg_cmd->parsed()) return cmd_aggregate(sel, aggregate_out, out, err);
    if (fit_cmd->parsed()) return cmd_fit(sel, fit, out, err);
    if (curve_cmd->parsed()) return cmd_curve(curve, out);
    if (prop_cmd->parsed()) return cmd_propagate(prop, out, err);
    if (report_cmd->parsed()) return cmd_report(sel, fit, curve, groups, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace fstrisk::cli
