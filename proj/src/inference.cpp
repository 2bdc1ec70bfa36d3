// SPDX-License-Identifier: Apache-2.0
#include "fstrisk/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "fstrisk/csv.hpp"
#include "fstrisk/errors.hpp"
#include "fstrisk/mcmc.hpp"
#include "fstrisk/rng.hpp"

namespace fstrisk {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// Type-7 quantile on sorted data.
double sorted_quantile(const std::vector<double>& sorted, double level) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CurveBand band_at(std::span<const CurveParams> draws, double fst, double level, std::vector<double>& scratch) {
  scratch.resize(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) scratch[i] = curve_value(draws[i], fst);
  std::sort(scratch.begin(), scratch.end());
  const double base = scratch.front();
  double excess = 0.0;
  for (double v : scratch) excess += v - base;
  const double mean = base + excess / static_cast<double>(scratch.size());
  return {fst, mean, sorted_quantile(scratch, 0.5 * (1.0 - level)), sorted_quantile(scratch, 0.5 * (1.0 + level))};
}

}  // namespace

void McmcConfig::validate() const {
  if (chains < 1) throw InputError("chains must be at least 1");
  if (warmup < 1) throw InputError("warmup must be positive");
  if (draws < 100) throw InputError("draws must be at least 100");
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) throw InputError("noise floor must be nonnegative");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw InputError("target acceptance must lie in (0, 1)");
}

Unconstrained to_unconstrained(const CurveParams& params) {
  return {logit((params.pmax - params.p0) / (1.0 - params.p0)), std::log(params.slope), params.midpoint};
}

CurveParams from_unconstrained(const Unconstrained& u, double p0) {
  return {p0, p0 + (1.0 - p0) * logistic(u[0]), std::exp(u[1]), u[2]};
}

double log_likelihood(const CurveParams& params, std::span<const AggregatePoint> points, double noise_floor) {
  double total = 0.0;
  for (const auto& point : points) {
    const double sd = std::max(point.se_p, noise_floor);
    if (!(sd > 0.0)) return kNegInf;
    total += normal_logpdf(point.mean_p, curve_value(params, point.fst_minutes), sd);
  }
  return total;
}

double log_prior(const CurveParams& params, const PriorSpec& prior) {
  if (!params.valid()) return kNegInf;
  const auto u = to_unconstrained(params);
  if (!std::isfinite(u[0]) || !std::isfinite(u[1])) return kNegInf;
  return normal_logpdf(u[0], prior.rise_mean, prior.rise_sd) + normal_logpdf(u[1], prior.lslope_mean, prior.lslope_sd) +
         normal_logpdf(u[2], prior.midpoint_mean, prior.midpoint_sd);
}

double log_posterior(const CurveParams& params, std::span<const AggregatePoint> points, const McmcConfig& config) {
  const double prior = log_prior(params);
  if (!std::isfinite(prior)) return kNegInf;
  const double lik = log_likelihood(params, points, config.noise_floor);
  if (std::isnan(lik)) return kNegInf;
  return prior + lik;
}

std::size_t PosteriorSamples::total_draws() const noexcept {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.size();
  return n;
}

std::vector<CurveParams> PosteriorSamples::pooled() const {
  std::vector<CurveParams> all;
  all.reserve(total_draws());
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  return all;
}

PosteriorSamples fit_curve(std::span<const AggregatePoint> points, double baseline_p, const McmcConfig& config,
                           Execution execution) {
  config.validate();
  if (!(baseline_p > 0.0 && baseline_p < 1.0)) throw InputError("baseline probability must lie in (0, 1)");
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.fst_minutes);
  if (distinct.size() < 2) throw InputError("fit needs at least 2 distinct FST values");

  const std::vector<AggregatePoint> data(points.begin(), points.end());
  auto density = [&](const Unconstrained& u) { return log_posterior(from_unconstrained(u, baseline_p), data, config); };

  const Unconstrained prior_median{kDefaultPrior.rise_mean, kDefaultPrior.lslope_mean, kDefaultPrior.midpoint_mean};
  std::vector<Unconstrained> starts(config.chains);
  for (std::size_t c = 0; c < config.chains; ++c) {
    CounterRng init(config.seed, stream_id(StreamDomain::chain_init, c));
    for (std::size_t d = 0; d < 3; ++d) starts[c][d] = prior_median[d] + 0.5 * init.normal();
    if (!std::isfinite(density(starts[c]))) {
      const auto p = from_unconstrained(starts[c], baseline_p);
      throw NumericalError(fmt::format("non-finite log posterior at chain {} start (p0={}, pmax={}, slope={}, midpoint={})",
                                       c, p.p0, p.pmax, p.slope, p.midpoint));
    }
  }

  const RandomWalkSchedule schedule{UpdateScheme::learned_covariance, config.warmup, config.draws, config.target_accept};
  const Unconstrained initial_step{0.3, 0.3, 0.3};
  std::vector<ChainTrace<3>> traces(config.chains);
  auto run_chain = [&](std::size_t c) {
    CounterRng rng(config.seed, stream_id(StreamDomain::mcmc_chain, c));
    traces[c] = run_random_walk<3>(density, starts[c], initial_step, schedule, rng);
  };

  const auto n_chains = static_cast<std::ptrdiff_t>(config.chains);
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(static, 1)
    for (std::ptrdiff_t c = 0; c < n_chains; ++c) run_chain(static_cast<std::size_t>(c));
  } else {
    for (std::ptrdiff_t c = 0; c < n_chains; ++c) run_chain(static_cast<std::size_t>(c));
  }

  PosteriorSamples samples;
  samples.p0 = baseline_p;
  samples.config = config;
  for (auto& trace : traces) {
    std::vector<CurveParams> chain;
    chain.reserve(trace.draws.size());
    for (const auto& u : trace.draws) chain.push_back(from_unconstrained(u, baseline_p));
    samples.chains.push_back(std::move(chain));
    samples.acceptance_rate.push_back(trace.acceptance_rate);
  }
  return samples;
}

ParameterDiagnostic diagnose(const std::vector<std::vector<double>>& chains) {
  ParameterDiagnostic out;
  if (chains.empty() || chains.front().size() < 4) throw InputError("diagnostics need at least 4 draws per chain");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw InputError("diagnostics need chains of equal length");
  }
  const std::size_t m = chains.size();

  const double first = chains.front().front();
  const bool constant = std::ranges::all_of(chains, [&](const auto& c) {
    return std::ranges::all_of(c, [&](double x) { return x == first; });
  });
  if (constant) {
    out.degenerate = true;
    if (m >= 2) out.rhat = 1.0;
    out.ess = static_cast<double>(m * n);
    return out;
  }

  auto mean_of = [](std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  auto var_of = [](std::span<const double> xs, double mean) {
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return s / static_cast<double>(xs.size() - 1);
  };
  // Classic potential scale reduction over equal-length sequences.
  auto psrf = [&](const std::vector<std::span<const double>>& seqs, double& within) {
    const auto len = static_cast<double>(seqs.front().size());
    std::vector<double> means;
    within = 0.0;
    for (auto s : seqs) {
      const double mu = mean_of(s);
      means.push_back(mu);
      within += var_of(s, mu);
    }
    within /= static_cast<double>(seqs.size());
    const double grand = mean_of(means);
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between = seqs.size() > 1 ? between / static_cast<double>(seqs.size() - 1) : 0.0;  // = B / len
    const double var_plus = (len - 1.0) / len * within + between;
    return std::pair{var_plus, between};
  };

  // Split R-hat.
  if (m >= 2) {
    const std::size_t half = n / 2;
    std::vector<std::span<const double>> halves;
    for (const auto& c : chains) {
      halves.emplace_back(c.data(), half);
      halves.emplace_back(c.data() + (n - half), half);
    }
    double within = 0.0;
    const auto [var_plus, between] = psrf(halves, within);
    if (within > 0.0) {
      out.rhat = std::sqrt(var_plus / within);
    } else {
      out.degenerate = true;
      out.rhat = between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
  }

  // ESS from the unsplit chains.
  std::vector<std::span<const double>> whole;
  for (const auto& c : chains) whole.emplace_back(c.data(), n);
  double within = 0.0;
  const auto [var_plus, between] = psrf(whole, within);
  const double total = static_cast<double>(m * n);
  if (!(within > 0.0) || !(var_plus > 0.0)) {
    out.degenerate = true;
    out.ess = total;
    return out;
  }

  std::vector<double> means;
  for (auto s : whole) means.push_back(mean_of(s));
  auto mean_autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (within - mean_autocov(lag)) / var_plus; };

  double sum_pairs = 0.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    // rho(0) is 1 up to the biased-vs-unbiased variance convention.
    const double r0 = k == 0 ? 1.0 : rho(2 * k);
    double pair = r0 + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous_pair);
    sum_pairs += pair;
    previous_pair = pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(total));
  out.ess = std::min(total / tau, total);
  return out;
}

double Diagnostics::max_rhat() const noexcept {
  double worst = 1.0;
  for (const auto& p : params) {
    if (p.rhat) worst = std::max(worst, *p.rhat);
  }
  return worst;
}

double Diagnostics::min_ess() const noexcept {
  double least = std::numeric_limits<double>::infinity();
  for (const auto& p : params) least = std::min(least, p.ess);
  return least;
}

Diagnostics diagnostics(const PosteriorSamples& samples) {
  Diagnostics out;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::vector<double>> chains;
    for (const auto& chain : samples.chains) {
      std::vector<double> values;
      values.reserve(chain.size());
      for (const auto& p : chain) values.push_back(k == 0 ? p.pmax : k == 1 ? p.slope : p.midpoint);
      chains.push_back(std::move(values));
    }
    out.params[k] = diagnose(chains);
  }
  return out;
}

CurveSummary summarize_curve(const PosteriorSamples& samples, std::span<const double> grid_fst, double credible_level,
                             Execution execution) {
  if (grid_fst.empty()) throw InputError("curve grid is empty");
  if (!(credible_level > 0.0 && credible_level < 1.0)) throw InputError("credible level must lie in (0, 1)");
  for (std::size_t i = 0; i < grid_fst.size(); ++i) {
    if (!(grid_fst[i] > 0.0)) throw InputError("curve grid values must be positive");
    if (i > 0 && grid_fst[i] < grid_fst[i - 1]) throw InputError("curve grid must be sorted ascending");
  }
  const auto draws = samples.pooled();
  if (draws.empty()) throw InputError("posterior has no draws");

  CurveSummary summary;
  summary.credible_level = credible_level;
  summary.grid.resize(grid_fst.size());
  const auto points = static_cast<std::ptrdiff_t>(grid_fst.size());
  if (execution == Execution::parallel) {
#pragma omp parallel
    {
      std::vector<double> scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < points; ++i) {
        summary.grid[i] = band_at(draws, grid_fst[i], credible_level, scratch);
      }
    }
  } else {
    std::vector<double> scratch;
    for (std::ptrdiff_t i = 0; i < points; ++i) summary.grid[i] = band_at(draws, grid_fst[i], credible_level, scratch);
  }
  return summary;
}

double posterior_mean_curve(const PosteriorSamples& samples, double fst_minutes) {
  const double grid[] = {fst_minutes};
  return summarize_curve(samples, grid, 0.9, Execution::serial).grid.front().mean;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && lo < hi)) throw InputError("grid needs 0 < min < max");
  if (n == 0) throw InputError("grid needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> grid(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

void write_posterior(std::ostream& out, const PosteriorSamples& samples) {
  out << "#p0=" << csv::format_real(samples.p0) << '\n';
  out << "#seed=" << samples.config.seed << '\n';
  out << "chain,draw,pmax,slope,midpoint\n";
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& chain = samples.chains[c];
    for (std::size_t d = 0; d < chain.size(); ++d) {
      out << c << ',' << d << ',' << csv::format_real(chain[d].pmax) << ',' << csv::format_real(chain[d].slope) << ','
          << csv::format_real(chain[d].midpoint) << '\n';
    }
  }
}

PosteriorSamples read_posterior(std::istream& in, std::string_view origin) {
  PosteriorSamples samples;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool have_p0 = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (!header_seen && trimmed.front() == '#') {
      const auto eq = trimmed.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = trimmed.substr(1, eq - 1);
      const auto value = trimmed.substr(eq + 1);
      if (key == "p0") {
        const auto p0 = csv::parse_real(value);
        if (!p0 || !(*p0 > 0.0 && *p0 < 1.0)) throw InputError(fmt::format("{}:{}: bad #p0", origin, line_no));
        samples.p0 = *p0;
        have_p0 = true;
      } else if (key == "seed") {
        try {
          samples.config.seed = std::stoull(std::string(value));
        } catch (const std::exception&) {
          throw InputError(fmt::format("{}:{}: bad #seed", origin, line_no));
        }
      }
      continue;
    }
    if (!header_seen) {
      if (trimmed != "chain,draw,pmax,slope,midpoint") {
        throw InputError(fmt::format("{}:{}: expected header chain,draw,pmax,slope,midpoint", origin, line_no));
      }
      header_seen = true;
      continue;
    }
    const auto fields = csv::split_record(trimmed);
    if (!fields || fields->size() != 5) throw InputError(fmt::format("{}:{}: expected 5 columns", origin, line_no));
    const auto chain = csv::parse_real((*fields)[0]);
    const auto draw = csv::parse_real((*fields)[1]);
    if (!chain || !draw || *chain < 0 || *chain != std::floor(*chain) || *draw != std::floor(*draw)) {
      throw InputError(fmt::format("{}:{}: chain and draw must be nonnegative integers", origin, line_no));
    }
    const auto c = static_cast<std::size_t>(*chain);
    if (c != samples.chains.size() && c + 1 != samples.chains.size()) {
      throw InputError(fmt::format("{}:{}: chains must appear in order", origin, line_no));
    }
    if (c == samples.chains.size()) samples.chains.emplace_back();
    if (static_cast<std::size_t>(*draw) != samples.chains[c].size()) {
      throw InputError(fmt::format("{}:{}: draws must appear in order", origin, line_no));
    }
    CurveParams p{samples.p0, 0, 0, 0};
    const auto pmax = csv::parse_real((*fields)[2]);
    const auto slope = csv::parse_real((*fields)[3]);
    const auto mid = csv::parse_real((*fields)[4]);
    if (!pmax || !slope || !mid) throw InputError(fmt::format("{}:{}: non-numeric parameter", origin, line_no));
    p.pmax = *pmax;
    p.slope = *slope;
    p.midpoint = *mid;
    if (!p.valid()) throw InputError(fmt::format("{}:{}: draw violates 0 < p0 < pmax < 1, slope > 0", origin, line_no));
    samples.chains[c].push_back(p);
  }
  if (!header_seen) throw InputError(fmt::format("{}: missing posterior header", origin));
  if (!have_p0) throw InputError(fmt::format("{}: missing #p0 directive", origin));
  if (samples.chains.empty()) throw InputError(fmt::format("{}: posterior has no draws", origin));
  samples.config.chains = samples.chains.size();
  samples.config.draws = samples.chains.front().size();
  return samples;
}

PosteriorSamples load_posterior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot read '{}'", path.string()));
  return read_posterior(in, path.string());
}

void write_curve_summary(std::ostream& out, const CurveSummary& summary) {
  out << "fst,mean,lo,hi\n";
  for (const auto& row : summary.grid) {
    out << csv::format_real(row.fst_minutes) << ',' << csv::format_real(row.mean) << ',' << csv::format_real(row.lo)
        << ',' << csv::format_real(row.hi) << '\n';
  }
}

CurveSummary read_curve_summary(std::istream& in, std::string_view origin) {
  CurveSummary summary;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (!header_seen) {
      if (trimmed != "fst,mean,lo,hi") throw InputError(fmt::format("{}:{}: expected header fst,mean,lo,hi", origin, line_no));
      header_seen = true;
      continue;
    }
    const auto fields = csv::split_record(trimmed);
    if (!fields || fields->size() != 4) throw InputError(fmt::format("{}:{}: expected 4 columns", origin, line_no));
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto x = csv::parse_real((*fields)[i]);
      if (!x) throw InputError(fmt::format("{}:{}: non-numeric value", origin, line_no));
      v[i] = *x;
    }
    summary.grid.push_back({v[0], v[1], v[2], v[3]});
  }
  if (!header_seen) throw InputError(fmt::format("{}: missing header", origin));
  return summary;
}

}  // namespace fstrisk
