// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "quantlab/backward.h"
#include "quantlab/entropy_model.h"
#include "quantlab/infotheory.h"
#include "quantlab/lab.h"
#include "quantlab/parallel.h"
#include "quantlab/training.h"

namespace quantlab {

namespace {

using Row = std::vector<Cell>;

Column Text(std::string name) { return {std::move(name), ColumnType::kText}; }
Column Num(std::string name) { return {std::move(name), ColumnType::kNumber}; }

std::vector<SurrogateSpec> ParseCalcs(const ExperimentConfig& cfg, const std::string& key) {
  std::vector<SurrogateSpec> out;
  for (const std::string& s : cfg.get_strings(key)) {
    try {
      out.push_back(SurrogateSpec::FromLabel(s));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, key + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::kConfigError, key + ": empty list");
  return out;
}

double CalcParam(const SurrogateSpec& s) { return s.kind == SurrogateKind::kSga ? s.tau : s.alpha; }

std::vector<double> NonEmpty(const ExperimentConfig& cfg, const std::string& key) {
  std::vector<double> v = cfg.get_doubles(key);
  if (v.empty()) throw Error(ErrorCode::kConfigError, key + ": empty list");
  return v;
}

int Positive(const ExperimentConfig& cfg, const std::string& key) {
  const int v = cfg.get_int(key);
  if (v < 1) throw Error(ErrorCode::kConfigError, key + " must be >= 1");
  return v;
}

// Runs fn(i) for i < n on the worker pool and returns the rows in index order.
template <typename Fn>
std::vector<Row> GatherRows(std::size_t n, int threads, Fn&& fn) {
  std::vector<Row> rows(n);
  parallel_for(n, threads, [&](std::size_t i) { rows[i] = fn(i); });
  return rows;
}

Seed BaseSeed(const ExperimentConfig& cfg) { return Seed{cfg.seed, 0}; }

// ---------------------------------------------------------------------------

RunOutput RunMutualInfo(const ExperimentConfig& cfg) {
  const auto calcs = ParseCalcs(cfg, "calcs");
  const auto mus = NonEmpty(cfg, "mus");
  const auto sigmas = NonEmpty(cfg, "sigmas");
  const std::size_t per_calc = mus.size() * sigmas.size();
  ResultTable t({Text("calc"), Num("alpha"), Num("mu"), Num("sigma"), Num("I_bits"),
                 Num("I_minus_round_bits")});
  for (Row& r : GatherRows(calcs.size() * per_calc, cfg.threads, [&](std::size_t i) {
         const SurrogateSpec& spec = calcs[i / per_calc];
         const double mu = mus[(i % per_calc) / sigmas.size()];
         const double sigma = sigmas[i % sigmas.size()];
         const Gaussian1D src(mu, sigma);
         const double mi = mutual_information(spec, src);
         return Row{spec.label(), CalcParam(spec), mu, sigma, mi, mi - mi_rounding(src)};
       })) {
    t.add_row(std::move(r));
  }
  return {std::move(t), {}};
}

RunOutput RunDistortionSim(const ExperimentConfig& cfg) {
  const auto calcs = ParseCalcs(cfg, "calcs");
  const auto mus = NonEmpty(cfg, "mus");
  const auto sigmas = NonEmpty(cfg, "sigmas");
  const int dim = cfg.get_int("dim");
  const double rho = cfg.get_double("rho");
  const int steps = Positive(cfg, "steps");
  const int batch = Positive(cfg, "batch");
  const double lr = cfg.get_double("lr");
  const int anneal_steps = cfg.get_int("anneal_steps");
  const int eval_samples = Positive(cfg, "eval_samples");
  if (dim != 1 && dim != 2) throw Error(ErrorCode::kConfigError, "dim must be 1 or 2");

  const std::size_t per_calc = mus.size() * sigmas.size();
  ResultTable t({Text("calc"), Num("alpha"), Num("dim"), Num("rho"), Num("mu"), Num("sigma"),
                 Num("D_tilde_mse"), Num("D_tilde_mse_se"), Num("D_round_mse"),
                 Num("D_round_mse_se"), Num("delta_D_rel")});
  for (Row& r : GatherRows(calcs.size() * per_calc, cfg.threads, [&](std::size_t i) {
         const SurrogateSpec& spec = calcs[i / per_calc];
         const std::size_t point = i % per_calc;
         const double mu = mus[point / sigmas.size()];
         const double sigma = sigmas[point % sigmas.size()];
         DistortionSource src{dim, mu, sigma, rho};
         TrainConfig tc;
         tc.steps = steps;
         tc.batch = batch;
         tc.lr.base = lr;
         // Seeded by grid point, so every calc shares one rounding baseline.
         tc.seed = BaseSeed(cfg).derive(point);
         if (anneal_steps > 0 && IsAnnealed(spec.kind)) {
           tc.anneal = AnnealSchedule{1.0, spec.alpha, anneal_steps};
         }
         const DistortionResult res = train_synthesis(spec, src, tc, eval_samples);
         return Row{spec.label(), CalcParam(spec), static_cast<double>(dim), rho, mu, sigma,
                    res.d_tilde.mean, res.d_tilde.se, res.d_round.mean, res.d_round.se,
                    res.delta_d_rel};
       })) {
    t.add_row(std::move(r));
  }
  return {std::move(t), {}};
}

RunOutput RunRateSurface(const ExperimentConfig& cfg) {
  const auto calcs = ParseCalcs(cfg, "calcs");
  const Gaussian1D src(cfg.get_double("source_mu"), cfg.get_double("source_sigma"));
  SurfaceGrid grid = SurfaceGrid::Default(src.mu);
  if (const auto m = cfg.get_doubles("mu_q"); !m.empty()) grid.mu_grid = m;
  if (const auto s = cfg.get_doubles("sigma_q"); !s.empty()) grid.sigma_grid = s;
  const double sigma0 = cfg.get_double("sigma0");
  const std::string method_name = cfg.get_string("method");
  if (method_name != "quadrature" && method_name != "monte-carlo") {
    throw Error(ErrorCode::kConfigError, "method must be quadrature or monte-carlo");
  }
  const int mc_samples = Positive(cfg, "mc_samples");

  ResultTable t({Text("calc"), Num("alpha"), Num("mu_q"), Num("sigma_q"), Num("R_tilde_bits"),
                 Num("R_round_bits"), Num("delta_R_bits")});
  ResultTable summary({Text("calc"), Num("alpha"), Num("q_star_mu"), Num("q_star_sigma"),
                       Num("q_star_rate_bits"), Num("q_round_mu"), Num("q_round_sigma"),
                       Num("q_star_distance"), Num("max_abs_delta_R_bits")});
  for (std::size_t c = 0; c < calcs.size(); ++c) {
    const SurrogateSpec& spec = calcs[c];
    const RateMethod method = method_name == "quadrature"
                                  ? RateMethod::Quad()
                                  : RateMethod::MonteCarlo(mc_samples, BaseSeed(cfg).derive(c));
    const RateSurface s = rate_surface(spec, src, grid, sigma0, method, cfg.threads);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < s.mu_grid.size(); ++i) {
      for (std::size_t j = 0; j < s.sigma_grid.size(); ++j) {
        const double d = s.at(s.delta_r, i, j);
        max_abs = std::max(max_abs, std::abs(d));
        t.add_row({spec.label(), CalcParam(spec), s.mu_grid[i], s.sigma_grid[j],
                   s.at(s.rate_bits, i, j), s.at(s.round_rate_bits, i, j), d});
      }
    }
    summary.add_row({spec.label(), CalcParam(spec), s.q_star_mu, s.q_star_sigma, s.q_star_rate,
                     s.q_round_mu, s.q_round_sigma, s.q_star_distance, max_abs});
  }
  RunOutput out{std::move(t), {}};
  out.extra.emplace_back("summary", std::move(summary));
  return out;
}

RunOutput RunGradStats(const ExperimentConfig& cfg) {
  struct GradRow {
    GradRule rule;
    SurrogateSpec spec;
  };
  std::vector<GradRow> rows;
  for (const std::string& item : cfg.get_strings("rows")) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "rows: '" + item + "' is not RULE:CALC");
    }
    const auto rule = ParseGradRule(item.substr(0, colon));
    if (!rule) throw Error(ErrorCode::kConfigError, "rows: unknown rule in '" + item + "'");
    try {
      rows.push_back({*rule, SurrogateSpec::FromLabel(item.substr(colon + 1))});
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, std::string("rows: ") + e.what());
    }
  }
  if (rows.empty()) throw Error(ErrorCode::kConfigError, "rows: empty list");
  const auto sigma_qs = NonEmpty(cfg, "sigma_q");
  const double mu_q = cfg.get_double("mu_q");
  const int n_y = Positive(cfg, "n_y");
  const int n_trials = Positive(cfg, "n_trials");

  ResultTable t({Text("rule"), Text("calc"), Num("alpha"), Num("sigma_q"), Num("bias"),
                 Num("bias_se"), Num("var"), Num("var_se"), Num("signed_bias"),
                 Num("signed_bias_se"), Num("bias_noise_floor"), Num("max_abs_z")});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < sigma_qs.size(); ++k) {
      const GaussianEntropyModel model(mu_q, sigma_qs[k], 0.0);
      const ScalarFn loss = [&](double v) { return model.rate_bits(v); };
      const ScalarFn deriv = [&](double v) { return model.rate_bits_deriv(v); };
      const EstimatorSpec est{rows[r].spec, rows[r].rule, 1};
      const GradStats g =
          measure_grad_stats(est, loss, deriv, Gaussian1D(mu_q, sigma_qs[k]), n_y, n_trials,
                             BaseSeed(cfg).derive(r * sigma_qs.size() + k), cfg.threads);
      t.add_row({std::string(GradRuleName(rows[r].rule)), rows[r].spec.label(),
                 CalcParam(rows[r].spec), sigma_qs[k], g.bias, g.bias_se, g.variance,
                 g.variance_se, g.signed_bias, g.signed_bias_se, g.bias_noise_floor,
                 g.max_abs_z});
    }
  }
  return {std::move(t), {}};
}

RunOutput RunMi2d(const ExperimentConfig& cfg) {
  const auto calcs = ParseCalcs(cfg, "calcs");
  const auto sigmas = NonEmpty(cfg, "sigmas");
  const double rho = cfg.get_double("rho");
  ResultTable t({Text("calc"), Num("sigma"), Num("rho"), Num("I_bits"), Num("I_scalar_aun_bits")});
  for (Row& r : GatherRows(calcs.size() * sigmas.size(), cfg.threads, [&](std::size_t i) {
         const SurrogateSpec& spec = calcs[i / sigmas.size()];
         const double sigma = sigmas[i % sigmas.size()];
         return Row{spec.label(), sigma, rho, mi_2d_correlated(spec.kind, sigma, rho),
                    mi_aun(Gaussian1D(0.0, sigma))};
       })) {
    t.add_row(std::move(r));
  }
  return {std::move(t), {}};
}

RunOutput RunEntropyCompare(const ExperimentConfig& cfg) {
  const auto mus = NonEmpty(cfg, "mus");
  const auto sigmas = NonEmpty(cfg, "sigmas");
  ResultTable t({Num("mu"), Num("sigma"), Num("H_tilde_bits"), Num("H_round_bits"),
                 Num("R_tilde_bits")});
  for (Row& r : GatherRows(mus.size() * sigmas.size(), cfg.threads, [&](std::size_t i) {
         const double mu = mus[i / sigmas.size()];
         const double sigma = sigmas[i % sigmas.size()];
         const EntropyPair h = entropy_compare(mu, sigma);
         const Gaussian1D src(mu, sigma);
         const double rate =
             expected_rate(SurrogateSpec::Aun(), src, GaussianEntropyModel(mu, sigma, 0.0)).bits;
         return Row{mu, sigma, h.h_cont, h.h_disc, rate};
       })) {
    t.add_row(std::move(r));
  }
  return {std::move(t), {}};
}

struct SeedStats {
  double mean = 0.0;
  double se = 0.0;
};

SeedStats AcrossSeeds(const std::vector<double>& v) {
  RunningStats rs;
  for (double x : v) rs.add(x);
  return {rs.mean(), v.size() > 1 ? rs.standard_error() : 0.0};
}

RunOutput RunLaplaceRd(const ExperimentConfig& cfg) {
  std::vector<AnalysisKind> analyses;
  for (const std::string& a : cfg.get_strings("analyses")) {
    if (a == "linear") {
      analyses.push_back(AnalysisKind::kLinear);
    } else if (a == "nonlinear") {
      analyses.push_back(AnalysisKind::kNonlinear);
    } else {
      throw Error(ErrorCode::kConfigError, "analyses: unknown transform '" + a + "'");
    }
  }
  std::vector<GradRule> rules;
  for (const std::string& r : cfg.get_strings("rules")) {
    const auto rule = ParseGradRule(r);
    if (!rule || (*rule != GradRule::kSte && *rule != GradRule::kEp)) {
      throw Error(ErrorCode::kConfigError, "rules: laplace-rd supports STE and EP, got '" + r + "'");
    }
    rules.push_back(*rule);
  }
  const auto lambdas = NonEmpty(cfg, "lambdas");
  const int seeds = Positive(cfg, "seeds");
  if (analyses.empty() || rules.empty()) throw Error(ErrorCode::kConfigError, "empty analyses or rules");

  LaplaceRdConfig base;
  base.steps = Positive(cfg, "steps");
  base.post_steps = cfg.get_int("post_steps");
  base.batch = Positive(cfg, "batch");
  base.lr = cfg.get_double("lr");
  base.b0 = cfg.get_double("b0");
  base.post_b0 = cfg.get_double("post_b0");
  base.blocks = cfg.get_int("blocks");
  base.width = Positive(cfg, "width");
  base.eval_samples = Positive(cfg, "eval_samples");

  const std::size_t nl = lambdas.size();
  const std::size_t ns = static_cast<std::size_t>(seeds);
  const std::size_t per_rule = ns * nl;
  const std::size_t per_analysis = rules.size() * per_rule;
  std::vector<RdPoint> points(analyses.size() * per_analysis);
  parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
    LaplaceRdConfig c = base;
    c.analysis = analyses[i / per_analysis];
    c.rule = rules[(i % per_analysis) / per_rule];
    const std::size_t s = (i % per_rule) / nl;
    const std::size_t l = i % nl;
    c.lambdas = {lambdas[l]};
    // Shared by both rules and both transforms: paired comparisons.
    c.seed = BaseSeed(cfg).derive(s).derive(l);
    points[i] = train_laplace_rd(c).front();
  });

  auto point = [&](std::size_t a, std::size_t r, std::size_t s, std::size_t l) -> const RdPoint& {
    return points[a * per_analysis + r * per_rule + s * nl + l];
  };
  auto analysis_name = [](AnalysisKind k) {
    return std::string(k == AnalysisKind::kLinear ? "linear" : "nonlinear");
  };

  ResultTable t({Text("analysis"), Text("rule"), Num("seed"), Num("lambda"), Num("rate_bits"),
                 Num("rate_bits_se"), Num("D_mse"), Num("D_mse_se"), Num("loss"),
                 Num("loss_se")});
  for (std::size_t a = 0; a < analyses.size(); ++a) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t l = 0; l < nl; ++l) {
          const RdPoint& p = point(a, r, s, l);
          t.add_row({analysis_name(analyses[a]), std::string(GradRuleName(rules[r])),
                     static_cast<double>(s), p.lambda, p.rate_bits.mean, p.rate_bits.se,
                     p.mse.mean, p.mse.se, p.loss.mean, p.loss.se});
        }
      }
    }
  }
  RunOutput out{std::move(t), {}};

  // Paired STE/EP summaries when both rules ran.
  std::optional<std::size_t> ste, ep;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (rules[r] == GradRule::kSte) ste = r;
    if (rules[r] == GradRule::kEp) ep = r;
  }
  if (!ste || !ep) return out;

  // Per lambda: loss difference EP - STE across seeds. Per transform: rate
  // of STE minus the EP curve's rate at the same distortion, averaged over
  // the STE points inside the EP curve's range, then across seeds.
  ResultTable paired({Text("analysis"), Num("lambda"), Num("loss_ste"), Num("loss_ep"),
                      Num("loss_diff"), Num("loss_diff_se")});
  ResultTable curve({Text("analysis"), Num("rate_gap_bits"), Num("rate_gap_bits_se"),
                     Num("seeds_with_overlap")});
  for (std::size_t a = 0; a < analyses.size(); ++a) {
    for (std::size_t l = 0; l < nl; ++l) {
      std::vector<double> ls, le, diff;
      for (std::size_t s = 0; s < ns; ++s) {
        ls.push_back(point(a, *ste, s, l).loss.mean);
        le.push_back(point(a, *ep, s, l).loss.mean);
        diff.push_back(le.back() - ls.back());
      }
      const SeedStats d = AcrossSeeds(diff);
      paired.add_row({analysis_name(analyses[a]), lambdas[l], AcrossSeeds(ls).mean,
                      AcrossSeeds(le).mean, d.mean, d.se});
    }
    std::vector<double> per_seed;
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<RdPoint> ep_curve, ste_points;
      for (std::size_t l = 0; l < nl; ++l) {
        ep_curve.push_back(point(a, *ep, s, l));
        ste_points.push_back(point(a, *ste, s, l));
      }
      const std::vector<double> gaps = rate_gap_at_matched_distortion(ep_curve, ste_points);
      if (gaps.empty()) continue;
      double sum = 0.0;
      for (double g : gaps) sum += g;
      per_seed.push_back(sum / static_cast<double>(gaps.size()));
    }
    if (!per_seed.empty()) {
      const SeedStats g = AcrossSeeds(per_seed);
      curve.add_row({analysis_name(analyses[a]), g.mean, g.se,
                     static_cast<double>(per_seed.size())});
    }
  }
  out.extra.emplace_back("paired", std::move(paired));
  out.extra.emplace_back("curve", std::move(curve));
  return out;
}

RunOutput RunLowerBoundSweep(const ExperimentConfig& cfg) {
  const auto sigma0s = NonEmpty(cfg, "sigma0s");
  const int seeds = Positive(cfg, "seeds");
  LowerBoundConfig base;
  base.lambda = cfg.get_double("lambda");
  base.scale_lo = cfg.get_double("scale_lo");
  base.scale_hi = cfg.get_double("scale_hi");
  base.width = Positive(cfg, "width");
  base.steps = Positive(cfg, "steps");
  base.post_steps = cfg.get_int("post_steps");
  base.batch = Positive(cfg, "batch");
  base.lr = cfg.get_double("lr");
  base.post_sigma0 = cfg.get_double("post_sigma0");
  base.eval_samples = Positive(cfg, "eval_samples");

  const std::size_t ns = static_cast<std::size_t>(seeds);
  std::vector<LowerBoundPoint> points(sigma0s.size() * ns);
  parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
    LowerBoundConfig c = base;
    // One seed per run index, shared across bounds.
    c.seed = BaseSeed(cfg).derive(i % ns);
    points[i] = train_lower_bound(c, sigma0s[i / ns]);
  });

  ResultTable t({Num("sigma0"), Num("seed"), Num("rate_bits"), Num("rate_bits_se"), Num("D_mse"),
                 Num("D_mse_se"), Num("loss"), Num("loss_se")});
  ResultTable summary({Num("sigma0"), Num("rate_bits"), Num("D_mse"), Num("loss"),
                       Num("loss_se")});
  for (std::size_t k = 0; k < sigma0s.size(); ++k) {
    std::vector<double> rates, mses, losses;
    for (std::size_t s = 0; s < ns; ++s) {
      const LowerBoundPoint& p = points[k * ns + s];
      t.add_row({sigma0s[k], static_cast<double>(s), p.rate_bits.mean, p.rate_bits.se, p.mse.mean,
                 p.mse.se, p.loss.mean, p.loss.se});
      rates.push_back(p.rate_bits.mean);
      mses.push_back(p.mse.mean);
      losses.push_back(p.loss.mean);
    }
    const SeedStats l = AcrossSeeds(losses);
    summary.add_row({sigma0s[k], AcrossSeeds(rates).mean, AcrossSeeds(mses).mean, l.mean, l.se});
  }
  RunOutput out{std::move(t), {}};
  out.extra.emplace_back("summary", std::move(summary));
  return out;
}

void Stamp(ResultTable& t, const ExperimentConfig& cfg, double wall_s) {
  auto& m = t.metadata();
  m.clear();
  m.emplace_back("tool", "quantlab " + std::string(kToolVersion));
  m.emplace_back("experiment", std::string(ExperimentName(cfg.experiment)));
  m.emplace_back("seed", std::to_string(cfg.seed));
  m.emplace_back("config_hash", cfg.hash());
  m.emplace_back("wall_time_s", format_number(wall_s));
  m.emplace_back("config", cfg.to_text());
}

}  // namespace

RunOutput run_experiment(ExperimentConfig config) {
  config.resolve();
  const auto start = std::chrono::steady_clock::now();
  RunOutput out;
  switch (config.experiment) {
    case Experiment::kMutualInfo:
      out = RunMutualInfo(config);
      break;
    case Experiment::kDistortionSim:
      out = RunDistortionSim(config);
      break;
    case Experiment::kRateSurface:
      out = RunRateSurface(config);
      break;
    case Experiment::kGradStats:
      out = RunGradStats(config);
      break;
    case Experiment::kMi2d:
      out = RunMi2d(config);
      break;
    case Experiment::kEntropyCompare:
      out = RunEntropyCompare(config);
      break;
    case Experiment::kLaplaceRd:
      out = RunLaplaceRd(config);
      break;
    case Experiment::kLowerBoundSweep:
      out = RunLowerBoundSweep(config);
      break;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Stamp(out.table, config, wall);
  for (auto& [name, table] : out.extra) {
    Stamp(table, config, wall);
    table.metadata().emplace_back("table", name);
  }
  return out;
}

void write_outputs(const RunOutput& out, const std::string& path, bool json) {
  auto emit = [json](const ResultTable& t, std::ostream& os) {
    if (json) {
      t.write_json(os);
    } else {
      t.write_csv(os);
    }
  };
  if (path.empty()) {
    emit(out.table, std::cout);
    for (const auto& [name, table] : out.extra) {
      std::cout << "\n";
      emit(table, std::cout);
    }
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto write_file = [&](const std::filesystem::path& file, const ResultTable& t) {
    std::ofstream os(file, std::ios::binary);
    Require(static_cast<bool>(os), ErrorCode::kConfigError, "cannot write '" + file.string() + "'");
    emit(t, os);
    Require(static_cast<bool>(os), ErrorCode::kNumericalError,
            "write to '" + file.string() + "' failed");
  };
  write_file(p, out.table);
  const std::string ext = json ? ".json" : ".csv";
  for (const auto& [name, table] : out.extra) {
    std::filesystem::path extra = p.parent_path() / (p.stem().string() + "_" + name + ext);
    write_file(extra, table);
  }
}

}  // namespace quantlab
