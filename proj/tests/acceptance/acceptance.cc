// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "quantlab/backward.h"
#include "quantlab/entropy_model.h"
#include "quantlab/error.h"
#include "quantlab/infotheory.h"
#include "quantlab/lab.h"
#include "quantlab/mlp.h"
#include "quantlab/numerics.h"
#include "quantlab/sources.h"
#include "quantlab/surrogates.h"
#include "quantlab/training.h"

namespace quantlab {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Appends a named check to the outcome.
void Check(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += (ok ? "" : "FAILED ") + what;
}

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

double RelErr(double g, double fd) { return std::abs(g - fd) / std::max(1.0, std::abs(fd)); }

// ---------------------------------------------------------------------------

Outcome GradientCorrectness() {
  Outcome o;
  const int probes = 100;
  double mlp_worst = 0.0;
  for (Activation a : {Activation::kSoftplus, Activation::kIdentity, Activation::kRelu}) {
    Mlp net({2, 32, 32, 2}, a, {101, static_cast<std::uint64_t>(a)});
    Rng rng({102, 0});
    Eigen::MatrixXd x(2, 16);
    for (int j = 0; j < x.cols(); ++j) {
      for (int i = 0; i < x.rows(); ++i) x(i, j) = rng.normal();
    }
    mlp_worst = std::max(mlp_worst, mlp_gradient_check(net, x, probes, {103, 0}));
  }
  Check(o, mlp_worst < 1e-5, Fmt("mlp max rel err %.2e", mlp_worst));

  // PGE through AUN and SUA with frozen noise, loss R(t) of a Gaussian model.
  const GaussianEntropyModel model(0.0, 0.4);
  const LossGrad rate_grad = [&](std::span<const double> t) {
    return std::vector<double>{model.rate_bits_deriv(t[0])};
  };
  double pge_worst = 0.0;
  Rng rng({104, 0});
  const double h = 1e-6;
  for (const SurrogateSpec& spec :
       {SurrogateSpec::Aun(), SurrogateSpec::Sua(5), SurrogateSpec::Sua(10), SurrogateSpec::SuaN(5)}) {
    for (int t = 0; t < probes; ++t) {
      const double y = 1.5 * rng.normal();
      const double u = 0.96 * rng.uniform_centered();
      const std::vector<double> yy{y};
      const double g = grad_pge(spec, rate_grad, yy, {{u}})[0];
      const double fd =
          (model.rate_bits(forward_scalar(spec, y + h, u)) - model.rate_bits(forward_scalar(spec, y - h, u))) /
          (2 * h);
      pge_worst = std::max(pge_worst, RelErr(g, fd));
    }
  }
  Check(o, pge_worst < 1e-5, Fmt("pge max rel err %.2e", pge_worst));

  // Partial stop-gradient routing: without the flag both partials match
  // differences; with it the value path is unchanged and d/dmu is blocked.
  double sg_worst = 0.0;
  bool routed = true;
  for (int t = 0; t < probes; ++t) {
    const double y = 1.5 * rng.normal();
    const double mu = rng.uniform_centered();
    const double u = 0.96 * rng.uniform_centered();
    const double alpha = 1.0 + 9.0 * rng.uniform01();
    auto f = [&](double yy, double mm) {
      return forward_zero_center_partial_sg(yy, mm, alpha, u, false).value;
    };
    const ZeroCenterValue off = forward_zero_center_partial_sg(y, mu, alpha, u, false);
    const ZeroCenterValue on = forward_zero_center_partial_sg(y, mu, alpha, u, true);
    sg_worst = std::max(sg_worst, RelErr(off.d_y, (f(y + h, mu) - f(y - h, mu)) / (2 * h)));
    sg_worst = std::max(sg_worst, RelErr(off.d_mu, (f(y, mu + h) - f(y, mu - h)) / (2 * h)));
    routed = routed && on.d_mu == 0.0 && on.d_y == off.d_y && on.value == off.value;
  }
  Check(o, sg_worst < 1e-5 && routed, Fmt("stop-gradient max rel err %.2e", sg_worst));
  return o;
}

Outcome EpIdentities() {
  Outcome o;
  // (y + 1/2)^2 - (y - 1/2)^2 = 2y holds exactly in real arithmetic; in
  // doubles the two squares each carry half an ulp of y^2.
  double worst_scalar = 0.0;
  Rng rng({111, 0});
  for (int t = 0; t < 1000; ++t) {
    const double y = 4.0 * rng.normal();
    const double g = grad_ep_scalar([](double v) { return v * v; }, y);
    worst_scalar = std::max(worst_scalar, std::abs(g - 2.0 * y) / std::max(1.0, y * y));
  }
  Check(o, worst_scalar <= 4 * std::numeric_limits<double>::epsilon(),
        Fmt("grad_ep_scalar(t^2) vs 2y: max err %.1f eps*max(1,y^2)", worst_scalar / std::numeric_limits<double>::epsilon()));

  double worst = 0.0;
  for (double sq : {0.3, 1.0}) {
    const GaussianEntropyModel m(0.0, sq);
    const ScalarFn rate = [&](double v) { return m.rate_bits(v); };
    const VectorLoss vrate = [&](std::span<const double> v) { return m.rate_bits(v[0]); };
    for (double alpha : {2.0, 5.0, 10.0}) {
      for (double y = -1.9; y < 2.0; y += 0.137) {
        const std::vector<double> yy{y};
        worst = std::max(worst, std::abs(grad_ep_rate_sua(y, alpha, rate) -
                                         grad_ep_vector_bruteforce(vrate, yy, SurrogateSpec::Sua(alpha))[0]));
        worst = std::max(worst, std::abs(grad_ep_rate_sra(y, alpha, rate) -
                                         grad_ep_vector_bruteforce(vrate, yy, SurrogateSpec::Sra(alpha))[0]));
      }
    }
  }
  Check(o, worst < 1e-8, Fmt("max |EP - brute force| %.2e", worst));

  // Independent oracle: five-point differences of the expected loss, by
  // quadrature over u for SUA and by the two-point mixture for SRA.
  double worst_fd = 0.0;
  Quadrature q;
  q.abs_tol = 1e-13;
  q.rel_tol = 1e-13;
  q.max_subdivisions = 200000;
  const double h = 1e-4;
  for (double sq : {0.3, 1.0}) {
    const GaussianEntropyModel m(0.0, sq);
    const ScalarFn rate = [&](double v) { return m.rate_bits(v); };
    for (double alpha : {2.0, 5.0, 10.0}) {
      auto sua = [&](double y) {
        return integrate([&](double u) { return rate(forward_scalar(SurrogateSpec::Sua(alpha), y, u)); }, -0.5, 0.5, q);
      };
      auto sra = [&](double y) {
        const double p = sra_ceil_prob(y, alpha);
        const double f = std::floor(y);
        return (1.0 - p) * rate(f) + p * rate(f + 1.0);
      };
      for (double y = -1.9; y < 2.0; y += 0.137) {
        auto fd5 = [&](const auto& e) {
          return (e(y - 2 * h) - 8 * e(y - h) + 8 * e(y + h) - e(y + 2 * h)) / (12 * h);
        };
        worst_fd = std::max(worst_fd, std::abs(grad_ep_rate_sua(y, alpha, rate) - fd5(sua)));
        worst_fd = std::max(worst_fd, std::abs(grad_ep_rate_sra(y, alpha, rate) - fd5(sra)));
      }
    }
  }
  Check(o, worst_fd < 1e-8, Fmt("max |EP - d/dy E[R]| %.2e", worst_fd));
  return o;
}

GradStats GradRowStats(GradRule rule, const SurrogateSpec& spec, double sigma_q, int n_y, int n_trials,
                      Seed seed) {
  const GaussianEntropyModel model(0.0, sigma_q, 0.0);
  const ScalarFn loss = [&](double v) { return model.rate_bits(v); };
  const ScalarFn deriv = [&](double v) { return model.rate_bits_deriv(v); };
  return measure_grad_stats({spec, rule, 1}, loss, deriv, Gaussian1D(0.0, sigma_q), n_y, n_trials, seed);
}

Outcome Unbiasedness() {
  Outcome o;
  std::uint64_t k = 0;
  for (double sq : {0.3, 1.0}) {
    for (const SurrogateSpec& spec : {SurrogateSpec::Aun(), SurrogateSpec::Sua(5), SurrogateSpec::Sua(10)}) {
      // 1000 latents x 100 draws = 1e5 draws.
      const GradStats g = GradRowStats(GradRule::kPge, spec, sq, 1000, 100, {121, ++k});
      Check(o, std::abs(g.signed_bias) <= 3 * g.signed_bias_se,
            "PGE " + spec.label() + Fmt(" sq=%.1f: mean dev %.2e (3SE %.2e)", sq, g.signed_bias,
                                        3 * g.signed_bias_se));
    }
  }
  return o;
}

Outcome GradientOrderings() {
  Outcome o;
  const int n_y = 10000;
  const int n_trials = 1000;
  struct Row {
    GradRule rule;
    SurrogateSpec spec;
    GradStats g[2];
  };
  std::vector<Row> rows{{GradRule::kPge, SurrogateSpec::Aun(), {}},    {GradRule::kPge, SurrogateSpec::Sua(5), {}},
                        {GradRule::kPge, SurrogateSpec::Sua(10), {}},  {GradRule::kSte, SurrogateSpec::Sua(5), {}},
                        {GradRule::kSte, SurrogateSpec::Sua(10), {}},  {GradRule::kSte, SurrogateSpec::Sr(), {}}};
  const double sqs[2] = {0.3, 1.0};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int s = 0; s < 2; ++s) {
      rows[r].g[s] = GradRowStats(rows[r].rule, rows[r].spec, sqs[s], n_y, n_trials, Seed{131, 0}.derive(r * 2 + s));
    }
  }
  auto var_gt = [](const GradStats& a, const GradStats& b) {
    return a.variance - 3 * a.variance_se > b.variance + 3 * b.variance_se;
  };
  auto bias_gt = [](const GradStats& a, const GradStats& b) {
    return a.bias - 3 * a.bias_se > b.bias + 3 * b.bias_se;
  };
  auto bias_pos = [](const GradStats& a) { return a.bias - 3 * a.bias_se > a.bias_noise_floor; };
  for (int s = 0; s < 2; ++s) {
    const std::string at = Fmt(" sq=%.1f", sqs[s]);
    Check(o, var_gt(rows[2].g[s], rows[1].g[s]) && var_gt(rows[1].g[s], rows[0].g[s]),
          "var PGE SUA10>SUA5>AUN" + at +
              Fmt(" (%.3g > %.3g > %.3g)", rows[2].g[s].variance, rows[1].g[s].variance, rows[0].g[s].variance));
    Check(o, bias_gt(rows[4].g[s], rows[3].g[s]) && bias_pos(rows[3].g[s]),
          "bias STE SUA10>SUA5>0" + at +
              Fmt(" (%.3g > %.3g, floor %.3g)", rows[4].g[s].bias, rows[3].g[s].bias, rows[3].g[s].bias_noise_floor));
    Check(o, bias_pos(rows[5].g[s]),
          "bias STE SR>0" + at + Fmt(" (%.3g, floor %.3g)", rows[5].g[s].bias, rows[5].g[s].bias_noise_floor));
  }
  bool var_scale = true;
  for (const Row& r : rows) {
    // Zero-variance rows (none here) would trivially fail the strict check.
    var_scale = var_scale && var_gt(r.g[0], r.g[1]);
  }
  Check(o, var_scale, "every var(sq=1.0) < var(sq=0.3)");
  return o;
}

Outcome MutualInformationLimits() {
  Outcome o;
  const double aun = mi_aun(Gaussian1D(0, 1));
  const double round1 = mi_rounding(Gaussian1D(0, 1));
  Check(o, std::abs(aun - round1) < 0.05, Fmt("|aun-round| %.4f at sigma=1", std::abs(aun - round1)));
  const double half = mi_rounding(Gaussian1D(0.5, 1e-6));
  Check(o, std::abs(half - 1.0) < 0.01, Fmt("round(mu=.5, sigma->0) %.6f", half));
  const double sr = mi_sr(Gaussian1D(0, 1));
  Check(o, round1 - sr >= 0.05, Fmt("round-sr %.4f", round1 - sr));
  const double sua = mi_sua(Gaussian1D(0, 0.5), 50.0);
  const double r5 = mi_rounding(Gaussian1D(0, 0.5));
  Check(o, std::abs(sua - r5) < 0.02, Fmt("|sua50-round| %.2e at sigma=.5", std::abs(sua - r5)));
  return o;
}

Outcome Mi2dIdentity() {
  Outcome o;
  for (double sigma : {0.3, 1.0}) {
    const double uqs = mi_2d_correlated(SurrogateKind::kUqS, sigma, 1.0);
    const double scalar = mi_aun(Gaussian1D(0, sigma));
    const double aun = mi_2d_correlated(SurrogateKind::kAun, sigma, 1.0);
    const double uqi = mi_2d_correlated(SurrogateKind::kUqI, sigma, 1.0);
    Check(o, std::abs(uqs - scalar) < 1e-6, Fmt("sigma=%.1f |uqs-aun1d| %.1e", sigma, std::abs(uqs - scalar)));
    Check(o, aun >= uqs - 1e-6 && uqi >= uqs - 1e-6,
          Fmt("sigma=%.1f aun %.4f, uqi %.4f >= uqs %.4f", sigma, aun, uqi, uqs));
  }
  return o;
}

Outcome ZeroCenterChain() {
  Outcome o;
  double worst_h = 1e9;
  double worst_r = 1e9;
  for (double mu : {0.0, 0.25, 0.5}) {
    for (double sigma : parse_number_list("linspace(0.05, 2, 20)")) {
      const EntropyPair e = entropy_compare(mu, sigma);
      const double r = expected_rate(SurrogateSpec::Aun(), Gaussian1D(mu, sigma), GaussianEntropyModel(mu, sigma)).bits;
      worst_h = std::min(worst_h, e.h_cont - e.h_disc);
      worst_r = std::min(worst_r, r - e.h_cont);
    }
  }
  Check(o, worst_h >= -1e-6, Fmt("min H(Y~)-H(round) %.3e", worst_h));
  Check(o, worst_r >= -1e-6, Fmt("min R(Y~)-H(Y~) %.3e", worst_r));
  return o;
}

TrainConfig SimConfig(int steps, std::uint64_t point) {
  TrainConfig c;
  c.steps = steps;
  c.batch = 256;
  c.seed = Seed{141, 0}.derive(point);
  return c;
}

Outcome DistortionSimulation() {
  Outcome o;
  const DistortionSource narrow{1, 0.0, 0.3, 0.0};
  const DistortionResult aun = train_synthesis(SurrogateSpec::Aun(), narrow, SimConfig(3000, 0), 1000000);
  const double bayes = bayes_distortion(SurrogateKind::kAun, Gaussian1D(0.0, 0.3));
  const double ratio = aun.d_tilde.mean / bayes;
  Check(o, std::abs(ratio - 1.0) <= 0.05, Fmt("AUN D/D_bayes %.4f", ratio));

  const DistortionResult sha = train_synthesis(SurrogateSpec::Sha(5), narrow, SimConfig(2000, 0), 1000000);
  Check(o, sha.delta_d_rel <= -0.9, Fmt("SHA@5 delta_D_rel %.4f", sha.delta_d_rel));

  const DistortionResult wide = train_synthesis(SurrogateSpec::Aun(), {1, 0.25, 1.0, 0.0}, SimConfig(3000, 1), 1000000);
  const DistortionResult tight = train_synthesis(SurrogateSpec::Aun(), {1, 0.25, 0.1, 0.0}, SimConfig(3000, 2), 1000000);
  Check(o, std::abs(wide.delta_d_rel) < std::abs(tight.delta_d_rel),
        Fmt("|dD_rel| sigma=1 %.4f < sigma=.1 %.4f", std::abs(wide.delta_d_rel), std::abs(tight.delta_d_rel)));
  return o;
}

double MaxAbs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Outcome RateSurfaces() {
  Outcome o;
  const Gaussian1D src(0.0, 0.3);
  const SurfaceGrid grid = SurfaceGrid::Default(0.0);
  const RateSurface aun = rate_surface(SurrogateSpec::Aun(), src, grid);
  const RateSurface sua = rate_surface(SurrogateSpec::Sua(12), src, grid);
  const std::size_t mu0 = static_cast<std::size_t>(
      std::find_if(grid.mu_grid.begin(), grid.mu_grid.end(), [](double m) { return std::abs(m) < 1e-12; }) -
      grid.mu_grid.begin());
  const double small = aun.at(aun.delta_r, mu0, 0);
  const double large = aun.at(aun.delta_r, mu0, grid.sigma_grid.size() - 1);
  Check(o, std::abs(small) > std::abs(large) + 0.5,
        Fmt("|dR(sq=.05)| %.3f > |dR(sq=1)| %.3f + 0.5", std::abs(small), std::abs(large)));
  Check(o, MaxAbs(sua.delta_r) < MaxAbs(aun.delta_r),
        Fmt("max|dR| SUA@12 %.3f < AUN %.3f", MaxAbs(sua.delta_r), MaxAbs(aun.delta_r)));
  const double dmu = grid.mu_grid[1] - grid.mu_grid[0];
  const double dsigma = grid.sigma_grid[1] - grid.sigma_grid[0];
  Check(o, std::abs(aun.q_star_mu - src.mu) <= dmu + 1e-12 && std::abs(aun.q_star_sigma - src.sigma) <= dsigma + 1e-12,
        Fmt("AUN q* (%.3f, %.3f) vs (0, 0.3)", aun.q_star_mu, aun.q_star_sigma));
  return o;
}

RunOutput Run(const std::string& text) { return run_experiment(parse_config(text)); }

const ResultTable& Extra(const RunOutput& out, const std::string& name) {
  for (const auto& [n, t] : out.extra) {
    if (n == name) return t;
  }
  throw Error(ErrorCode::kConfigError, "missing table " + name);
}

Outcome LaplaceRd() {
  Outcome o;
  const RunOutput out = Run("experiment = laplace-rd\nseed = 7\n");
  const ResultTable& paired = Extra(out, "paired");
  const ResultTable& curve = Extra(out, "curve");
  for (std::size_t i = 0; i < paired.num_rows(); ++i) {
    if (paired.text(i, "analysis") != "nonlinear" || paired.number(i, "lambda") != 1.0) continue;
    const double d = paired.number(i, "loss_diff");
    const double se = paired.number(i, "loss_diff_se");
    Check(o, d < -3 * se,
          Fmt("nonlinear lambda=1 EP-STE loss %.4f (3SE %.4f; STE %.4f, EP %.4f)", d, 3 * se,
              paired.number(i, "loss_ste"), paired.number(i, "loss_ep")));
  }
  bool linear_seen = false;
  for (std::size_t i = 0; i < curve.num_rows(); ++i) {
    if (curve.text(i, "analysis") != "linear") continue;
    linear_seen = true;
    const double g = curve.number(i, "rate_gap_bits");
    const double se = curve.number(i, "rate_gap_bits_se");
    Check(o, std::abs(g) <= 3 * se || std::abs(g) <= 0.05,
          Fmt("linear STE-EP rate gap at matched D %.4f bits (3SE %.4f)", g, 3 * se));
  }
  Check(o, linear_seen, "linear curves overlap");
  return o;
}

Outcome LowerBoundSweep() {
  Outcome o;
  const RunOutput out = Run("experiment = lower-bound-sweep\nseed = 11\n");
  const ResultTable& s = Extra(out, "summary");
  std::size_t best = 0;
  std::string losses;
  for (std::size_t i = 0; i < s.num_rows(); ++i) {
    if (s.number(i, "loss") < s.number(best, "loss")) best = i;
    losses += Fmt(" %.3g:%.4f", s.number(i, "sigma0"), s.number(i, "loss"));
  }
  const double arg = s.number(best, "sigma0");
  Check(o, arg >= 0.05 && arg <= 0.16, "argmin sigma0 " + Fmt("%.3g", arg) + " (loss" + losses + ")");
  return o;
}

Outcome Reproducibility() {
  Outcome o;
  const std::vector<std::string> configs{
      "experiment = mutual-info\n[params]\nsigmas = 0.1, 0.7\n",
      "experiment = distortion-sim\n[params]\ncalcs = AUN, SUA@5\nmus = 0.25\nsigmas = 0.5\nsteps = 100\n"
      "eval_samples = 5000\ndim = 2\nrho = 0.5\n",
      "experiment = rate-surface\n[params]\ncalcs = SR\nmu_q = 0, 0.2\nsigma_q = 0.3, 0.6\n"
      "method = monte-carlo\nmc_samples = 2000\n",
      "experiment = grad-stats\n[params]\nrows = PGE:SUA@5, STE:SRA@5\nn_y = 100\nn_trials = 50\n",
      "experiment = mi-2d\n[params]\nsigmas = 0.5\n",
      "experiment = entropy-compare\n[params]\nsigmas = 0.2, 1\n",
      "experiment = laplace-rd\n[params]\nlambdas = 2\nseeds = 2\nsteps = 500\npost_steps = 200\n"
      "eval_samples = 2000\n",
      "experiment = lower-bound-sweep\n[params]\nsigma0s = 0.11\nseeds = 2\nsteps = 500\npost_steps = 200\n"
      "eval_samples = 2000\n",
  };
  for (const std::string& base : configs) {
    ExperimentConfig cfg = parse_config("seed = 5\n" + base);
    const std::string name(ExperimentName(cfg.experiment));
    const RunOutput a = run_experiment(cfg);
    cfg.threads = 2;
    const RunOutput b = run_experiment(cfg);
    bool same = a.table.csv_body() == b.table.csv_body() && a.extra.size() == b.extra.size();
    for (std::size_t i = 0; same && i < a.extra.size(); ++i) {
      same = a.extra[i].second.csv_body() == b.extra[i].second.csv_body();
    }
    Check(o, same, name);
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace quantlab

int main(int argc, char** argv) {
  using namespace quantlab;
  const std::vector<Criterion> all{
      {1, "gradient-correctness", GradientCorrectness},
      {2, "ep-identities", EpIdentities},
      {3, "pge-unbiased", Unbiasedness},
      {4, "grad-orderings", GradientOrderings},
      {5, "mi-limits", MutualInformationLimits},
      {6, "mi-2d-identity", Mi2dIdentity},
      {7, "zero-center-chain", ZeroCenterChain},
      {8, "distortion-sim", DistortionSimulation},
      {9, "rate-surfaces", RateSurfaces},
      {10, "laplace-rd", LaplaceRd},
      {11, "lower-bound-sweep", LowerBoundSweep},
      {12, "reproducibility", Reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
