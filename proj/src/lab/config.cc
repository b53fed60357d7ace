// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "quantlab/lab.h"

namespace quantlab {

namespace {

struct ExperimentEntry {
  Experiment experiment;
  std::string_view name;
};

constexpr ExperimentEntry kExperiments[] = {
    {Experiment::kMutualInfo, "mutual-info"},
    {Experiment::kDistortionSim, "distortion-sim"},
    {Experiment::kRateSurface, "rate-surface"},
    {Experiment::kGradStats, "grad-stats"},
    {Experiment::kMi2d, "mi-2d"},
    {Experiment::kEntropyCompare, "entropy-compare"},
    {Experiment::kLaplaceRd, "laplace-rd"},
    {Experiment::kLowerBoundSweep, "lower-bound-sweep"},
};

std::string Trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void ConfigFail(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

double ParseDouble(std::string_view text, const std::string& what) {
  const std::string t = Trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    ConfigFail(what + ": '" + t + "' is not a finite number");
  }
  return v;
}

long long ParseInteger(std::string_view text, const std::string& what) {
  const std::string t = Trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    ConfigFail(what + ": '" + t + "' is not an integer");
  }
  return v;
}

bool ParseBool(std::string_view text, const std::string& what) {
  const std::string t = Trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  ConfigFail(what + ": '" + t + "' is not a boolean");
}

// Splits on commas outside parentheses. Empty text gives an empty list; an
// empty item anywhere else is an error.
std::vector<std::string> SplitTopLevel(std::string_view text) {
  std::vector<std::string> out;
  if (Trim(text).empty()) return out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || (text[i] == ',' && depth == 0)) {
      std::string item = Trim(text.substr(start, i - start));
      if (item.empty()) ConfigFail("empty item in list '" + std::string(text) + "'");
      out.push_back(std::move(item));
      start = i + 1;
    } else if (text[i] == '(') {
      ++depth;
    } else if (text[i] == ')') {
      --depth;
      if (depth < 0) ConfigFail("unbalanced ')' in '" + std::string(text) + "'");
    }
  }
  if (depth != 0) ConfigFail("unbalanced '(' in '" + std::string(text) + "'");
  return out;
}

// Parameter schemas.
std::vector<ParamDef> MakeSchema(Experiment e) {
  switch (e) {
    case Experiment::kMutualInfo:
      return {
          {"calcs", "ROUND, AUN, SR, SUA@5, SUA@10, SRA@5, SRA@10", false,
           "forward calculations; KIND or KIND@alpha"},
          {"mus", "0, 0.125, 0.25, 0.375, 0.5", false, "latent means"},
          {"sigmas", "logspace(0.05, 2, 40)", false, "latent standard deviations"},
      };
    case Experiment::kDistortionSim:
      return {
          {"calcs", "", true, "forward calculations; KIND or KIND@alpha"},
          {"mus", "", true, "latent means"},
          {"sigmas", "", true, "latent standard deviations"},
          {"dim", "1", false, "1, or 2 for the correlated pair"},
          {"rho", "1", false, "correlation of the pair when dim = 2"},
          {"steps", "50000", false, "optimizer steps"},
          {"batch", "256", false, "batch size"},
          {"lr", "0.001", false, "initial step size, decayed 10x at 80% of steps"},
          {"anneal_steps", "0", false, "anneal alpha from 1 to the calc's alpha over this many steps; 0 = fixed"},
          {"eval_samples", "1000000", false, "held-out Monte Carlo samples"},
      };
    case Experiment::kRateSurface:
      return {
          {"calcs", "AUN, SUA@12", false, "forward calculations"},
          {"source_mu", "0", false, "latent mean"},
          {"source_sigma", "0.3", false, "latent standard deviation"},
          {"mu_q", "", false, "model means; empty = 21 points on source_mu +- 0.5"},
          {"sigma_q", "", false, "model scales; empty = 0.05, 0.10, ..., 1.00"},
          {"sigma0", "0", false, "lower bound on the model scale"},
          {"method", "quadrature", false, "quadrature or monte-carlo"},
          {"mc_samples", "200000", false, "samples per grid point for monte-carlo"},
      };
    case Experiment::kGradStats:
      return {
          {"rows", "PGE:AUN, PGE:SUA@5, PGE:SUA@10, STE:SUA@5, STE:SUA@10, STE:SR, STE:SRA@5, STE:SRA@10",
           false, "RULE:CALC pairs"},
          {"sigma_q", "0.3, 1.0", false, "entropy-model scales"},
          {"mu_q", "0", false, "entropy-model mean"},
          {"n_y", "2000", false, "latents drawn from the entropy model"},
          {"n_trials", "1000", false, "estimator draws per latent"},
      };
    case Experiment::kMi2d:
      return {
          {"calcs", "UQ_S, AUN, UQ_I, ROUND", false, "forward calculations"},
          {"sigmas", "0.3, 1.0", false, "latent standard deviations"},
          {"rho", "1", false, "latent correlation"},
      };
    case Experiment::kEntropyCompare:
      return {
          {"mus", "0, 0.25, 0.5", false, "latent means"},
          {"sigmas", "linspace(0.05, 2, 20)", false, "latent standard deviations"},
      };
    case Experiment::kLaplaceRd:
      return {
          {"analyses", "linear, nonlinear", false, "analysis transforms"},
          {"rules", "STE, EP", false, "backward rules"},
          {"lambdas", "1, 1.5, 2, 3, 4", false, "rate-distortion tradeoffs"},
          {"seeds", "3", false, "independent runs per setting"},
          {"steps", "3000", false, "joint-training steps"},
          {"post_steps", "1000", false, "post-training steps"},
          {"batch", "256", false, "batch size"},
          {"lr", "0.01", false, "initial step size"},
          {"b0", "0.08", false, "lower bound on the Laplacian scale during joint training"},
          {"post_b0", "1e-6", false, "lower bound during post-training and evaluation"},
          {"blocks", "2", false, "residual blocks of the nonlinear transforms"},
          {"width", "32", false, "residual block width"},
          {"eval_samples", "200000", false, "held-out samples"},
      };
    case Experiment::kLowerBoundSweep:
      return {
          {"sigma0s", "1e-6, 0.05, 0.11, 0.16, 0.25", false, "joint-training scale bounds"},
          {"lambda", "1", false, "rate-distortion tradeoff"},
          {"seeds", "3", false, "independent runs per bound"},
          {"scale_lo", "0.02", false, "smallest element scale"},
          {"scale_hi", "2", false, "largest element scale"},
          {"steps", "3000", false, "joint-training steps"},
          {"post_steps", "1500", false, "post-training steps"},
          {"batch", "1024", false, "batch size"},
          {"width", "32", false, "synthesis hidden width"},
          {"lr", "0.01", false, "initial step size"},
          {"post_sigma0", "1e-6", false, "scale bound during post-training and evaluation"},
          {"eval_samples", "200000", false, "held-out samples"},
      };
  }
  return {};
}

}  // namespace

std::string_view ExperimentName(Experiment e) {
  for (const auto& entry : kExperiments) {
    if (entry.experiment == e) return entry.name;
  }
  return "?";
}

Experiment ParseExperiment(std::string_view name) {
  for (const auto& entry : kExperiments) {
    if (entry.name == name) return entry.experiment;
  }
  ConfigFail("unknown experiment '" + std::string(name) + "'");
}

const std::vector<Experiment>& AllExperiments() {
  static const std::vector<Experiment> all = [] {
    std::vector<Experiment> v;
    for (const auto& entry : kExperiments) v.push_back(entry.experiment);
    return v;
  }();
  return all;
}

const std::vector<ParamDef>& ParamSchema(Experiment e) {
  static const std::map<Experiment, std::vector<ParamDef>> schemas = [] {
    std::map<Experiment, std::vector<ParamDef>> m;
    for (const auto& entry : kExperiments) m[entry.experiment] = MakeSchema(entry.experiment);
    return m;
  }();
  return schemas.at(e);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonConvergence:
    case ErrorCode::kNumericalError:
    case ErrorCode::kSubdivisionLimit:
    case ErrorCode::kDegenerateInput:
      return 3;
    default:
      return 2;
  }
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  for (const std::string& item : SplitTopLevel(text)) {
    const bool lin = item.rfind("linspace(", 0) == 0;
    const bool log = item.rfind("logspace(", 0) == 0;
    if (!lin && !log) {
      out.push_back(ParseDouble(item, "number list"));
      continue;
    }
    if (item.back() != ')') ConfigFail("malformed range '" + item + "'");
    const std::string inner = item.substr(9, item.size() - 10);
    const std::vector<std::string> args = SplitTopLevel(inner);
    if (args.size() != 3) ConfigFail("'" + item + "' needs (start, stop, count)");
    const double a = ParseDouble(args[0], item);
    const double b = ParseDouble(args[1], item);
    const long long n = ParseInteger(args[2], item);
    if (n < 1) ConfigFail("'" + item + "': count must be >= 1");
    if (log && (a <= 0.0 || b <= 0.0)) ConfigFail("'" + item + "': logspace needs positive ends");
    for (long long i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      if (lin) {
        out.push_back(i == n - 1 ? b : a + t * (b - a));
      } else {
        out.push_back(i == n - 1 ? b : std::exp(std::log(a) + t * (std::log(b) - std::log(a))));
      }
    }
  }
  return out;
}

void ExperimentConfig::resolve() {
  const std::vector<ParamDef>& schema = ParamSchema(experiment);
  for (const auto& [key, value] : params) {
    const bool known = std::any_of(schema.begin(), schema.end(),
                                   [&](const ParamDef& d) { return d.key == key; });
    if (!known) {
      std::string msg = "unknown key '" + key + "' for " + std::string(ExperimentName(experiment)) +
                        "; known keys:";
      for (const ParamDef& d : schema) msg += " " + d.key;
      ConfigFail(msg);
    }
  }
  std::vector<std::string> missing;
  for (const ParamDef& d : schema) {
    auto it = params.find(d.key);
    if (d.required) {
      if (it == params.end() || Trim(it->second).empty()) missing.push_back(d.key);
    } else if (it == params.end()) {
      params[d.key] = d.default_value;
    }
  }
  if (!missing.empty()) {
    std::string msg = std::string(ExperimentName(experiment)) + ": missing required keys:";
    for (const std::string& k : missing) msg += " " + k;
    ConfigFail(msg);
  }
  if (threads < 1) ConfigFail("threads must be >= 1");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "experiment = " << ExperimentName(experiment) << "\n";
  os << "seed = " << seed << "\n";
  if (!output_path.empty()) os << "out = " << output_path << "\n";
  os << "threads = " << threads << "\n";
  os << "json = " << (json ? "true" : "false") << "\n";
  os << "\n[params]\n";
  // Schema order first, then anything else (only present before resolve()).
  const std::vector<ParamDef>& schema = ParamSchema(experiment);
  for (const ParamDef& d : schema) {
    auto it = params.find(d.key);
    if (it != params.end()) os << d.key << " = " << it->second << "\n";
  }
  for (const auto& [key, value] : params) {
    const bool known = std::any_of(schema.begin(), schema.end(),
                                   [&](const ParamDef& d) { return d.key == key; });
    if (!known) os << key << " = " << value << "\n";
  }
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::string text = std::string(ExperimentName(experiment)) + "\n" + std::to_string(seed) + "\n";
  for (const ParamDef& d : ParamSchema(experiment)) {
    auto it = params.find(d.key);
    if (it != params.end()) text += d.key + "=" + it->second + "\n";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::get_string(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) ConfigFail("missing key '" + key + "'");
  return Trim(it->second);
}

double ExperimentConfig::get_double(const std::string& key) const {
  return ParseDouble(get_string(key), key);
}

int ExperimentConfig::get_int(const std::string& key) const {
  const long long v = ParseInteger(get_string(key), key);
  if (v < -2147483647LL || v > 2147483647LL) ConfigFail(key + ": out of range");
  return static_cast<int>(v);
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  return ParseBool(get_string(key), key);
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  try {
    return parse_number_list(get_string(key));
  } catch (const Error& e) {
    ConfigFail(key + ": " + e.what());
  }
}

std::vector<std::string> ExperimentConfig::get_strings(const std::string& key) const {
  return SplitTopLevel(get_string(key));
}

ExperimentConfig parse_config(std::string_view text, std::optional<Experiment> experiment) {
  ExperimentConfig cfg;
  bool have_experiment = false;
  bool in_params = false;
  std::istringstream is{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[params]") ConfigFail(where + ": unknown section " + line);
      in_params = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) ConfigFail(where + ": expected 'key = value'");
    const std::string key = Trim(std::string_view(line).substr(0, eq));
    const std::string value = Trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) ConfigFail(where + ": empty key");
    if (in_params) {
      if (!cfg.params.emplace(key, value).second) ConfigFail(where + ": duplicate key '" + key + "'");
      continue;
    }
    if (key == "experiment") {
      cfg.experiment = ParseExperiment(value);
      have_experiment = true;
    } else if (key == "seed") {
      const long long s = ParseInteger(value, "seed");
      if (s < 0) ConfigFail("seed must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "out") {
      cfg.output_path = value;
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(ParseInteger(value, "threads"));
    } else if (key == "json") {
      cfg.json = ParseBool(value, "json");
    } else {
      ConfigFail(where + ": unknown top-level key '" + key +
                 "' (experiment parameters go under [params])");
    }
  }
  if (experiment) {
    if (have_experiment && cfg.experiment != *experiment) {
      ConfigFail("config is for '" + std::string(ExperimentName(cfg.experiment)) +
                 "' but '" + std::string(ExperimentName(*experiment)) + "' was requested");
    }
    cfg.experiment = *experiment;
  } else if (!have_experiment) {
    ConfigFail("config does not name an experiment");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, std::optional<Experiment> experiment) {
  std::ifstream in(path);
  if (!in) ConfigFail("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), experiment);
}

}  // namespace quantlab
