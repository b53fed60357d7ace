// Copyright 2026 The quantlab Authors
// SPDX-License-Identifier: Apache-2.0

// quantlab <experiment> --config <path> [--seed N] [--out <path>] [--json]
//          [--threads N] [--print-config] [--set key=value]...
// quantlab compare <a.csv> <b.csv> [--abs X] [--rel X] [--se-k K]
//          [--tol column=abs:rel]...
//
// Exit status: 0 success, 1 comparison outside tolerance, 2 configuration
// error, 3 numerical failure. Errors are reported on stderr as one JSON
// object.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "quantlab/error.h"
#include "quantlab/lab.h"

namespace {

using quantlab::Error;
using quantlab::ErrorCode;

int ReportError(ErrorCode code, const std::string& message) {
  const int status = quantlab::exit_code_for(code);
  nlohmann::ordered_json j;
  j["error"] = std::string(quantlab::ErrorCodeName(code));
  j["message"] = message;
  j["exit_code"] = status;
  std::cerr << j.dump() << std::endl;
  return status;
}

struct RunOptions {
  std::string config_path;
  std::optional<long long> seed;
  std::string out;
  bool json = false;
  std::optional<int> threads;
  bool print_config = false;
  std::vector<std::string> sets;
};

int RunExperiment(quantlab::Experiment experiment, const RunOptions& opt) {
  quantlab::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = quantlab::load_config(opt.config_path, experiment);
  } else {
    cfg.experiment = experiment;
  }
  for (const std::string& kv : opt.sets) {
    const std::size_t eq = kv.find('=');
    quantlab::Require(eq != std::string::npos && eq > 0, ErrorCode::kConfigError,
                      "--set expects key=value, got '" + kv + "'");
    cfg.params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (opt.seed) {
    quantlab::Require(*opt.seed >= 0, ErrorCode::kConfigError, "--seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*opt.seed);
  }
  if (!opt.out.empty()) cfg.output_path = opt.out;
  if (opt.json) cfg.json = true;
  if (opt.threads) cfg.threads = *opt.threads;
  cfg.resolve();
  if (opt.print_config) {
    std::cout << cfg.to_text();
    return 0;
  }
  const quantlab::RunOutput out = quantlab::run_experiment(cfg);
  quantlab::write_outputs(out, cfg.output_path, cfg.json);
  if (!cfg.output_path.empty()) {
    std::cerr << "wrote " << out.table.num_rows() << " rows to " << cfg.output_path << "\n";
  }
  return 0;
}

struct CompareCli {
  std::string a;
  std::string b;
  double abs = 0.0;
  double rel = 0.0;
  double se_k = 0.0;
  std::vector<std::string> tols;
  bool json = false;
};

int RunCompare(const CompareCli& c) {
  quantlab::CompareOptions options;
  options.fallback = {c.abs, c.rel};
  options.se_multiple = c.se_k;
  for (const std::string& t : c.tols) {
    const std::size_t eq = t.find('=');
    const std::size_t colon = t.find(':', eq == std::string::npos ? 0 : eq);
    quantlab::Require(eq != std::string::npos && colon != std::string::npos,
                      ErrorCode::kConfigError, "--tol expects column=abs:rel, got '" + t + "'");
    try {
      options.tolerances[t.substr(0, eq)] = {std::stod(t.substr(eq + 1, colon - eq - 1)),
                                             std::stod(t.substr(colon + 1))};
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, "--tol: bad numbers in '" + t + "'");
    }
  }
  const quantlab::ResultTable a = quantlab::ResultTable::read_csv_file(c.a);
  const quantlab::ResultTable b = quantlab::ResultTable::read_csv_file(c.b);
  const quantlab::CompareReport report = quantlab::compare_tables(a, b, options);
  const quantlab::ResultTable table = quantlab::report_table(report);
  if (c.json) {
    table.write_json(std::cout);
  } else {
    table.write_csv(std::cout);
  }
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantlab: quantization-surrogate experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(quantlab::kToolVersion));

  RunOptions run;
  std::optional<quantlab::Experiment> chosen;
  for (quantlab::Experiment e : quantlab::AllExperiments()) {
    const std::string name(quantlab::ExperimentName(e));
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", run.config_path, "config file");
    sub->add_option("--seed", run.seed, "root seed (overrides the config)");
    sub->add_option("--out", run.out, "output path; stdout when absent");
    sub->add_flag("--json", run.json, "write JSON instead of CSV");
    sub->add_option("--threads", run.threads, "worker threads");
    sub->add_flag("--print-config", run.print_config, "print the resolved config and exit");
    sub->add_option("--set", run.sets, "override a parameter: key=value");
    sub->callback([&chosen, e] { chosen = e; });
  }

  CompareCli cmp;
  bool compare_chosen = false;
  CLI::App* compare = app.add_subcommand("compare", "compare two result tables");
  compare->add_option("a", cmp.a, "first CSV")->required();
  compare->add_option("b", cmp.b, "second CSV")->required();
  compare->add_option("--abs", cmp.abs, "absolute tolerance for every numeric column");
  compare->add_option("--rel", cmp.rel, "relative tolerance for every numeric column");
  compare->add_option("--se-k", cmp.se_k, "also pass within K combined standard errors");
  compare->add_option("--tol", cmp.tols, "per-column tolerance: column=abs:rel");
  compare->add_flag("--json", cmp.json, "write the report as JSON");
  compare->callback([&compare_chosen] { compare_chosen = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError(ErrorCode::kConfigError, e.what());
  }

  try {
    if (compare_chosen) return RunCompare(cmp);
    return RunExperiment(*chosen, run);
  } catch (const Error& e) {
    return ReportError(e.code(), e.what());
  } catch (const std::exception& e) {
    return ReportError(ErrorCode::kNumericalError, e.what());
  }
}
