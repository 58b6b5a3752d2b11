// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synthesize, degrade, sample, evaluate, verify,
// tune-gamma. Exit codes: 0 success, 1 runtime failure or failed checks,
// 2 invalid configuration, 3 unsupported sampler/operator combination.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cminv/config.hpp"
#include "cminv/harness.hpp"
#include "cminv/samplers.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string output_dir;
  std::vector<std::string> overrides;
};

cminv::ExperimentConfig resolve(const GlobalOptions& g) {
  cminv::ExperimentConfig c = g.config.empty() ? cminv::ExperimentConfig{}
                                               : cminv::load_config(g.config);
  if (g.seed) cminv::apply_seed(c, *g.seed);
  cminv::apply_overrides(c, g.overrides);
  if (g.workers) c.workers = *g.workers;
  if (!g.output_dir.empty()) c.output_dir = g.output_dir;
  if (c.workers < 1) throw cminv::ConfigError("--workers must be >= 1");
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cminv: inverse problems with consistency-model samplers"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "INI experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "run seed; dataset, noise and sampler seeds derive from it");
  app.add_option("--workers", g.workers, "worker threads (outputs do not depend on it)");
  app.add_option("--output-dir", g.output_dir, "root of the output layout");
  app.add_option("--set", g.overrides, "override a config key, section.key=value")
      ->take_all();

  std::string filter;
  auto* synthesize = app.add_subcommand("synthesize", "write a seeded synthetic dataset");
  auto* degrade = app.add_subcommand("degrade", "apply the task operator and measurement noise");
  auto* sample = app.add_subcommand("sample", "reconstruct every measurement");
  auto* evaluate = app.add_subcommand("evaluate", "PSNR, SSIM, KID and FID of the samples");
  auto* verify = app.add_subcommand("verify", "run the statistical oracle suite");
  verify->add_option("--filter", filter, "only checks whose name contains this");
  auto* tune = app.add_subcommand("tune-gamma", "grid-search the Inverse-aDDIM gamma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const cminv::ExperimentConfig config = resolve(g);
    if (*synthesize) return cminv::cmd_synthesize(config);
    if (*degrade) return cminv::cmd_degrade(config);
    if (*sample) return cminv::cmd_sample(config);
    if (*evaluate) return cminv::cmd_evaluate(config);
    if (*verify) return cminv::cmd_verify(config, filter, g.seed.value_or(0));
    if (*tune) return cminv::cmd_tune_gamma(config);
  } catch (const cminv::UnsupportedVariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cminv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
