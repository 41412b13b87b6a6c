#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "gdlab/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitAuditViolation = 3;
constexpr int kExitNumericFailure = 4;

struct CommonArgs {
  std::string config_path;
  long long seed = -1;
  std::string out_dir;
  unsigned workers = 0;
  bool override_eta_limit = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config JSON (or a run manifest)")
      ->required();
  sub->add_option("--seed", args.seed, "override master_seed");
  sub->add_option("--out", args.out_dir, "override output directory");
  sub->add_option("--workers", args.workers, "worker threads (results are worker-count invariant)");
  sub->add_flag("--override-eta-limit", args.override_eta_limit,
                "allow step sizes above 1/(2 rho)");
}

nlohmann::json load_json(const std::string& path) {
  return nlohmann::json::parse(gdlab::read_text_file(path));
}

gdlab::ExperimentConfig configure(const nlohmann::json& doc, const CommonArgs& args) {
  gdlab::ExperimentConfig cfg = gdlab::config_from_json(doc);
  if (args.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.override_eta_limit) cfg.gd.override_eta_limit = true;
  return cfg;
}

void print_reports(const gdlab::RunArtifact& artifact) {
  std::printf("%-44s %14s %14s  %s\n", "report", "measured", "bound", "verdict");
  for (const auto& r : artifact.reports)
    std::printf("%-44s %14.6g %14.6g  %s\n", r.name.c_str(), r.measured, r.bound,
                gdlab::verdict_name(r.verdict).c_str());
}

int artifact_exit_code(const gdlab::RunArtifact& artifact) {
  if (artifact.failed) return kExitNumericFailure;
  if (artifact.any_violation) return kExitAuditViolation;
  return kExitOk;
}

int cmd_run(const CommonArgs& args) {
  gdlab::ExperimentConfig cfg;
  try {
    cfg = configure(load_json(args.config_path), args);
    gdlab::validate_config(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }
  const gdlab::RunArtifact artifact = gdlab::run(cfg);
  print_reports(artifact);
  if (artifact.failed) std::fprintf(stderr, "run failed: %s\n", artifact.failure.c_str());
  std::printf("artifacts: %s\n", artifact.output_dir.string().c_str());
  return artifact_exit_code(artifact);
}

int cmd_sweep(const CommonArgs& args) {
  std::vector<gdlab::ExperimentConfig> configs;
  std::filesystem::path index_dir;
  try {
    const nlohmann::json doc = load_json(args.config_path);
    gdlab::detail::require_keys(doc, {"scenario", "runs", "output_dir", "master_seed"}, "sweep");
    if (doc.value("scenario", std::string()) != "sweep")
      throw std::invalid_argument("sweep config must set scenario = \"sweep\"");
    index_dir = std::filesystem::path(
        args.out_dir.empty() ? doc.value("output_dir", std::string("sweep_out")) : args.out_dir);
    const auto& runs = doc.at("runs");
    if (!runs.is_array()) throw std::invalid_argument("sweep: runs must be an array");
    std::size_t idx = 0;
    for (const auto& run_doc : runs) {
      CommonArgs per_run = args;
      per_run.out_dir.clear();
      gdlab::ExperimentConfig cfg = configure(run_doc, per_run);
      if (!run_doc.contains("output_dir"))
        cfg.output_dir = (index_dir / ("run_" + std::to_string(idx))).string();
      gdlab::validate_config(cfg);
      configs.push_back(std::move(cfg));
      ++idx;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }
  const auto artifacts = gdlab::sweep(configs, index_dir);
  int worst = kExitOk;
  for (const auto& a : artifacts) worst = std::max(worst, artifact_exit_code(a));
  std::printf("sweep index: %s\n", (index_dir / "index.json").string().c_str());
  return worst;
}

int cmd_validate(const CommonArgs& args) {
  try {
    gdlab::ExperimentConfig cfg = configure(load_json(args.config_path), args);
    gdlab::validate_config(cfg);
    std::printf("config ok: scenario=%s\n", gdlab::scenario_name(cfg.scenario).c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }
}

int cmd_show_constants(const CommonArgs& args) {
  try {
    gdlab::ExperimentConfig cfg = configure(load_json(args.config_path), args);
    const auto& act = gdlab::activation_by_name(cfg.net.activation);
    gdlab::ProblemConstants pc;
    pc.c_x = cfg.has_data ? cfg.data.c_x : 1.0;
    pc.c_y = cfg.has_data ? cfg.data.c_y : 1.0;
    pc.c_0 = 0.5 * pc.c_y * pc.c_y;  // zero-init ceiling; realised value lands in the manifest
    const double horizon = double(cfg.gd.t_max);
    const auto k = gdlab::compute_constants(pc, act, cfg.net.m, cfg.gd.eta, horizon);
    std::printf("activation %s: b_phi=%.17g b_phi'=%.17g b_phi''=%.17g\n", act.name.c_str(),
                act.b_phi, act.b_phi_prime, act.b_phi_double_prime);
    std::printf("constants at (c_x=%g, c_y=%g, c_0=%g, m=%zu, eta=%g, t=%g):\n", pc.c_x, pc.c_y,
                pc.c_0, cfg.net.m, cfg.gd.eta, horizon);
    std::printf("  rho        = %.10g\n", k.rho);
    std::printf("  eta_limit  = %.10g\n", 1.0 / (2.0 * k.rho));
    std::printf("  epsilon    = %.10g\n", k.epsilon);
    std::printf("  b          = %.10g\n", k.b);
    std::printf("  b_tilde    = %.10g\n", k.b_tilde);
    std::printf("  width_min  = %.10g\n", k.width_min);
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdlab: full-batch GD on shallow networks with stability and risk-bound audits"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, validate_args, show_args;
  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment config");
  add_common(run_cmd, run_args);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a list of configs with per-run isolation");
  add_common(sweep_cmd, sweep_args);
  CLI::App* validate_cmd = app.add_subcommand("validate-config", "parse and validate a config");
  add_common(validate_cmd, validate_args);
  CLI::App* show_cmd = app.add_subcommand("show-constants", "print the closed-form constants");
  add_common(show_cmd, show_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    if (validate_cmd->parsed()) return cmd_validate(validate_args);
    if (show_cmd->parsed()) return cmd_show_constants(show_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumericFailure;
  }
  return kExitConfigError;
}
