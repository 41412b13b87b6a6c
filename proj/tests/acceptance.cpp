// Acceptance suite: ten scenario-level criteria, one pass/fail line each.
// Usage: gdlab_acceptance <configs_dir> [scratch_dir]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gdlab/experiments.hpp"
#include "support/oracles.hpp"

using namespace gdlab;
namespace fs = std::filesystem;

namespace {

fs::path g_configs;
fs::path g_scratch;

struct Outcome {
  bool passed = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  o.passed = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += why;
}

ExperimentConfig load_config(const std::string& name, std::uint64_t seed_override,
                             const std::string& out_leaf) {
  const nlohmann::json doc = nlohmann::json::parse(read_text_file(g_configs / name));
  ExperimentConfig cfg = config_from_json(doc);
  if (seed_override) cfg.master_seed = seed_override;
  cfg.output_dir = (g_scratch / out_leaf).string();
  cfg.workers = 1;
  validate_config(cfg);
  return cfg;
}

const BoundReport* find_report(const RunArtifact& a, const std::string& name) {
  for (const auto& r : a.reports)
    if (r.name == name) return &r;
  return nullptr;
}

void expect_report(Outcome& o, const RunArtifact& a, const std::string& name,
                   bool allow_mc_tolerance = true) {
  const BoundReport* r = find_report(a, name);
  if (!r) {
    fail(o, "missing report " + name);
    return;
  }
  const bool ok = r->verdict == BoundReport::Verdict::holds ||
                  (allow_mc_tolerance && r->verdict == BoundReport::Verdict::holds_at_mc_tolerance);
  if (!ok) {
    std::ostringstream os;
    os << name << " " << verdict_name(r->verdict) << " (measured " << r->measured << " vs bound "
       << r->bound << ")";
    fail(o, os.str());
  }
}

// 1. directional finite differences match analytic gradients on 100 instances
Outcome criterion_gradients() {
  Outcome o;
  RngStream rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + trial % 9;
    const std::size_t m = 1 + (7 * trial) % 100;
    const ShallowNet net = oracle::random_net(
        d, m, 9000 + trial, trial % 2 ? sigmoid_activation() : tanh_activation());
    const Dataset data = oracle::random_dataset(4, d, 5000 + trial);
    const Matrix grad = grad_empirical_risk(net, data);
    Matrix v(d, m);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    scale(v.flat(), 1.0 / frobenius_norm(v));
    const double fd = oracle::fd_directional_derivative(net, data, v, 1e-5);
    const double analytic = frobenius_dot(grad, v);
    if (std::abs(fd - analytic) > 1e-5 * std::max(std::abs(analytic), 1e-6)) {
      std::ostringstream os;
      os << "trial " << trial << ": fd " << fd << " vs analytic " << analytic;
      fail(o, os.str());
      break;
    }
  }
  return o;
}

// 2. Hessian symmetry, HVP/dense agreement, spectral ceiling and curvature floor
Outcome criterion_hessian() {
  Outcome o;
  RngStream rng(777);
  for (int trial = 0; trial < 100 && o.passed; ++trial) {
    const std::size_t d = 2 + trial % 5;
    const std::size_t m = 1 + (trial * 11) % (200 / d);
    const ShallowNet base = oracle::random_net(
        d, m, 100 + trial, trial % 2 ? sigmoid_activation() : tanh_activation(), 0.8);
    const Dataset data = oracle::random_dataset(6, d, 300 + trial, 1.0, 2.0);
    const Matrix h = dense_hessian(base, data);
    if (max_asymmetry(h) > 1e-10) fail(o, "hessian asymmetry at trial " + std::to_string(trial));
    for (int probe = 0; probe < 3; ++probe) {
      Matrix v(d, m);
      for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
      const Matrix hv = hessian_vector_product(base, data, v);
      Vector vflat(v.flat().begin(), v.flat().end()), dense_hv(d * m);
      matvec(h, vflat, dense_hv);
      for (std::size_t i = 0; i < d * m; ++i)
        if (std::abs(dense_hv[i] - hv.flat()[i]) > 1e-9) {
          fail(o, "hvp/dense gap at trial " + std::to_string(trial));
          break;
        }
    }
    ShallowNet moved = base;
    RngStream step_rng(900 + trial);
    for (std::size_t i = 0; i < moved.w.size(); ++i) moved.w.data()[i] += 0.5 * step_rng.normal();
    ProblemConstants pc;
    pc.c_x = 1.0;
    pc.c_y = 2.0;
    pc.c_0 = std::max(1.0, realized_loss_bound(base, data));
    const auto audit = spectral_audit(moved, base, data, pc, 11);
    if (audit.lambda_max_report.verdict != BoundReport::Verdict::holds)
      fail(o, "lambda_max ceiling at trial " + std::to_string(trial));
    if (audit.lambda_min_report.verdict != BoundReport::Verdict::holds)
      fail(o, "curvature floor at trial " + std::to_string(trial));
  }
  return o;
}

// 3. descent and path-norm envelope at eta = 0.9/(2 rho) over 50 seeded runs
Outcome criterion_gd_contracts() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 50 && o.passed; ++seed) {
    const std::size_t d = 3 + seed % 6;
    const std::size_t m = 10 + (seed * 13) % 90;
    const ShallowNet net0 = oracle::random_net(d, m, 2000 + seed);
    const Dataset data = oracle::random_dataset(10, d, 3000 + seed);
    ProblemConstants pc;
    pc.c_x = 1.0;
    pc.c_y = 1.0;
    pc.c_0 = std::max(realized_loss_bound(net0, data), 1e-9);
    GDConfig cfg;
    cfg.eta = 0.9 * step_size_limit(pc, net0.activation, m);
    cfg.t_max = 60;
    const Trajectory traj = gd_train(net0, data, cfg, &pc);
    const double risk0 = traj.points.front().risk;
    double prev = risk0;
    for (const auto& p : traj.points) {
      if (p.risk > prev + 1e-12) fail(o, "descent violated at seed " + std::to_string(seed));
      prev = p.risk;
      if (p.path_norm > std::sqrt(2.0 * cfg.eta * double(p.t) * risk0) + 1e-9)
        fail(o, "path envelope violated at seed " + std::to_string(seed));
    }
  }
  return o;
}

// 4. running risk mean bounded by the regularised-path value on 20 runs
Outcome criterion_opt_error() {
  Outcome o;
  std::vector<RunArtifact> artifacts(20);
  parallel_for_index(20, 2, [&](std::size_t s) {
    const ExperimentConfig cfg = load_config("acceptance_opt_error.json", 1700 + s,
                                             "c4_seed" + std::to_string(s));
    artifacts[s] = run(cfg);
  });
  for (std::size_t s = 0; s < artifacts.size(); ++s) {
    if (artifacts[s].failed) {
      fail(o, "seed " + std::to_string(s) + " failed: " + artifacts[s].failure);
      continue;
    }
    const BoundReport* r = find_report(artifacts[s], "optimisation_error");
    if (!r || r->verdict != BoundReport::Verdict::holds) {
      std::ostringstream os;
      os << "seed " << s << ": optimisation_error "
         << (r ? verdict_name(r->verdict) : std::string("missing"));
      fail(o, os.str());
    }
  }
  return o;
}

// 5. on-average stability and generalisation gap in the audited width regime
Outcome criterion_stability_gen_gap() {
  Outcome o;
  const ExperimentConfig cfg = load_config("acceptance_stability.json", 0, "c5");
  const RunArtifact artifact = run(cfg);
  if (artifact.failed) fail(o, artifact.failure);
  expect_report(o, artifact, "on_average_parameter_stability", /*allow_mc_tolerance=*/false);
  expect_report(o, artifact, "generalisation_gap", /*allow_mc_tolerance=*/false);
  const BoundReport* gap = find_report(artifact, "generalisation_gap");
  if (gap)
    for (const auto& [k, v] : gap->preconditions)
      if (!v) fail(o, "precondition not met: " + k);
  return o;
}

// 6. co-coercivity floor with one fitted constant, shrinking with width
Outcome criterion_fig1() {
  Outcome o;
  const ExperimentConfig cfg = load_config("acceptance_fig1.json", 0, "c6");
  const RunArtifact artifact = run(cfg);
  if (artifact.failed) fail(o, artifact.failure);
  for (const auto& r : artifact.reports)
    if (r.name.rfind("inner_product_floor_m_", 0) == 0 &&
        r.verdict != BoundReport::Verdict::holds)
      fail(o, r.name + " " + verdict_name(r.verdict));
  expect_report(o, artifact, "almost_monotone_trend");
  expect_report(o, artifact, "cocoercivity_lower_bound");
  return o;
}

// 7. interpolant norm identity, linearised residual, Taylor envelope,
//    gram concentration frequency
Outcome criterion_ntk_chain() {
  Outcome o;
  const ExperimentConfig cfg = load_config("acceptance_ntk_chain.json", 0, "c7");
  const RunArtifact artifact = run(cfg);
  if (artifact.failed) fail(o, artifact.failure);
  expect_report(o, artifact, "pinv_norm_identity_rel", false);
  expect_report(o, artifact, "pinv_linearised_residual_risk", false);
  expect_report(o, artifact, "taylor_remainder_probes");
  expect_report(o, artifact, "gram_concentration_frequency_spectral", false);
  expect_report(o, artifact, "gram_concentration_frequency_frobenius", false);
  return o;
}

// 8. the direct regularised-path value never exceeds the bracket at the
//    linearised interpolant when eta T = n
Outcome criterion_oracle_tightness() {
  Outcome o;
  std::vector<RunArtifact> artifacts(20);
  parallel_for_index(20, 2, [&](std::size_t s) {
    const ExperimentConfig cfg = load_config("acceptance_oracle_tightness.json", 2300 + s,
                                             "c8_seed" + std::to_string(s));
    artifacts[s] = run(cfg);
  });
  for (std::size_t s = 0; s < artifacts.size(); ++s) {
    if (artifacts[s].failed) {
      fail(o, "seed " + std::to_string(s) + " failed: " + artifacts[s].failure);
      continue;
    }
    const BoundReport* r = find_report(artifacts[s], "oracle_vs_ntk_relaxation");
    if (!r || r->verdict != BoundReport::Verdict::holds)
      fail(o, "seed " + std::to_string(s) + ": tightness " +
                  (r ? verdict_name(r->verdict) : std::string("missing")));
    if (r && !r->preconditions.at("eta_t_equals_n")) fail(o, "eta T != n in config");
  }
  return o;
}

// 9. excess risk positive and non-increasing across the n grid
Outcome criterion_consistency() {
  Outcome o;
  const ExperimentConfig cfg = load_config("acceptance_consistency.json", 0, "c9");
  const RunArtifact artifact = run(cfg);
  if (artifact.failed) fail(o, artifact.failure);
  for (const auto& r : artifact.reports)
    if (r.name.rfind("excess_risk_positive_n_", 0) == 0 &&
        r.verdict != BoundReport::Verdict::holds)
      fail(o, r.name + " " + verdict_name(r.verdict));
  expect_report(o, artifact, "excess_risk_nonincreasing_trend", false);
  return o;
}

// 10. manifests rerun to bit-identical CSVs, independent of worker count
Outcome criterion_reproducibility() {
  Outcome o;
  struct Case {
    const char* config;
    std::uint64_t seed;
    const char* leaf;
  };
  for (const Case c : {Case{"train_demo.json", 31, "c10_train"},
                       Case{"acceptance_stability.json", 33, "c10_stab"}}) {
    ExperimentConfig first = load_config(c.config, c.seed, std::string(c.leaf) + "_a");
    first.workers = 2;
    const RunArtifact a = run(first);
    if (a.failed) {
      fail(o, a.failure);
      continue;
    }
    ExperimentConfig second = config_from_json(
        nlohmann::json::parse(read_text_file(a.output_dir / "manifest.json")));
    second.master_seed = c.seed;
    second.output_dir = (g_scratch / (std::string(c.leaf) + "_b")).string();
    second.workers = 1;
    const RunArtifact b = run(second);
    for (const auto& table : a.manifest.at("tables").get<std::vector<std::string>>()) {
      if (read_text_file(a.output_dir / table) !=
          read_text_file(fs::path(second.output_dir) / table))
        fail(o, std::string(c.leaf) + ": " + table + " differs across rerun");
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <configs_dir> [scratch_dir]\n", argv[0]);
    return 2;
  }
  g_configs = argv[1];
  g_scratch = argc > 2 ? argv[2] : "acceptance_scratch";
  fs::create_directories(g_scratch);

  struct Entry {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries{
      {"01 gradient correctness", criterion_gradients},
      {"02 hessian structure and spectra", criterion_hessian},
      {"03 gd descent and path envelope", criterion_gd_contracts},
      {"04 optimisation-error bound", criterion_opt_error},
      {"05 stability and generalisation gap", criterion_stability_gen_gap},
      {"06 co-coercivity floor trend", criterion_fig1},
      {"07 linearised-feature chain", criterion_ntk_chain},
      {"08 direct value vs interpolant bracket", criterion_oracle_tightness},
      {"09 consistency trend under label noise", criterion_consistency},
      {"10 manifest reproducibility", criterion_reproducibility},
  };

  bool all_passed = true;
  for (const auto& entry : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = entry.fn();
    } catch (const std::exception& e) {
      outcome.passed = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %s: %s (%.1f s)%s%s\n", entry.name,
                outcome.passed ? "PASS" : "FAIL", secs, outcome.detail.empty() ? "" : " - ",
                outcome.detail.c_str());
    std::fflush(stdout);
    all_passed = all_passed && outcome.passed;
  }
  return all_passed ? 0 : 1;
}
