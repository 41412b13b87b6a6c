#include "gdlab/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "gdlab/io.hpp"
#include "gdlab/parallel.hpp"
#include "support/oracles.hpp"

using namespace gdlab;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_train_doc(const std::string& out) {
  return nlohmann::json{
      {"scenario", "train"},
      {"master_seed", 5},
      {"output_dir", out},
      {"n", 12},
      {"data",
       {{"d", 4},
        {"input_law", "uniform_sphere"},
        {"c_x", 1.0},
        {"c_y", 1.0},
        {"noise_sigma", 0.0},
        {"noise_law", "none"},
        {"target", {{"kind", "teacher_logistic"}, {"gaussian_teacher", true}}}}},
      {"net", {{"m", 30}, {"activation", "sigmoid"}, {"init", {{"kind", "zero"}}}, {"u_mode", "alternating"}}},
      {"gd", {{"eta", 1.5}, {"t_max", 30}, {"record_every", 1}}}};
}

fs::path scratch_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "gdlab_test" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {1.0 / 3.0, 0.1, -0.0, 1e-300, 2.5e17, 0.30000000000000004, -1.0 / 7.0}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
}

TEST(DatasetCsv, BitExactRoundTrip) {
  DataSpec spec;
  spec.d = 3;
  spec.c_x = 1.0;
  spec.c_y = 2.0;
  spec.seed = 9;
  spec.target.kind = TargetKind::linear;
  spec.target.w_star = {0.3, -0.7, 1.1};
  const Dataset data = sample_dataset(spec, 17);
  const Dataset back = dataset_from_csv(dataset_to_csv(data));
  ASSERT_EQ(back.size(), data.size());
  EXPECT_TRUE(back == data);  // bitwise equality through the decimal round trip

  const DataSpec spec_back = data_spec_from_json(data_spec_to_json(spec));
  EXPECT_EQ(spec_back.d, spec.d);
  EXPECT_TRUE(spec_back.target.w_star == spec.target.w_star);
}

TEST(ParallelForIndex, DeterministicSlotsAndErrors) {
  std::vector<std::size_t> slots(100, 0);
  parallel_for_index(100, 4, [&](std::size_t i) { slots[i] = i * i; });
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(slots[i], i * i);
  EXPECT_THROW(parallel_for_index(10, 3,
                                  [&](std::size_t i) {
                                    if (i == 7) throw std::runtime_error("boom");
                                  }),
               std::runtime_error);
}

TEST(ConfigParsing, UnknownKeysRejectedEverywhere) {
  auto doc = small_train_doc("unused");
  doc["typo_key"] = 1;
  EXPECT_THROW(config_from_json(doc), std::invalid_argument);

  auto doc2 = small_train_doc("unused");
  doc2["gd"]["step"] = 0.1;
  EXPECT_THROW(config_from_json(doc2), std::invalid_argument);

  auto doc3 = small_train_doc("unused");
  doc3["data"]["target"]["wstar"] = {1.0};
  EXPECT_THROW(config_from_json(doc3), std::invalid_argument);
}

TEST(ConfigParsing, ScenarioRequirementsValidated) {
  auto doc = small_train_doc("unused");
  doc.erase("n");
  EXPECT_THROW(validate_config(config_from_json(doc)), std::invalid_argument);

  auto cons = small_train_doc("unused");
  cons["scenario"] = "consistency";
  cons["n_grid"] = {10, 20};
  cons["alpha"] = 0.5;
  // consistency without label noise is rejected
  EXPECT_THROW(validate_config(config_from_json(cons)), std::invalid_argument);
}

TEST(ConfigParsing, ConsistencyWidthRequirementEnforced) {
  auto doc = small_train_doc("unused");
  doc["scenario"] = "consistency";
  doc["n_grid"] = {50, 100};
  doc["alpha"] = 0.5;
  doc["data"]["noise_sigma"] = 0.3;
  doc["data"]["noise_law"] = "uniform_bounded";
  doc["data"]["c_y"] = 1.6;
  doc["net"]["m"] = 10;  // far below the width requirement
  EXPECT_THROW(validate_config(config_from_json(doc)), std::invalid_argument);
  doc["override_width_check"] = true;
  EXPECT_NO_THROW(validate_config(config_from_json(doc)));
}

TEST(RunTrain, WritesArtifactsAndReportsHold) {
  const fs::path dir = scratch_dir("train");
  const ExperimentConfig cfg = config_from_json(small_train_doc(dir.string()));
  validate_config(cfg);
  const RunArtifact artifact = run(cfg);
  EXPECT_FALSE(artifact.failed);
  EXPECT_FALSE(artifact.any_violation);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir / "reports.json"));
  EXPECT_TRUE(fs::exists(dir / "dataset.csv"));
  for (const auto& r : artifact.reports) EXPECT_TRUE(r.ok()) << r.name;
  // dataset sidecar reproduces the sampling spec
  const Dataset data = dataset_from_csv(read_text_file(dir / "dataset.csv"));
  const DataSpec spec = data_spec_from_json(
      nlohmann::json::parse(read_text_file(dir / "dataset_spec.json")));
  EXPECT_TRUE(data == sample_dataset(spec, cfg.n));
}

TEST(RunTrain, ManifestRerunIsBitIdentical) {
  const fs::path dir_a = scratch_dir("rerun_a");
  const fs::path dir_b = scratch_dir("rerun_b");
  ExperimentConfig cfg = config_from_json(small_train_doc(dir_a.string()));
  cfg.workers = 2;
  run(cfg);
  ExperimentConfig again =
      config_from_json(nlohmann::json::parse(read_text_file(dir_a / "manifest.json")));
  again.output_dir = dir_b.string();
  again.workers = 1;
  run(again);
  for (const char* name : {"trajectory.csv", "dataset.csv"})
    EXPECT_EQ(read_text_file(dir_a / name), read_text_file(dir_b / name)) << name;
}

TEST(RunTrain, ModuleRejectionStillWritesManifest) {
  const fs::path dir = scratch_dir("fail");
  auto doc = small_train_doc(dir.string());
  doc["gd"]["eta"] = 100.0;  // far above 1/(2 rho), no override
  const RunArtifact artifact = run(config_from_json(doc));
  EXPECT_TRUE(artifact.failed);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("status"), "failed");
  EXPECT_NE(manifest.at("failure").get<std::string>().find("eta"), std::string::npos);
}

TEST(Sweep, PerRunIsolation) {
  const fs::path dir = scratch_dir("sweep");
  ExperimentConfig good = config_from_json(small_train_doc((dir / "good").string()));
  auto bad_doc = small_train_doc((dir / "bad").string());
  bad_doc["gd"]["eta"] = 100.0;
  ExperimentConfig bad = config_from_json(bad_doc);
  const auto artifacts = sweep({bad, good}, dir);
  ASSERT_EQ(artifacts.size(), 2u);
  EXPECT_TRUE(artifacts[0].failed);
  EXPECT_FALSE(artifacts[1].failed);
  const auto index = nlohmann::json::parse(read_text_file(dir / "index.json"));
  EXPECT_EQ(index.size(), 2u);
  EXPECT_EQ(index[0].at("status"), "failed");
  EXPECT_EQ(index[1].at("status"), "ok");
}

TEST(Sweep, EmptyGivesEmptyIndex) {
  const fs::path dir = scratch_dir("sweep_empty");
  EXPECT_TRUE(sweep({}, dir).empty());
  const auto index = nlohmann::json::parse(read_text_file(dir / "index.json"));
  EXPECT_TRUE(index.is_array());
  EXPECT_TRUE(index.empty());
}

TEST(RunStabilityAudit, SmallRegimeHolds) {
  const fs::path dir = scratch_dir("stab");
  nlohmann::json doc = small_train_doc(dir.string());
  doc["scenario"] = "stability_audit";
  doc["n"] = 8;
  doc["replicates"] = 3;
  doc["test_size"] = 500;
  doc["gd"] = {{"eta", 0.5}, {"t_max", 8}, {"record_every", 1}};
  const RunArtifact artifact = run(config_from_json(doc));
  ASSERT_FALSE(artifact.failed) << artifact.failure;
  EXPECT_FALSE(artifact.any_violation);
  EXPECT_TRUE(fs::exists(dir / "stability.csv"));
  bool found = false;
  for (const auto& r : artifact.reports)
    if (r.name == "on_average_parameter_stability") {
      found = true;
      EXPECT_EQ(r.verdict, BoundReport::Verdict::holds);
    }
  EXPECT_TRUE(found);
}

TEST(RunNtkCompare, SmallRegimeHolds) {
  const fs::path dir = scratch_dir("ntk");
  nlohmann::json doc = small_train_doc(dir.string());
  doc["scenario"] = "ntk_compare";
  doc["n"] = 6;
  doc["mc_samples"] = 5000;
  doc["redraws"] = 10;
  doc["delta"] = 0.2;
  doc["taylor_probes"] = 25;
  doc["net"] = {{"m", 300},
                {"activation", "sigmoid"},
                {"init", {{"kind", "gaussian"}, {"nu", 1.0}}},
                {"u_mode", "rademacher"}};
  doc["gd"] = {{"eta", 0.5}, {"t_max", 12}, {"record_every", 4}};
  const RunArtifact artifact = run(config_from_json(doc));
  ASSERT_FALSE(artifact.failed) << artifact.failure;
  for (const auto& r : artifact.reports) EXPECT_TRUE(r.ok()) << r.name;
}

TEST(ScenarioNames, RoundTrip) {
  for (const char* name :
       {"train", "stability_audit", "fig1", "bounds_audit", "ntk_compare", "consistency"})
    EXPECT_EQ(scenario_name(scenario_from_name(name)), name);
  EXPECT_THROW(scenario_from_name("nope"), std::invalid_argument);
}
