#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/harness.hpp"

using namespace kdisc;
using namespace kdisc::harness;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config(const fs::path& work) {
  std::ifstream in(fs::path(KDISC_CONFIG_DIR) / "desk.json");
  const auto desk = nlohmann::json::parse(in);
  return {{"master_seed", 7},
          {"engineering", desk.at("engineering")},
          {"work_dir", work.string()},
          {"families", {"dt", "lr", "ensemble"}},
          {"synth", {{"n_donors", 500}}},
          {"selection", {{"budget", 8}, {"population", 4}, {"inner_trials", 1}, {"folds", 2}}},
          {"tuning", {{"n_trials", 3}, {"folds", 2}, {"n_startup", 2}}},
          {"training", {{"seeds", 3}}},
          {"explain", {{"background", 10}, {"max_samples", 4}, {"n_permutations", 2}}}};
}

}  // namespace

TEST_CASE("config validation") {
  auto j = tiny_config("/tmp/x");
  CHECK_NOTHROW(PipelineConfig::from_json(j).validate());
  auto unknown = j;
  unknown["selction"] = nlohmann::json::object();
  CHECK_THROWS_AS(PipelineConfig::from_json(unknown), ConfigError);
  auto nested = j;
  nested["selection"]["budjet"] = 3;
  CHECK_THROWS_AS(PipelineConfig::from_json(nested), ConfigError);
  auto small = j;
  small["selection"]["budget"] = 3;
  CHECK_THROWS_AS(PipelineConfig::from_json(small).validate(), ConfigError);
  auto fam = j;
  fam["families"] = {"lr", "svm"};
  CHECK_THROWS_AS(PipelineConfig::from_json(fam).validate(), ConfigError);
  auto paper = PipelineConfig::from_json(j);
  paper.apply_paper_budgets();
  CHECK(paper.selection.budget == 1000);
  CHECK(paper.tuning.n_trials == 300);
  CHECK(paper.seeds == 30);
  const auto cfg = PipelineConfig::from_json(j);
  CHECK(cfg.ensemble_members() == std::vector<models::Family>{models::Family::LogisticRegression});
}

TEST_CASE("box statistics with Tukey whiskers") {
  const auto b = box_stats({4, 1, 3, 2, 100});
  CHECK(b.min == 1);
  CHECK(b.q1 == 2);
  CHECK(b.median == 3);
  CHECK(b.q3 == 4);
  CHECK(b.max == 4);
  CHECK(b.outliers == std::vector<double>{100});
  CHECK(xml_escape("a<b&\"c\"") == "a&lt;b&amp;&quot;c&quot;");
}

TEST_CASE("stages run in order, report gaps and rerun reproducibly") {
  const auto work = fs::temp_directory_path() / "kdisc_harness_test";
  fs::remove_all(work);
  const auto cfg = PipelineConfig::from_json(tiny_config(work));

  try {
    run_stage(Stage::Engineer, cfg);
    FAIL("engineer ran without a cohort");
  } catch (const StageOrderError& e) {
    CHECK(std::string(e.what()).find("run synth first") != std::string::npos);
  }

  for (auto s : {Stage::Synth, Stage::Engineer, Stage::Select, Stage::Tune, Stage::Train, Stage::Evaluate})
    run_stage(s, cfg, Exec::Serial);
  CHECK_THROWS_AS(run_stage(Stage::Calibrate, PipelineConfig::from_json(tiny_config(work / "other"))),
                  StageOrderError);

  const auto ev = paths::stage_dir(cfg, Stage::Evaluate);
  const auto table = sha256_file(ev / "table2.csv");
  const auto tukey = sha256_file(ev / "tukey_normed_mcc.csv");
  run_stage(Stage::Evaluate, cfg, Exec::Parallel);
  CHECK(sha256_file(ev / "table2.csv") == table);
  CHECK(sha256_file(ev / "tukey_normed_mcc.csv") == tukey);

  const auto t2 = read_csv(ev / "table2.csv");
  CHECK(t2.rows.size() == 3);
  CHECK(read_csv(ev / "tukey_f1.csv").rows.size() == 3);

  run_stage(Stage::Report, cfg);
  std::ifstream in(paths::stage_dir(cfg, Stage::Report) / "report.json");
  const auto rep = nlohmann::json::parse(in);
  const auto gaps = rep.at("gaps").get<std::vector<std::string>>();
  CHECK(std::find(gaps.begin(), gaps.end(), "calibration: not run") != gaps.end());
  CHECK(std::find(gaps.begin(), gaps.end(), "explain: not run") != gaps.end());

  const auto manifest = RunManifest::load(work / paths::kManifest);
  CHECK(manifest.stages.count("evaluate") == 1);
  bool listed = false;
  for (const auto& [path, hash] : manifest.stages.at("evaluate").outputs)
    listed |= path.ends_with("table2.csv") && hash == table;
  CHECK(listed);
  fs::remove_all(work);
}
