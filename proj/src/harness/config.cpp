#include <algorithm>
#include <set>

#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/harness/config.hpp"

namespace kdisc::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"master_seed", "work_dir", "cohort", "families", "synth", "engineering", "selection", "tuning",
                  "training", "explain", "calibration", "space", "stages"},
                 "config");
  PipelineConfig c;
  c.source = j;
  c.master_seed = j.value("master_seed", c.master_seed);
  c.work_dir = resolve(j.value("work_dir", std::string("work")), base_dir);
  c.cohort = resolve(j.value("cohort", std::string()), base_dir);

  const auto fams = j.value("families", std::vector<std::string>{"dt", "lr", "rf", "gbt", "mlp", "ensemble"});
  for (const auto& f : fams) {
    const auto fam = models::family_from_string(f);
    if (std::find(c.families.begin(), c.families.end(), fam) != c.families.end())
      throw ConfigError("family '" + f + "' listed twice");
    c.families.push_back(fam);
  }
  if (c.families.empty()) throw ConfigError("families must name at least one model");

  json synth = j.value("synth", json::object());
  if (!synth.contains("seed")) synth["seed"] = c.master_seed;
  c.synth = synth::SynthConfig::from_json(synth);
  c.engineering = features::EngineeringConfig::from_json(j.value("engineering", json::object()));

  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    reject_unknown(s, {"budget", "population", "inner_trials", "folds", "lambda"}, "selection");
    c.selection.budget = s.value("budget", c.selection.budget);
    c.selection.population = s.value("population", c.selection.population);
    c.selection.inner_trials = s.value("inner_trials", c.selection.inner_trials);
    c.selection.folds = s.value("folds", c.selection.folds);
    c.selection.lambda = s.value("lambda", c.selection.lambda);
  }
  if (j.contains("tuning")) {
    const auto& s = j.at("tuning");
    reject_unknown(s, {"n_trials", "folds", "gamma", "n_startup", "n_candidates"}, "tuning");
    c.tuning.n_trials = s.value("n_trials", c.tuning.n_trials);
    c.tuning.folds = s.value("folds", c.tuning.folds);
    c.tuning.gamma = s.value("gamma", c.tuning.gamma);
    c.tuning.n_startup = s.value("n_startup", c.tuning.n_startup);
    c.tuning.n_candidates = s.value("n_candidates", c.tuning.n_candidates);
  }
  if (j.contains("training")) {
    reject_unknown(j.at("training"), {"seeds"}, "training");
    c.seeds = j.at("training").value("seeds", c.seeds);
  }
  if (j.contains("explain")) {
    const auto& s = j.at("explain");
    reject_unknown(s, {"background", "max_samples", "n_permutations"}, "explain");
    c.explain.background = s.value("background", c.explain.background);
    c.explain.max_samples = s.value("max_samples", c.explain.max_samples);
    c.explain.n_permutations = s.value("n_permutations", c.explain.n_permutations);
  }
  if (j.contains("calibration")) {
    reject_unknown(j.at("calibration"), {"bins"}, "calibration");
    c.calibration_bins = j.at("calibration").value("bins", c.calibration_bins);
  }
  c.space = j.value("space", c.space);
  if (c.space != "desk" && c.space != "paper") throw ConfigError("space must be 'desk' or 'paper'");
  if (j.contains("stages")) c.stages = j.at("stages").get<std::map<std::string, bool>>();
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json fams = json::array();
  for (auto f : families) fams.push_back(models::to_string(f));
  return {{"master_seed", master_seed},
          {"work_dir", work_dir.string()},
          {"cohort", cohort.string()},
          {"families", fams},
          {"synth", synth.to_json()},
          {"engineering", engineering.to_json()},
          {"selection",
           {{"budget", selection.budget},
            {"population", selection.population},
            {"inner_trials", selection.inner_trials},
            {"folds", selection.folds},
            {"lambda", selection.lambda}}},
          {"tuning",
           {{"n_trials", tuning.n_trials},
            {"folds", tuning.folds},
            {"gamma", tuning.gamma},
            {"n_startup", tuning.n_startup},
            {"n_candidates", tuning.n_candidates}}},
          {"training", {{"seeds", seeds}}},
          {"explain",
           {{"background", explain.background},
            {"max_samples", explain.max_samples},
            {"n_permutations", explain.n_permutations}}},
          {"calibration", {{"bins", calibration_bins}}},
          {"space", space},
          {"stages", stages}};
}

void PipelineConfig::apply_paper_budgets() {
  selection.budget = 1000;
  selection.inner_trials = 10;
  tuning.n_trials = 300;
  seeds = 30;
}

void PipelineConfig::validate() const {
  if (selection.population < 2) throw ConfigError("selection.population must be at least 2");
  if (selection.budget < selection.population)
    throw ConfigError("selection.budget (" + std::to_string(selection.budget) +
                      ") must be at least selection.population (" + std::to_string(selection.population) + ")");
  if (selection.inner_trials < 1) throw ConfigError("selection.inner_trials must be at least 1");
  if (selection.folds < 2) throw ConfigError("selection.folds must be at least 2");
  if (selection.lambda < 0) throw ConfigError("selection.lambda must be non-negative");
  if (tuning.n_trials < 1) throw ConfigError("tuning.n_trials must be at least 1");
  if (tuning.folds < 2) throw ConfigError("tuning.folds must be at least 2");
  if (!(tuning.gamma > 0 && tuning.gamma < 1)) throw ConfigError("tuning.gamma must lie in (0, 1)");
  if (tuning.n_candidates < 1) throw ConfigError("tuning.n_candidates must be at least 1");
  if (seeds < 2) throw ConfigError("training.seeds must be at least 2 for the group comparisons");
  if (explain.background < 1 || explain.max_samples < 1 || explain.n_permutations < 1)
    throw ConfigError("explain budgets must be positive");
  if (calibration_bins < 2) throw ConfigError("calibration.bins must be at least 2");
  if (has_ensemble() && ensemble_members().empty())
    throw ConfigError("the ensemble needs at least one of lr, rf, gbt, mlp");
}

bool PipelineConfig::stage_enabled(const std::string& name) const {
  const auto it = stages.find(name);
  return it == stages.end() || it->second;
}

models::HyperParamSpace PipelineConfig::space_for(models::Family f) const {
  return space == "paper" ? models::paper_space(f) : models::desk_space(f);
}

bool PipelineConfig::has_ensemble() const {
  return std::find(families.begin(), families.end(), models::Family::Ensemble) != families.end();
}

std::vector<models::Family> PipelineConfig::ensemble_members() const {
  std::vector<models::Family> out;
  for (auto f : families)
    if (f != models::Family::Ensemble && f != models::Family::DecisionTree) out.push_back(f);
  return out;
}

std::vector<models::Family> PipelineConfig::fitted_families() const {
  std::vector<models::Family> out;
  for (auto f : families)
    if (f != models::Family::Ensemble) out.push_back(f);
  return out;
}

std::vector<std::string> PipelineConfig::model_names() const {
  std::vector<std::string> out;
  for (auto f : families) out.push_back(models::to_string(f));
  return out;
}

}  // namespace kdisc::harness
