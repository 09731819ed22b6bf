#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kdisc/calibration.hpp"
#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/evaluation/metrics.hpp"
#include "kdisc/evaluation/retrain.hpp"
#include "kdisc/evaluation/stats.hpp"
#include "kdisc/explainability.hpp"
#include "kdisc/harness/pipeline.hpp"
#include "kdisc/harness/report.hpp"
#include "kdisc/models.hpp"
#include "kdisc/optimizer.hpp"
#include "kdisc/synthgen.hpp"

namespace kdisc::harness {

using nlohmann::json;
namespace fs = std::filesystem;
using models::Family;

// Stream tags under the master seed.
namespace tag {
constexpr std::uint64_t kSplit = 1, kPipeline = 2, kSelect = 3, kSelectFolds = 4, kTune = 5, kTrain = 6,
                        kExplain = 7, kTuneFolds = 8;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s{Stage::Synth,    Stage::Engineer,  Stage::Select,  Stage::Tune,  Stage::Train,
                                    Stage::Evaluate, Stage::Calibrate, Stage::Explain, Stage::Report};
  return s;
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Synth: return "synth";
    case Stage::Engineer: return "engineer";
    case Stage::Select: return "select";
    case Stage::Tune: return "tune";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
    case Stage::Calibrate: return "calibrate";
    case Stage::Explain: return "explain";
    case Stage::Report: return "report";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (auto st : all_stages())
    if (s == to_string(st)) return st;
  throw ConfigError("unknown stage '" + s + "' (expected synth, engineer, select, tune, train, evaluate, "
                    "calibrate, explain, report or all)");
}

// ----------------------------------------------------------------- manifest

json ManifestEntry::to_json() const {
  return {{"inputs", inputs},
          {"outputs", outputs},
          {"volatile", volatile_outputs},
          {"config", config},
          {"duration_seconds", duration_seconds}};
}

ManifestEntry ManifestEntry::from_json(const json& j) {
  ManifestEntry e;
  e.inputs = j.value("inputs", e.inputs);
  e.outputs = j.value("outputs", e.outputs);
  e.volatile_outputs = j.value("volatile", e.volatile_outputs);
  e.config = j.value("config", json::object());
  e.duration_seconds = j.value("duration_seconds", 0.0);
  return e;
}

RunManifest RunManifest::load(const fs::path& path) {
  RunManifest m;
  if (!fs::exists(path)) return m;
  const json j = json::parse(read_text(path));
  for (const auto& [k, v] : j.at("stages").items()) m.stages[k] = ManifestEntry::from_json(v);
  return m;
}

json RunManifest::to_json() const {
  json st = json::object();
  for (auto s : all_stages()) {
    const auto it = stages.find(to_string(s));
    if (it != stages.end()) st[it->first] = it->second.to_json();
  }
  return {{"stages", st}};
}

void RunManifest::save(const fs::path& path) const { write_text(path, to_json().dump(2) + "\n"); }

namespace paths {
fs::path stage_dir(const PipelineConfig& cfg, Stage s) { return cfg.work_dir / to_string(s); }
fs::path cohort_file(const PipelineConfig& cfg) {
  return cfg.cohort.empty() ? stage_dir(cfg, Stage::Synth) / "cohort.jsonl" : cfg.cohort;
}
}  // namespace paths

namespace {

struct Ctx {
  const PipelineConfig& cfg;
  Exec exec;
  Stage stage;
  ManifestEntry entry;
  std::vector<std::string> notes;

  fs::path dir() const { return paths::stage_dir(cfg, stage); }
  fs::path in(Stage s, const std::string& name) const { return paths::stage_dir(cfg, s) / name; }

  std::string rel(const fs::path& p) const {
    const auto r = fs::relative(p, cfg.work_dir);
    return r.empty() || r.native().starts_with("..") ? p.string() : r.generic_string();
  }

  // Throws unless `p` exists; the message names the stage producing it.
  void require(const fs::path& p, Stage producer) {
    if (!fs::exists(p))
      throw StageOrderError("missing " + rel(p) + ": run " + std::string(to_string(producer)) + " first");
    entry.inputs[rel(p)] = sha256_file(p);
  }

  void record(const fs::path& p, bool is_volatile = false) {
    entry.outputs[rel(p)] = sha256_file(p);
    if (is_volatile) entry.volatile_outputs.push_back(rel(p));
  }

  void emit(const fs::path& p, const std::string& text, bool is_volatile = false) {
    write_text(p, text);
    record(p, is_volatile);
  }

  void emit_matrix(const fs::path& p, const FeatureMatrix& m) {
    write_feature_matrix(p, m);
    record(p);
    fs::path side = p;
    side += ".schema.json";
    record(side);
  }
};

std::string fd(double v) { return format_double(v); }

std::uint64_t family_index(Family f) { return static_cast<std::uint64_t>(f); }

std::vector<std::uint64_t> training_seeds(const PipelineConfig& cfg) {
  std::vector<std::uint64_t> s;
  for (std::size_t k = 0; k < cfg.seeds; ++k) s.push_back(stream_seed(cfg.master_seed, tag::kTrain, k));
  return s;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::string> selected_features(Ctx& c, Family f) {
  const auto p = c.in(Stage::Select, std::string(models::to_string(f)) + "_selected.json");
  c.require(p, Stage::Select);
  return json::parse(read_text(p)).at("features").get<std::vector<std::string>>();
}

// ------------------------------------------------------------------- synth

void stage_synth(Ctx& c) {
  if (!c.cfg.cohort.empty()) {
    if (!fs::exists(c.cfg.cohort)) throw ConfigError("cohort file not found: " + c.cfg.cohort.string());
    c.entry.inputs[c.cfg.cohort.string()] = sha256_file(c.cfg.cohort);
    c.notes.push_back("external cohort " + c.cfg.cohort.string() + "; nothing generated");
    return;
  }
  const auto sc = synth::generate_cohort(c.cfg.synth);
  write_cohort_jsonl(c.dir() / "cohort.jsonl", sc.records);
  c.record(c.dir() / "cohort.jsonl");
  synth::write_ground_truth(c.dir() / "ground_truth.json", sc.truth);
  c.record(c.dir() / "ground_truth.json");
  c.notes.push_back(std::to_string(sc.records.size()) + " donors, discard rate " + fd(sc.truth.realized_discard));
}

// ---------------------------------------------------------------- engineer

void stage_engineer(Ctx& c) {
  const auto cohort_path = paths::cohort_file(c.cfg);
  c.require(cohort_path, Stage::Synth);
  const auto cohort = make_labeled_cohort(read_cohort_jsonl(cohort_path));
  const auto split = split_cohort(cohort, stream_seed(c.cfg.master_seed, tag::kSplit));
  const auto pipe = features::FeaturePipeline::fit(cohort, split.train_ids, c.cfg.engineering,
                                                   stream_seed(c.cfg.master_seed, tag::kPipeline), c.exec);
  const auto train = pipe.transform(cohort, split.train_ids, c.exec);
  const auto val = pipe.transform(cohort, split.val_ids, c.exec);
  const auto test = pipe.transform(cohort, split.test_ids, c.exec);
  const auto scaler = fit_scaler(train);

  c.emit(c.dir() / "split.json", json{{"seed", split.seed},
                                       {"train_ids", split.train_ids},
                                       {"val_ids", split.val_ids},
                                       {"test_ids", split.test_ids}}
                                     .dump(1) +
                                     "\n");
  c.emit(c.dir() / "pipeline.json", pipe.to_json().dump(1) + "\n");
  c.emit(c.dir() / "scaler.json",
         json{{"features", train.feature_names}, {"mean", scaler.mean}, {"std", scaler.std}}.dump(1) + "\n");
  c.emit_matrix(c.dir() / "train.csv", apply_scaler(scaler, train));
  c.emit_matrix(c.dir() / "val.csv", apply_scaler(scaler, val));
  c.emit_matrix(c.dir() / "test.csv", apply_scaler(scaler, test));
  c.emit_matrix(c.dir() / "test_unscaled.csv", test);

  CsvWriter feats({"feature", "type"});
  for (std::size_t i = 0; i < train.cols(); ++i) feats.row({train.feature_names[i], to_string(train.feature_types[i])});
  c.emit(c.dir() / "features.csv", feats.str());

  const auto pre = pipe.encode(cohort, split.train_ids, c.exec);
  const auto& plan = pipe.plan();
  json summary = {{"donors", cohort.size()},
                  {"train", split.train_ids.size()},
                  {"val", split.val_ids.size()},
                  {"test", split.test_ids.size()},
                  {"raw_features", pipe.raw_features().size()},
                  {"final_features", pipe.features().size()},
                  {"dropped", pipe.dropped()},
                  {"missing_before_imputation", pre.values.count_missing()},
                  {"missing_after_imputation",
                   train.values.count_missing() + val.values.count_missing() + test.values.count_missing()},
                  {"iterative_rounds", plan.rounds.size()},
                  {"iterative_converged", plan.converged},
                  {"iterative_last_change", plan.last_change},
                  {"warnings", plan.warnings}};
  c.emit(c.dir() / "summary.json", summary.dump(2) + "\n");
  c.notes.push_back(std::to_string(pipe.features().size()) + " features, " + std::to_string(plan.rounds.size()) +
                    " imputation rounds");
}

// ------------------------------------------------------------------ select

void stage_select(Ctx& c) {
  const auto train_path = c.in(Stage::Engineer, "train.csv");
  c.require(train_path, Stage::Engineer);
  const auto train = read_feature_matrix(train_path);
  json timing = json::object();
  CsvWriter summary({"model", "n_selected", "loss", "best_trial", "evaluations", "generations"});

  for (auto f : c.cfg.fitted_families()) {
    const std::string name = models::to_string(f);
    const auto start = std::chrono::steady_clock::now();
    optimize::SubsetEvalConfig sc;
    sc.space = c.cfg.space_for(f);
    sc.inner_trials = c.cfg.selection.inner_trials;
    sc.folds = c.cfg.selection.folds;
    sc.lambda = c.cfg.selection.lambda;
    sc.common_folds = true;
    sc.fold_seed = stream_seed(c.cfg.master_seed, tag::kSelectFolds, family_index(f));
    auto objective = [&](const optimize::Genome& g, std::uint64_t seed) {
      return optimize::evaluate_feature_subset(g, sc, train.values, train.labels, seed);
    };
    optimize::Nsga2Config nc;
    nc.budget = c.cfg.selection.budget;
    nc.population = c.cfg.selection.population;
    const auto ledger_path = c.dir() / (name + "_ledger.jsonl");
    optimize::TrialLedger ledger(ledger_path.string());
    const auto res = optimize::nsga2_feature_search(train.cols(), objective, nc,
                                                    stream_seed(c.cfg.master_seed, tag::kSelect, family_index(f)),
                                                    &ledger, c.exec);
    c.record(ledger_path, true);

    CsvWriter trials({"trial", "generation", "n_selected", "penalty", "loss", "failed", "genome"});
    for (const auto& r : ledger.trials())
      trials.row({std::to_string(r.index), std::to_string(r.payload.value("generation", 0)),
                  std::to_string(r.payload.value("n_selected", 0)), fd(r.penalty), fd(r.loss), r.failed ? "1" : "0",
                  r.payload.value("bits", std::string())});
    c.emit(c.dir() / (name + "_trials.csv"), trials.str());

    std::vector<std::string> names;
    for (auto i : optimize::selected_indices(res.best)) names.push_back(train.feature_names[i]);
    if (names.empty()) throw FitError("feature selection for " + name + " returned an empty subset");
    c.emit(c.dir() / (name + "_selected.json"), json{{"model", name},
                                                      {"features", names},
                                                      {"genome", optimize::genome_string(res.best)},
                                                      {"loss", res.best_loss},
                                                      {"best_trial", res.best_trial}}
                                                        .dump(2) +
                                                    "\n");
    summary.row({name, std::to_string(names.size()), fd(res.best_loss), std::to_string(res.best_trial),
                 std::to_string(res.evaluations), std::to_string(res.generations)});
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.notes.push_back(name + ": " + std::to_string(names.size()) + " features, loss " + fd(res.best_loss));
  }
  c.emit(c.dir() / "summary.csv", summary.str());
  c.emit(c.dir() / "timing.json", timing.dump(2) + "\n", true);
}

// -------------------------------------------------------------------- tune

void stage_tune(Ctx& c) {
  const auto train_path = c.in(Stage::Engineer, "train.csv");
  c.require(train_path, Stage::Engineer);
  const auto train = read_feature_matrix(train_path);
  json timing = json::object();
  CsvWriter summary({"model", "best_loss", "best_trial", "hyperparameters"});

  for (auto f : c.cfg.fitted_families()) {
    const std::string name = models::to_string(f);
    const auto start = std::chrono::steady_clock::now();
    const auto X = train.select_features(selected_features(c, f));
    const int k = c.cfg.tuning.folds;
    const auto folds =
        optimize::stratified_folds(X.labels, k, stream_seed(c.cfg.master_seed, tag::kTuneFolds, family_index(f)));
    auto objective = [&](const models::HyperParams& hp, std::uint64_t seed) -> optimize::HpOutcome {
      const auto s = optimize::cross_validate(optimize::family_fit_predict(f, hp), X.values, X.labels, folds, k, seed);
      double loss = 0;
      for (double v : s) loss += 1.0 - v;
      return {loss / static_cast<double>(s.size()), s};
    };
    optimize::TpeConfig tc;
    tc.n_trials = c.cfg.tuning.n_trials;
    tc.gamma = c.cfg.tuning.gamma;
    tc.n_startup = c.cfg.tuning.n_startup;
    tc.n_candidates = c.cfg.tuning.n_candidates;
    const auto ledger_path = c.dir() / (name + "_ledger.jsonl");
    optimize::TrialLedger ledger(ledger_path.string());
    const auto res = optimize::tpe_optimize(c.cfg.space_for(f), objective, tc,
                                            stream_seed(c.cfg.master_seed, tag::kTune, family_index(f)), &ledger,
                                            c.exec);
    c.record(ledger_path, true);

    CsvWriter trials({"trial", "sampler", "loss", "failed", "hyperparameters"});
    for (const auto& r : ledger.trials())
      trials.row({std::to_string(r.index), r.payload.value("sampler", std::string()), fd(r.loss),
                  r.failed ? "1" : "0", r.payload.value("hp", json::object()).dump()});
    c.emit(c.dir() / (name + "_trials.csv"), trials.str());
    c.emit(c.dir() / (name + "_best.json"),
           json{{"model", name}, {"hyperparameters", res.best}, {"loss", res.best_loss}, {"best_trial", res.best_trial}}
                   .dump(2) +
               "\n");
    summary.row({name, fd(res.best_loss), std::to_string(res.best_trial), res.best.dump()});
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.notes.push_back(name + ": best CV loss " + fd(res.best_loss));
  }
  c.emit(c.dir() / "summary.csv", summary.str());
  c.emit(c.dir() / "timing.json", timing.dump(2) + "\n", true);
}

// ------------------------------------------------------------------- train

struct ModelRuns {
  std::string name;
  std::vector<std::string> features;
  std::vector<bool> ok;
  std::vector<std::string> error;
  std::vector<std::vector<double>> val_p, test_p, val_raw, test_raw;
  std::vector<std::shared_ptr<models::Classifier>> model;
};

void stage_train(Ctx& c) {
  for (const char* f : {"train.csv", "val.csv", "test.csv"}) c.require(c.in(Stage::Engineer, f), Stage::Engineer);
  const auto train = read_feature_matrix(c.in(Stage::Engineer, "train.csv"));
  const auto val = read_feature_matrix(c.in(Stage::Engineer, "val.csv"));
  const auto test = read_feature_matrix(c.in(Stage::Engineer, "test.csv"));
  const auto seeds = training_seeds(c.cfg);
  fs::create_directories(c.dir() / "models");
  json timing = json::object();

  std::map<Family, ModelRuns> runs;
  for (auto f : c.cfg.fitted_families()) {
    const std::string name = models::to_string(f);
    const auto start = std::chrono::steady_clock::now();
    const auto best_path = c.in(Stage::Tune, name + "_best.json");
    c.require(best_path, Stage::Tune);
    const auto hp = json::parse(read_text(best_path)).at("hyperparameters");
    ModelRuns mr;
    mr.name = name;
    mr.features = selected_features(c, f);
    evaluation::SplitData d;
    const auto tr = train.select_features(mr.features), va = val.select_features(mr.features),
               te = test.select_features(mr.features);
    d.X_train = tr.values, d.X_val = va.values, d.X_test = te.values;
    d.y_train = tr.labels, d.y_val = va.labels, d.y_test = te.labels;
    const auto results = evaluation::seeded_retrain(f, hp, d, seeds, c.exec, true);
    for (const auto& r : results) {
      mr.ok.push_back(r.ok);
      mr.error.push_back(r.error);
      mr.test_p.push_back(r.test_proba);
      mr.val_raw.push_back(r.val_raw);
      mr.test_raw.push_back(r.test_raw);
      mr.val_p.push_back(r.ok ? r.model->predict_proba(d.X_val) : std::vector<double>{});
      mr.model.push_back(r.model);
    }
    runs[f] = std::move(mr);
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  std::vector<ModelRuns*> order;
  ModelRuns ens;
  for (auto f : c.cfg.families) {
    if (f != Family::Ensemble) {
      order.push_back(&runs.at(f));
      continue;
    }
    ens.name = "ensemble";
    const auto members = c.cfg.ensemble_members();
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      bool ok = true;
      for (auto m : members) ok = ok && runs.at(m).ok[k];
      ens.ok.push_back(ok);
      ens.error.push_back(ok ? "" : "a member failed at this seed");
      ens.model.push_back(nullptr);
      if (!ok) {
        for (auto* v : {&ens.val_p, &ens.test_p, &ens.val_raw, &ens.test_raw}) v->emplace_back();
        continue;
      }
      std::vector<std::vector<double>> vp, tp;
      for (auto m : members) {
        vp.push_back(runs.at(m).val_p[k]);
        tp.push_back(runs.at(m).test_p[k]);
      }
      ens.val_p.push_back(models::ensemble_mean(vp));
      ens.test_p.push_back(models::ensemble_mean(tp));
      std::vector<double> vr, tr;
      for (double p : ens.val_p.back()) vr.push_back(models::clamped_logit(p));
      for (double p : ens.test_p.back()) tr.push_back(models::clamped_logit(p));
      ens.val_raw.push_back(vr);
      ens.test_raw.push_back(tr);
    }
    order.push_back(&ens);
  }

  CsvWriter runs_csv({"model", "seed_index", "seed", "ok", "f1", "auc", "normed_mcc", "brier", "error"});
  CsvWriter scores({"model", "seed_index", "split", "donor_id", "label", "raw", "proba"});
  CsvWriter best({"model", "seed_index", "seed", "val_normed_mcc"});
  for (auto* mr : order) {
    std::size_t best_k = seeds.size();
    double best_mcc = -1;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (!mr->ok[k]) {
        runs_csv.row({mr->name, std::to_string(k), std::to_string(seeds[k]), "0", "", "", "", "", mr->error[k]});
        continue;
      }
      const auto m = evaluation::evaluate_predictions(test.labels, mr->test_p[k]);
      runs_csv.row({mr->name, std::to_string(k), std::to_string(seeds[k]), "1", fd(m.f1), fd(m.auc),
                    fd(m.normed_mcc), fd(calibration::brier(mr->test_p[k], test.labels)), ""});
      for (std::size_t i = 0; i < val.rows(); ++i)
        scores.row({mr->name, std::to_string(k), "val", val.donor_ids[i], std::to_string(val.labels[i]),
                    fd(mr->val_raw[k][i]), fd(mr->val_p[k][i])});
      for (std::size_t i = 0; i < test.rows(); ++i)
        scores.row({mr->name, std::to_string(k), "test", test.donor_ids[i], std::to_string(test.labels[i]),
                    fd(mr->test_raw[k][i]), fd(mr->test_p[k][i])});
      const double vm = evaluation::normed_mcc(evaluation::confusion(val.labels, mr->val_p[k]));
      if (vm > best_mcc) best_mcc = vm, best_k = k;
    }
    if (best_k == seeds.size()) throw FitError("every seed of " + mr->name + " failed");
    best.row({mr->name, std::to_string(best_k), std::to_string(seeds[best_k]), fd(best_mcc)});

    json model_json;
    if (mr == &ens) {
      models::EnsembleModel em;
      for (auto m : c.cfg.ensemble_members())
        em.add(models::classifier_from_json(runs.at(m).model[best_k]->to_json()), runs.at(m).features);
      model_json = em.to_json();
    } else {
      model_json = {{"features", mr->features}, {"model", mr->model[best_k]->to_json()}};
    }
    c.emit(c.dir() / "models" / (mr->name + ".json"), model_json.dump() + "\n");
  }
  c.emit(c.dir() / "runs.csv", runs_csv.str());
  c.emit(c.dir() / "scores.csv", scores.str());
  c.emit(c.dir() / "best_seeds.csv", best.str());
  c.emit(c.dir() / "timing.json", timing.dump(2) + "\n", true);
}

// ---------------------------------------------------------------- evaluate

struct ScoreRows {
  // model -> seed -> split -> (labels, raw, proba)
  struct Block {
    Labels y;
    std::vector<double> raw, p;
  };
  std::map<std::string, std::map<std::size_t, std::map<std::string, Block>>> data;
};

ScoreRows load_scores(const fs::path& p) {
  const auto t = read_csv(p);
  const auto cm = t.column("model"), cs = t.column("seed_index"), csp = t.column("split"), cl = t.column("label"),
             cr = t.column("raw"), cp = t.column("proba");
  ScoreRows s;
  for (const auto& r : t.rows) {
    auto& b = s.data[r[cm]][std::stoul(r[cs])][r[csp]];
    b.y.push_back(std::stoi(r[cl]));
    b.raw.push_back(parse_double(r[cr]));
    b.p.push_back(parse_double(r[cp]));
  }
  return s;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> m{"f1", "auc", "normed_mcc"};
  return m;
}

void stage_evaluate(Ctx& c) {
  const auto runs_path = c.in(Stage::Train, "runs.csv");
  c.require(runs_path, Stage::Train);
  c.require(c.in(Stage::Train, "scores.csv"), Stage::Train);
  const auto t = read_csv(runs_path);
  const auto names = c.cfg.model_names();
  std::map<std::string, std::map<std::string, std::vector<double>>> vals;  // metric -> model -> values
  CsvWriter longf({"model", "seed", "metric", "value"});
  for (const auto& r : t.rows) {
    if (r[t.column("ok")] != "1") continue;
    for (const auto& m : {std::string("f1"), std::string("auc"), std::string("normed_mcc"), std::string("brier")}) {
      longf.row({r[t.column("model")], r[t.column("seed_index")], m, r[t.column(m)]});
      vals[m][r[t.column("model")]].push_back(parse_double(r[t.column(m)]));
    }
  }
  c.emit(c.dir() / "metrics_long.csv", longf.str());

  CsvWriter table({"model", "F1", "AUC", "normed MCC"});
  CsvWriter table_sd({"model", "F1", "AUC", "normed MCC", "n_seeds"});
  for (const auto& n : names) {
    table.row({n, fd(mean_of(vals["f1"][n])), fd(mean_of(vals["auc"][n])), fd(mean_of(vals["normed_mcc"][n]))});
    table_sd.row({n, fd(sd_of(vals["f1"][n])), fd(sd_of(vals["auc"][n])), fd(sd_of(vals["normed_mcc"][n])),
                  std::to_string(vals["f1"][n].size())});
  }
  c.emit(c.dir() / "table2.csv", table.str());
  c.emit(c.dir() / "table2_sd.csv", table_sd.str());

  CsvWriter anova({"metric", "F", "p", "df_between", "df_within"});
  for (const auto& m : metric_names()) {
    std::vector<std::vector<double>> groups;
    for (const auto& n : names) groups.push_back(vals[m][n]);
    if (names.size() < 2) {
      c.notes.push_back("a single model: no group comparisons");
      break;
    }
    const auto a = evaluation::anova_oneway(groups);
    anova.row({m, fd(a.F), fd(a.p), fd(a.df_between), fd(a.df_within)});
    const auto tk = evaluation::tukey_hsd(groups, names);
    CsvWriter pairs({"model_a", "model_b", "mean_diff", "q", "p_adj", "significant"});
    for (const auto& p : tk.pairs)
      pairs.row({names[p.i], names[p.j], fd(p.mean_diff), fd(p.q), fd(p.p_adj), p.significant ? "1" : "0"});
    c.emit(c.dir() / ("tukey_" + m + ".csv"), pairs.str());
  }
  c.emit(c.dir() / "anova.csv", anova.str());

  if (c.cfg.has_ensemble()) {
    const auto scores = load_scores(c.in(Stage::Train, "scores.csv"));
    CsvWriter eb({"seed_index", "ensemble_brier", "mean_member_brier", "ensemble_not_worse"});
    const auto& ens = scores.data.at("ensemble");
    for (const auto& [k, splits] : ens) {
      const auto& et = splits.at("test");
      const double e = calibration::brier(et.p, et.y);
      std::vector<double> member;
      for (auto m : c.cfg.ensemble_members()) {
        const auto& b = scores.data.at(models::to_string(m)).at(k).at("test");
        member.push_back(calibration::brier(b.p, b.y));
      }
      const double mm = mean_of(member);
      eb.row({std::to_string(k), fd(e), fd(mm), e <= mm ? "1" : "0"});
    }
    c.emit(c.dir() / "ensemble_brier.csv", eb.str());
  }
}

// --------------------------------------------------------------- calibrate

void stage_calibrate(Ctx& c) {
  const auto best_path = c.in(Stage::Train, "best_seeds.csv"), scores_path = c.in(Stage::Train, "scores.csv");
  c.require(best_path, Stage::Train);
  c.require(scores_path, Stage::Train);
  const auto best = read_csv(best_path);
  const auto scores = load_scores(scores_path);
  const std::size_t bins = c.cfg.calibration_bins;

  CsvWriter table({"model", "uncalibrated", "platt", "isotonic"});
  CsvWriter rel({"model", "method", "bin", "lo", "hi", "mean_pred", "frac_pos", "count"});
  CsvWriter dec({"model", "method", "calibration", "refinement", "within_spread", "covariance", "brier"});
  json calibrators = json::object();
  for (const auto& r : best.rows) {
    const std::string model = r[best.column("model")];
    const std::size_t k = std::stoul(r[best.column("seed_index")]);
    const auto& v = scores.data.at(model).at(k).at("val");
    const auto& t = scores.data.at(model).at(k).at("test");
    std::map<std::string, std::vector<double>> probs{{"uncalibrated", t.p}};
    json cal = {{"seed_index", k}};
    try {
      const auto platt = calibration::fit_platt(v.raw, v.y);
      probs["platt"] = calibration::apply_platt(platt, t.raw);
      cal["platt"] = platt.to_json();
    } catch (const Error& e) {
      c.notes.push_back(model + ": Platt scaling failed: " + e.what());
      cal["platt"] = {{"error", e.what()}};
    }
    const auto iso = calibration::fit_isotonic(v.raw, v.y);
    probs["isotonic"] = calibration::apply_isotonic(iso, t.raw);
    cal["isotonic"] = iso.to_json();
    calibrators[model] = cal;

    auto cell = [&](const std::string& m) {
      return probs.contains(m) ? fd(calibration::brier(probs[m], t.y)) : std::string();
    };
    table.row({model, cell("uncalibrated"), cell("platt"), cell("isotonic")});
    for (const std::string m : {"uncalibrated", "platt", "isotonic"}) {
      if (!probs.contains(m)) continue;
      const auto curve = calibration::reliability_curve(probs[m], t.y, bins);
      for (const auto& b : curve.bins)
        rel.row({model, m, std::to_string(b.bin), fd(b.lo), fd(b.hi), fd(b.mean_pred), fd(b.frac_pos),
                 std::to_string(b.count)});
      const auto d = calibration::brier_decomposition(probs[m], t.y, bins);
      dec.row({model, m, fd(d.calibration), fd(d.refinement), fd(d.within_spread), fd(d.covariance), fd(d.brier)});
    }
  }
  c.emit(c.dir() / "brier_table.csv", table.str());
  c.emit(c.dir() / "reliability.csv", rel.str());
  c.emit(c.dir() / "brier_decomposition.csv", dec.str());
  c.emit(c.dir() / "calibrators.json", calibrators.dump(2) + "\n");
}

// ----------------------------------------------------------------- explain

void stage_explain(Ctx& c) {
  for (const char* f : {"train.csv", "test.csv", "test_unscaled.csv"})
    c.require(c.in(Stage::Engineer, f), Stage::Engineer);
  const auto train = read_feature_matrix(c.in(Stage::Engineer, "train.csv"));
  const auto test = read_feature_matrix(c.in(Stage::Engineer, "test.csv"));
  const auto test_raw = read_feature_matrix(c.in(Stage::Engineer, "test_unscaled.csv"));
  const auto& eb = c.cfg.explain;
  json timing = json::object();
  CsvWriter summary({"model", "samples", "features", "background", "permutations", "max_additivity_gap",
                     "max_standard_error"});

  for (auto f : c.cfg.families) {
    const std::string name = models::to_string(f);
    const auto start = std::chrono::steady_clock::now();
    const auto mp = c.in(Stage::Train, "models/" + name + ".json");
    c.require(mp, Stage::Train);
    const json mj = json::parse(read_text(mp));

    std::vector<std::string> feats;
    explain::PredictFn predict;
    std::shared_ptr<models::Classifier> single;
    std::shared_ptr<models::EnsembleModel> ensemble;
    if (f == Family::Ensemble) {
      ensemble = std::make_shared<models::EnsembleModel>(models::EnsembleModel::from_json(mj));
      for (const auto& m : ensemble->members())
        for (const auto& x : m.features)
          if (std::find(feats.begin(), feats.end(), x) == feats.end()) feats.push_back(x);
      // Union in engineered column order.
      std::vector<std::string> ordered;
      for (const auto& x : train.feature_names)
        if (std::find(feats.begin(), feats.end(), x) != feats.end()) ordered.push_back(x);
      feats = ordered;
      predict = [ensemble, feats](const Matrix& X) { return ensemble->predict_proba(X, feats); };
    } else {
      feats = mj.at("features").get<std::vector<std::string>>();
      single = models::classifier_from_json(mj.at("model"));
      predict = [single](const Matrix& X) { return single->predict_proba(X); };
    }

    const std::uint64_t seed = stream_seed(c.cfg.master_seed, tag::kExplain, family_index(f));
    const auto bg = explain::select_background(train.select_features(feats).values, eb.background, seed);
    // Seeded subsample of test rows, in matrix order.
    std::vector<std::size_t> rows(test.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (rows.size() > eb.max_samples) {
      Rng rng(seed, 0x5a);
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(eb.max_samples);
      std::sort(rows.begin(), rows.end());
    }
    const auto Xs = test.select_features(feats).select_rows(rows);
    const auto Xv = test_raw.select_features(feats).select_rows(rows);
    const auto attrs = explain::explain_rows(predict, Xs.values, bg, eb.n_permutations, seed, c.exec);
    const auto global = explain::aggregate_global(attrs, feats);

    CsvWriter g({"rank", "feature", "mean_abs_shap", "std_abs_shap"});
    const auto top = global.top(feats.size());
    for (std::size_t r = 0; r < top.size(); ++r)
      g.row({std::to_string(r + 1), feats[top[r]], fd(global.mean_abs[top[r]]), fd(global.std_abs[top[r]])});
    c.emit(c.dir() / (name + "_global.csv"), g.str());

    CsvWriter bw({"sample", "donor_id", "feature", "shap", "value"});
    const auto swarm = explain::export_beeswarm(attrs, Xv.values, feats);
    for (const auto& b : swarm)
      bw.row({std::to_string(b.sample), Xs.donor_ids[b.sample], b.feature, fd(b.phi), fd(b.value)});
    c.emit(c.dir() / (name + "_beeswarm.csv"), bw.str());

    double gap = 0, se = 0;
    for (const auto& a : attrs) {
      gap = std::max(gap, a.additivity_gap());
      for (double s : a.se) se = std::max(se, s);
    }
    summary.row({name, std::to_string(rows.size()), std::to_string(feats.size()), std::to_string(bg.rows()),
                 std::to_string(eb.n_permutations), fd(gap), fd(se)});
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  c.emit(c.dir() / "summary.csv", summary.str());
  c.emit(c.dir() / "timing.json", timing.dump(2) + "\n", true);
}

// ------------------------------------------------------------------ report

void stage_report(Ctx& c) {
  const auto long_path = c.in(Stage::Evaluate, "metrics_long.csv");
  c.require(long_path, Stage::Evaluate);
  const auto names = c.cfg.model_names();
  std::vector<std::string> gaps, files;
  auto out = [&](const std::string& file, const std::string& text) {
    c.emit(c.dir() / file, text);
    files.push_back(file);
  };

  // Mean-metric table and distributions.
  c.require(c.in(Stage::Evaluate, "table2.csv"), Stage::Evaluate);
  out("table2.csv", read_text(c.in(Stage::Evaluate, "table2.csv")));
  const auto lt = read_csv(long_path);
  std::map<std::string, std::map<std::string, std::vector<double>>> vals;
  for (const auto& r : lt.rows)
    vals[r[lt.column("metric")]][r[lt.column("model")]].push_back(parse_double(r[lt.column("value")]));
  const std::map<std::string, std::string> label{{"f1", "F1"}, {"auc", "AUC"}, {"normed_mcc", "normed MCC"}};
  std::size_t tukey_pairs = 0;
  for (const auto& m : metric_names()) {
    std::vector<std::vector<double>> groups;
    for (const auto& n : names) groups.push_back(vals[m][n]);
    out("boxplot_" + m + ".svg", boxplot_svg(label.at(m) + " on the test set across seeds", names, groups));

    const auto tp = c.in(Stage::Evaluate, "tukey_" + m + ".csv");
    if (!fs::exists(tp)) {
      gaps.push_back("tukey " + m + ": not available");
      continue;
    }
    c.require(tp, Stage::Evaluate);
    const auto t = read_csv(tp);
    std::vector<std::vector<double>> p(names.size(), std::vector<double>(names.size(), 1.0));
    auto idx = [&](const std::string& s) {
      return static_cast<std::size_t>(std::find(names.begin(), names.end(), s) - names.begin());
    };
    for (const auto& r : t.rows) {
      const auto i = idx(r[t.column("model_a")]), j = idx(r[t.column("model_b")]);
      p[i][j] = p[j][i] = parse_double(r[t.column("p_adj")]);
    }
    tukey_pairs = t.rows.size();
    out("tukey_" + m + ".svg", tukey_heatmap_svg("Tukey HSD, " + label.at(m), names, p));
  }

  // Calibration.
  const auto bt = c.in(Stage::Calibrate, "brier_table.csv");
  if (fs::exists(bt) && fs::exists(c.in(Stage::Calibrate, "reliability.csv"))) {
    c.require(bt, Stage::Calibrate);
    c.require(c.in(Stage::Calibrate, "reliability.csv"), Stage::Calibrate);
    out("brier_table.csv", read_text(bt));
    const auto rt = read_csv(c.in(Stage::Calibrate, "reliability.csv"));
    for (const auto& n : names) {
      std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
      for (const std::string m : {"uncalibrated", "platt", "isotonic"}) {
        std::vector<CurvePoint> pts;
        for (const auto& r : rt.rows)
          if (r[rt.column("model")] == n && r[rt.column("method")] == m)
            pts.push_back({parse_double(r[rt.column("mean_pred")]), parse_double(r[rt.column("frac_pos")]),
                           std::stoul(r[rt.column("count")])});
        if (!pts.empty()) curves.emplace_back(m, pts);
      }
      out("calibration_" + n + ".svg", calibration_svg("Reliability, " + n, curves));
    }
  } else {
    gaps.push_back("calibration: not run");
  }

  // SHAP.
  bool any_shap = false;
  CsvWriter top10({"model", "rank", "feature", "mean_abs_shap"});
  for (const auto& n : names) {
    const auto gp = c.in(Stage::Explain, n + "_global.csv"), bp = c.in(Stage::Explain, n + "_beeswarm.csv");
    if (!fs::exists(gp) || !fs::exists(bp)) continue;
    any_shap = true;
    c.require(gp, Stage::Explain);
    c.require(bp, Stage::Explain);
    const auto g = read_csv(gp);
    std::vector<std::string> feats;
    std::vector<double> mabs;
    for (std::size_t r = 0; r < g.rows.size() && r < 10; ++r) {
      feats.push_back(g.rows[r][g.column("feature")]);
      mabs.push_back(parse_double(g.rows[r][g.column("mean_abs_shap")]));
      top10.row({n, std::to_string(r + 1), feats.back(), g.rows[r][g.column("mean_abs_shap")]});
    }
    out("shap_bar_" + n + ".svg", shap_bar_svg("Top " + std::to_string(feats.size()) + " mean |SHAP|, " + n, feats, mabs));

    const auto b = read_csv(bp);
    std::vector<std::vector<std::pair<double, double>>> raw(feats.size());  // (phi, value)
    for (const auto& r : b.rows) {
      const auto it = std::find(feats.begin(), feats.end(), r[b.column("feature")]);
      if (it == feats.end()) continue;
      raw[static_cast<std::size_t>(it - feats.begin())].emplace_back(parse_double(r[b.column("shap")]),
                                                                      parse_double(r[b.column("value")]));
    }
    std::vector<std::vector<SwarmPoint>> pts(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
      std::vector<double> v;
      for (const auto& [phi, x] : raw[i]) v.push_back(x);
      std::sort(v.begin(), v.end());
      for (const auto& [phi, x] : raw[i]) {
        const auto lo = std::lower_bound(v.begin(), v.end(), x) - v.begin();
        const auto hi = std::upper_bound(v.begin(), v.end(), x) - v.begin();
        const double rank = v.size() > 1 ? (0.5 * static_cast<double>(lo + hi - 1)) / static_cast<double>(v.size() - 1) : 0.5;
        pts[i].push_back({phi, rank});
      }
    }
    out("shap_beeswarm_" + n + ".svg", beeswarm_svg("SHAP values, " + n, feats, pts));
  }
  if (any_shap) {
    out("shap_top10.csv", top10.str());
  } else {
    gaps.push_back("explain: not run");
  }

  std::string md = "# Donor kidney discard benchmark report\n\n";
  md += "Models: ";
  for (std::size_t i = 0; i < names.size(); ++i) md += (i ? ", " : "") + names[i];
  md += "\n\n## Mean test metrics\n\n| model | F1 | AUC | normed MCC |\n|---|---|---|---|\n";
  const auto t2 = read_csv(c.dir() / "table2.csv");
  for (const auto& r : t2.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %.4f |\n", r[0].c_str(), parse_double(r[1]),
                  parse_double(r[2]), parse_double(r[3]));
    md += buf;
  }
  md += "\n## Files\n\n";
  for (const auto& f : files) md += "- " + f + "\n";
  md += "\n## Gaps\n\n";
  if (gaps.empty()) md += "none\n";
  for (const auto& g : gaps) md += "- " + g + "\n";
  out("report.md", md);
  c.emit(c.dir() / "report.json",
         json{{"models", names}, {"tukey_pairs", tukey_pairs}, {"gaps", gaps}, {"files", files}}.dump(2) + "\n");
  for (const auto& g : gaps) c.notes.push_back(g);
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& cfg, Exec exec) {
  cfg.validate();
  Ctx c{cfg, exec, stage, {}, {}};
  fs::create_directories(c.dir());
  c.entry.config = cfg.to_json();
  const auto start = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::Synth: stage_synth(c); break;
    case Stage::Engineer: stage_engineer(c); break;
    case Stage::Select: stage_select(c); break;
    case Stage::Tune: stage_tune(c); break;
    case Stage::Train: stage_train(c); break;
    case Stage::Evaluate: stage_evaluate(c); break;
    case Stage::Calibrate: stage_calibrate(c); break;
    case Stage::Explain: stage_explain(c); break;
    case Stage::Report: stage_report(c); break;
  }
  c.entry.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto mpath = cfg.work_dir / paths::kManifest;
  auto manifest = RunManifest::load(mpath);
  manifest.stages[to_string(stage)] = c.entry;
  manifest.save(mpath);
  return {stage, c.entry, c.notes};
}

std::vector<StageResult> run_all(const PipelineConfig& cfg, Exec exec) {
  std::vector<StageResult> out;
  for (auto s : all_stages())
    if (cfg.stage_enabled(to_string(s))) out.push_back(run_stage(s, cfg, exec));
  return out;
}

}  // namespace kdisc::harness
