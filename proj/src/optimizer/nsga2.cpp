#include <algorithm>
#include <chrono>
#include <numeric>
#include <unordered_set>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/optimizer.hpp"

namespace kdisc::optimize {

std::string genome_string(const Genome& g) {
  std::string s(g.size(), '0');
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i]) s[i] = '1';
  return s;
}

Genome genome_from_string(const std::string& s) {
  Genome g(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw DataError("genome strings hold only 0 and 1");
    g[i] = s[i] == '1';
  }
  return g;
}

std::vector<std::size_t> selected_indices(const Genome& g) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i]) out.push_back(i);
  return out;
}

namespace {

struct Individual {
  Genome bits;
  double loss = 0.0;
  std::size_t trial = 0;
};

bool better(const Individual& a, const Individual& b) {
  return a.loss < b.loss || (a.loss == b.loss && a.trial < b.trial);
}

// Evaluates genomes[i] as trial first + i. The objective never aborts the
// search: a throwing evaluation is recorded with the worst loss.
std::vector<Individual> evaluate_batch(const std::vector<Genome>& genomes, std::size_t first,
                                       std::size_t generation, const GenomeObjective& objective,
                                       std::uint64_t seed, TrialLedger* ledger, Exec exec) {
  std::vector<Individual> out(genomes.size());
  std::vector<TrialRecord> records(genomes.size());
  auto one = [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    TrialRecord& r = records[i];
    r.index = first + i;
    r.kind = "genome";
    SubsetEvaluation ev;
    try {
      ev = objective(genomes[i], stream_seed(seed, 0x7e1a, r.index));
    } catch (const std::exception& e) {
      ev = SubsetEvaluation{};
      ev.n_selected = selected_indices(genomes[i]).size();
      ev.penalty = 0.0;
      ev.loss = 1.0;
      r.failed = true;
      r.error = e.what();
    }
    r.payload = {{"bits", genome_string(genomes[i])},
                 {"n_selected", ev.n_selected},
                 {"generation", generation},
                 {"hp_points", ev.hp_points}};
    r.fold_scores = ev.fold_scores;
    r.penalty = ev.penalty;
    r.loss = ev.loss;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out[i] = {genomes[i], ev.loss, r.index};
  };
  const auto n = static_cast<long long>(genomes.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  }
  if (ledger)
    for (const auto& r : records) ledger->append(r);
  return out;
}

}  // namespace

Nsga2Result nsga2_feature_search(std::size_t L, const GenomeObjective& objective, const Nsga2Config& cfg,
                                 std::uint64_t seed, TrialLedger* ledger, Exec exec) {
  if (cfg.population < 2) throw ConfigError("NSGA-II needs a population of at least 2");
  if (cfg.budget < cfg.population)
    throw ConfigError("selection budget " + std::to_string(cfg.budget) + " is smaller than the population " +
                      std::to_string(cfg.population));
  if (L == 0) throw ConfigError("genome length must be positive");
  const double mutation = cfg.mutation_rate > 0 ? cfg.mutation_rate : 1.0 / static_cast<double>(L);

  std::vector<Genome> init(cfg.population, Genome(L, 0));
  {
    Rng rng(seed, 0x1b17);
    for (auto& g : init)
      for (auto& b : g) b = rng.bernoulli(cfg.init_probability);
  }
  std::unordered_set<std::string> seen;
  for (const auto& g : init) seen.insert(genome_string(g));
  std::vector<Individual> pop = evaluate_batch(init, 0, 0, objective, seed, ledger, exec);
  std::size_t evaluated = pop.size();
  Individual best = *std::min_element(pop.begin(), pop.end(), better);

  std::size_t generation = 0;
  while (evaluated < cfg.budget) {
    ++generation;
    Rng rng(seed, 0x6a, generation);
    const std::size_t n_children = std::min(cfg.population, cfg.budget - evaluated);
    auto tournament = [&]() -> const Individual& {
      const auto& a = pop[rng.below(pop.size())];
      const auto& b = pop[rng.below(pop.size())];
      return better(a, b) ? a : b;
    };
    std::vector<Genome> children;
    children.reserve(n_children);
    for (std::size_t c = 0; c < n_children; ++c) {
      // Redraw children that repeat an already evaluated genome; the objective
      // is deterministic per genome so a repeat wastes budget. Gives up after
      // a bounded number of tries on tiny genomes.
      Genome child;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const Individual& p1 = tournament();
        const Individual& p2 = tournament();
        child = p1.bits;
        if (rng.bernoulli(cfg.crossover_rate))
          for (std::size_t i = 0; i < L; ++i)
            if (rng.bernoulli(0.5)) child[i] = p2.bits[i];
        for (std::size_t i = 0; i < L; ++i)
          if (rng.bernoulli(mutation)) child[i] = !child[i];
        if (!cfg.eliminate_duplicates || !seen.contains(genome_string(child))) break;
      }
      seen.insert(genome_string(child));
      children.push_back(std::move(child));
    }
    auto offspring = evaluate_batch(children, evaluated, generation, objective, seed, ledger, exec);
    evaluated += offspring.size();
    for (const auto& o : offspring)
      if (better(o, best)) best = o;

    // Elitist survival: the best `population` of parents and offspring.
    pop.insert(pop.end(), offspring.begin(), offspring.end());
    std::sort(pop.begin(), pop.end(), better);
    pop.resize(cfg.population);
  }

  Nsga2Result r;
  r.best = best.bits;
  r.best_loss = best.loss;
  r.best_trial = best.trial;
  r.evaluations = evaluated;
  r.generations = generation;
  return r;
}

}  // namespace kdisc::optimize
