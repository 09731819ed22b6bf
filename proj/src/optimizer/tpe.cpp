#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/optimizer.hpp"

namespace kdisc::optimize {

using nlohmann::json;
using Kind = models::ParamDomain::Kind;

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Bounds of the parameter in the space the kernels live in.
std::pair<double, double> t_bounds(const models::ParamDomain& d) {
  if (d.kind == Kind::Int) {
    const double s = d.step > 0 ? d.step : 1.0;
    return {d.lo - 0.5 * s, d.hi + 0.5 * s};
  }
  if (d.log) return {std::log(d.lo), std::log(d.hi)};
  return {d.lo, d.hi};
}

double to_t(const models::ParamDomain& d, double v) { return d.kind == Kind::Float && d.log ? std::log(v) : v; }
double from_t(const models::ParamDomain& d, double t) { return d.kind == Kind::Float && d.log ? std::exp(t) : t; }

}  // namespace

ParzenEstimator::ParzenEstimator(const models::ParamDomain& d, const std::vector<json>& obs) : domain(d) {
  if (d.kind == Kind::Categorical) {
    const double K = static_cast<double>(d.choices.size());
    cat_probs.assign(d.choices.size(), 1.0);
    for (const auto& o : obs) {
      const auto it = std::find(d.choices.begin(), d.choices.end(), o);
      if (it != d.choices.end()) cat_probs[static_cast<std::size_t>(it - d.choices.begin())] += 1.0;
    }
    for (auto& p : cat_probs) p /= static_cast<double>(obs.size()) + K;
    return;
  }
  const auto [low, high] = t_bounds(d);
  const double range = high - low;
  std::vector<double> pts;
  for (const auto& o : obs) pts.push_back(to_t(d, o.get<double>()));
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });

  const double n = static_cast<double>(pts.size());
  const double sigma_min = range / std::min(100.0, n + 1.0);
  mus.assign(pts.size(), 0.0);
  sigmas.assign(pts.size(), 0.0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double here = pts[order[r]];
    const double left = r == 0 ? low : pts[order[r - 1]];
    const double right = r + 1 == order.size() ? high : pts[order[r + 1]];
    mus[order[r]] = here;
    sigmas[order[r]] = std::clamp(std::max(here - left, right - here), sigma_min, range);
  }
  // Broad prior component keeps the density positive everywhere on the domain.
  mus.push_back(0.5 * (low + high));
  sigmas.push_back(range);
  weights.assign(mus.size(), 1.0 / static_cast<double>(mus.size()));
}

json ParzenEstimator::sample(Rng& rng) const {
  if (domain.kind == Kind::Categorical) {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i < cat_probs.size(); ++i) {
      acc += cat_probs[i];
      if (u < acc) return domain.choices[i];
    }
    return domain.choices.back();
  }
  const auto [low, high] = t_bounds(domain);
  double u = rng.uniform(), acc = 0.0;
  std::size_t k = mus.size() - 1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) {
      k = i;
      break;
    }
  }
  double t = 0.0;
  bool ok = false;
  for (int tries = 0; tries < 100 && !ok; ++tries) {
    t = rng.normal(mus[k], sigmas[k]);
    ok = t >= low && t <= high;
  }
  if (!ok) t = rng.uniform(low, high);
  return domain.snap(from_t(domain, t));
}

double ParzenEstimator::log_density(const json& v) const {
  if (domain.kind == Kind::Categorical) {
    const auto it = std::find(domain.choices.begin(), domain.choices.end(), v);
    if (it == domain.choices.end()) return -std::numeric_limits<double>::infinity();
    return std::log(cat_probs[static_cast<std::size_t>(it - domain.choices.begin())]);
  }
  const auto [low, high] = t_bounds(domain);
  const double x = v.get<double>();
  double dens = 0.0;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const double mu = mus[i], sd = sigmas[i];
    const double z_mass = norm_cdf((high - mu) / sd) - norm_cdf((low - mu) / sd);
    if (domain.kind == Kind::Int) {
      const double s = domain.step > 0 ? domain.step : 1.0;
      const double m = norm_cdf((x + 0.5 * s - mu) / sd) - norm_cdf((x - 0.5 * s - mu) / sd);
      dens += weights[i] * m / z_mass;
    } else {
      const double t = to_t(domain, x);
      const double z = (t - mu) / sd;
      dens += weights[i] * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI) * z_mass);
    }
  }
  return std::log(std::max(dens, std::numeric_limits<double>::min()));
}

TpeResult tpe_optimize(const models::HyperParamSpace& space, const HpObjective& objective, const TpeConfig& cfg,
                       std::uint64_t seed, TrialLedger* ledger, Exec exec) {
  if (cfg.n_trials < 1) throw ConfigError("TPE needs at least one trial");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ConfigError("TPE gamma must lie in (0, 1)");
  if (cfg.n_candidates < 1) throw ConfigError("TPE needs at least one candidate per step");

  TpeResult res;
  res.losses.resize(cfg.n_trials);
  res.points.resize(cfg.n_trials);
  std::vector<TrialRecord> records(cfg.n_trials);

  auto run = [&](std::size_t t) {
    const auto start = std::chrono::steady_clock::now();
    TrialRecord& r = records[t];
    r.index = t;
    r.kind = "hp-point";
    r.payload = {{"hp", res.points[t]}, {"sampler", t < cfg.n_startup ? "random" : "tpe"}};
    try {
      const HpOutcome o = objective(res.points[t], stream_seed(seed, 0x7be, t));
      r.fold_scores = o.fold_scores;
      if (!std::isfinite(o.loss)) {
        r.failed = true;
        r.error = "objective returned a non-finite loss";
        r.loss = cfg.failure_loss;
      } else {
        r.loss = o.loss;
      }
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      r.loss = cfg.failure_loss;
    }
    res.losses[t] = r.loss;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  // Startup: independent random points.
  const std::size_t n_startup = std::min(cfg.n_startup, cfg.n_trials);
  for (std::size_t t = 0; t < n_startup; ++t) {
    Rng rng(seed, 0x57a7, t);
    res.points[t] = space.sample(rng);
  }
  const auto ns = static_cast<long long>(n_startup);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long t = 0; t < ns; ++t) run(static_cast<std::size_t>(t));
  } else {
    for (long long t = 0; t < ns; ++t) run(static_cast<std::size_t>(t));
  }
  if (ledger)
    for (std::size_t t = 0; t < n_startup; ++t) ledger->append(records[t]);

  for (std::size_t t = n_startup; t < cfg.n_trials; ++t) {
    std::vector<std::size_t> order(t);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return res.losses[a] < res.losses[b]; });
    const auto n_good = static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(t)));

    std::vector<ParzenEstimator> good, bad;
    for (const auto& p : space.params) {
      std::vector<json> g_obs, b_obs;
      for (std::size_t r = 0; r < order.size(); ++r)
        (r < n_good ? g_obs : b_obs).push_back(res.points[order[r]].at(p.name));
      good.emplace_back(p, g_obs);
      bad.emplace_back(p, b_obs);
    }
    Rng rng(seed, 0x79e, t);
    double best_score = -std::numeric_limits<double>::infinity();
    models::HyperParams chosen;
    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
      models::HyperParams cand = space.fixed;
      double score = 0.0;
      for (std::size_t i = 0; i < space.params.size(); ++i) {
        const json v = good[i].sample(rng);
        score += good[i].log_density(v) - bad[i].log_density(v);
        cand[space.params[i].name] = v;
      }
      if (c == 0 || score > best_score) {
        best_score = score;
        chosen = std::move(cand);
      }
    }
    res.points[t] = std::move(chosen);
    run(t);
    if (ledger) ledger->append(records[t]);
  }

  res.best_trial = 0;
  for (std::size_t t = 1; t < cfg.n_trials; ++t)
    if (res.losses[t] < res.losses[res.best_trial]) res.best_trial = t;
  res.best = res.points[res.best_trial];
  res.best_loss = res.losses[res.best_trial];
  return res;
}

}  // namespace kdisc::optimize
