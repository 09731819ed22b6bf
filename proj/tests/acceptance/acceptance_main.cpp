// Acceptance driver: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kdisc/calibration.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/core/rng.hpp"
#include "kdisc/evaluation/metrics.hpp"
#include "kdisc/evaluation/stats.hpp"
#include "kdisc/explainability.hpp"
#include "kdisc/features/pipeline.hpp"
#include "kdisc/harness.hpp"
#include "kdisc/models.hpp"
#include "kdisc/optimizer.hpp"
#include "kdisc/synthgen.hpp"

using namespace kdisc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

// ------------------------------------------------------------------ 1

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  Rng r(101);
  double worst = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const auto n = static_cast<std::size_t>(r.integer(2, 200));
    Labels y(n);
    std::vector<double> p(n);
    const bool coarse = inst % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = r.bernoulli(r.uniform(0.1, 0.9));
      p[i] = coarse ? static_cast<double>(r.integer(0, 20)) / 20.0 : r.uniform();
    }
    y[0] = 1;
    y[1] = 0;
    double tp = 0, tn = 0, fp = 0, fn = 0, se = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool hat = p[i] >= 0.5;
      tp += hat && y[i];
      tn += !hat && !y[i];
      fp += hat && !y[i];
      fn += !hat && y[i];
      se += (p[i] - y[i]) * (p[i] - y[i]);
    }
    const double f1_ref = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    const double mcc_ref = den > 0 ? (tp * tn - fp * fn) / std::sqrt(den) : 0.0;
    double num = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] && !y[j]) {
          pairs += 1;
          num += p[i] > p[j] ? 1.0 : p[i] == p[j] ? 0.5 : 0.0;
        }
    const auto c = evaluation::confusion(y, p);
    worst = std::max({worst, std::abs(evaluation::f1(c) - f1_ref), std::abs(evaluation::mcc(c) - mcc_ref),
                      std::abs(evaluation::normed_mcc(c) - (mcc_ref + 1) / 2),
                      std::abs(evaluation::auc(y, p) - num / pairs),
                      std::abs(calibration::brier(p, y) - se / static_cast<double>(n))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10, fmt("1000 instances, max abs diff %.2e, %.2f s", worst, secs)};
}

// ------------------------------------------------------------------ 2

Outcome trend_oracle() {
  const auto t0 = Clock::now();
  Rng r(202);
  double worst = 0;
  for (int s = 0; s < 10000; ++s) {
    const auto n = static_cast<std::size_t>(r.integer(2, 30));
    std::vector<double> t(n), y(n);
    double tt = r.uniform(0, 100);
    for (std::size_t i = 0; i < n; ++i) {
      tt += r.uniform(0.05, 12);
      t[i] = tt;
      y[i] = r.normal(2, 3);
    }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      A(static_cast<Eigen::Index>(i), 0) = 1;
      A(static_cast<Eigen::Index>(i), 1) = t[i] - t[0];
      b(static_cast<Eigen::Index>(i)) = y[i];
    }
    const Eigen::Vector2d x = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    const auto f = features::fit_trend(t, y);
    auto rel = [](double a, double e) { return std::abs(a - e) / std::max(1.0, std::abs(e)); };
    worst = std::max({worst, rel(f.intercept, x(0)), rel(f.slope, x(1))});
  }
  bool exact = true;
  for (int s = 0; s < 100; ++s) {
    std::vector<double> t, y;
    const double a = static_cast<double>(r.integer(-8, 8)), b = static_cast<double>(r.integer(-8, 8)) / 4;
    for (int i = 0; i < 6; ++i) {
      t.push_back(2.0 * i + 1);
      y.push_back(a + b * (t.back() - 1));
    }
    const auto f = features::fit_trend(t, y);
    exact &= f.intercept == a && f.slope == b;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && exact && secs < 5,
          fmt("10000 series, max rel diff %.2e, noiseless lines exact: %s, %.2f s", worst, exact ? "yes" : "no", secs)};
}

// ------------------------------------------------------------------ 3

Outcome imputation(const harness::PipelineConfig& cfg) {
  const auto t0 = Clock::now();
  synth::SynthConfig sc = cfg.synth;
  sc.n_donors = 2000;
  const auto cohort = make_labeled_cohort(synth::generate_cohort(sc).records);
  const auto split = split_cohort(cohort, cfg.master_seed);
  const auto p = features::FeaturePipeline::fit(cohort, split.train_ids, cfg.engineering, cfg.master_seed);
  std::size_t missing = 0, out_of_bounds = 0, checked = 0;
  for (const auto* ids : {&split.train_ids, &split.val_ids, &split.test_ids}) {
    const auto done = p.transform(cohort, *ids);
    const auto raw = p.encode(cohort, *ids);
    missing += done.values.count_missing();
    const auto& plan = p.plan();
    for (std::size_t c = 0; c < plan.columns.size(); ++c) {
      if (plan.columns[c].strategy != features::Strategy::NormalSample95) continue;
      const auto ri = raw.column_index(plan.input_features[c]);
      const auto ci = done.column_index(plan.input_features[c]);
      if (!ri || !ci) continue;
      double s = 0, s2 = 0, n = 0;
      for (std::size_t r = 0; r < raw.rows(); ++r)
        if (!is_missing(raw.values(r, *ri))) {
          const double v = raw.values(r, *ri);
          s += v, s2 += v * v, n += 1;
        }
      const double mu = s / n, sd = std::sqrt(std::max(0.0, s2 / n - mu * mu));
      for (std::size_t r = 0; r < raw.rows(); ++r)
        if (is_missing(raw.values(r, *ri))) {
          ++checked;
          const double v = done.values(r, *ci);
          out_of_bounds += v < mu - features::kCentral95 * sd - 1e-9 || v > mu + features::kCentral95 * sd + 1e-9;
        }
    }
  }
  const auto rounds = p.plan().rounds.size();
  const double secs = seconds_since(t0);
  return {missing == 0 && out_of_bounds == 0 && checked > 0 && p.plan().converged && rounds <= 10 && secs < 60,
          fmt("missing cells %zu, normal-sample draws %zu (%zu outside bounds), converged %s in %zu rounds, %.1f s",
              missing, checked, out_of_bounds, p.plan().converged ? "yes" : "no", rounds, secs)};
}

// ------------------------------------------------------------------ 4

Outcome selection_recovery() {
  const auto t0 = Clock::now();
  int good = 0;
  std::string per;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    synth::PlantedConfig pc;
    pc.n_rows = 1000;
    pc.seed = s;
    const auto d = synth::generate_planted(pc);
    optimize::SubsetEvalConfig ec;
    ec.space.family = models::Family::LogisticRegression;
    ec.space.fixed = {{"C", 1.0}, {"l1_ratio", 0.0}, {"max_epochs", 100}, {"tol", 1e-4}};
    ec.inner_trials = 1;
    ec.folds = 3;
    ec.lambda = 0.01;
    ec.fold_seed = s * 7 + 1;
    optimize::Nsga2Config nc;
    nc.budget = 400;
    nc.population = 50;
    const auto obj = [&](const optimize::Genome& g, std::uint64_t seed) {
      return optimize::evaluate_feature_subset(g, ec, d.X, d.y, seed);
    };
    const auto r = optimize::nsga2_feature_search(40, obj, nc, s);
    std::size_t informative = 0, total = 0;
    for (std::size_t j = 0; j < 40; ++j) {
      total += r.best[j] != 0;
      informative += r.best[j] != 0 && j < 10;
    }
    good += informative >= 8 && total <= 15;
    per += fmt("%s%zu/%zu", s > 1 ? " " : "", informative, total);
  }
  const double secs = seconds_since(t0);
  return {good >= 4 && secs < 600,
          fmt("%d/5 runs recover >= 8 of 10 with <= 15 total (informative/total: %s), %.1f s", good, per.c_str(),
              secs)};
}

// ------------------------------------------------------------------ 5

Outcome tpe_sanity() {
  const auto t0 = Clock::now();
  models::HyperParamSpace space;
  models::ParamDomain x;
  x.name = "x";
  x.lo = 0;
  x.hi = 10;
  space.params = {x};
  int good = 0;
  double worst = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    optimize::TpeConfig tc;
    tc.n_trials = 60;
    const auto r = optimize::tpe_optimize(
        space,
        [](const models::HyperParams& hp, std::uint64_t) {
          const double v = hp.at("x").get<double>();
          return optimize::HpOutcome((v - 3) * (v - 3));
        },
        tc, s);
    const double err = std::abs(r.best.at("x").get<double>() - 3.0);
    worst = std::max(worst, err);
    good += err <= 0.3;
  }
  const double secs = seconds_since(t0);
  return {good >= 9 && secs < 5, fmt("%d/10 runs with |x - 3| <= 0.3 (worst %.3f), %.2f s", good, worst, secs)};
}

// ------------------------------------------------------------------ 6, 7, 13 read a finished run

Outcome ensemble_dominance(const fs::path& work) {
  const auto t = read_csv(work / "evaluate" / "ensemble_brier.csv");
  std::size_t ok = 0;
  double worst_margin = -1e300;
  for (const auto& r : t.rows) {
    const double e = parse_double(r[t.column("ensemble_brier")]), m = parse_double(r[t.column("mean_member_brier")]);
    ok += e <= m;
    worst_margin = std::max(worst_margin, e - m);
  }
  return {!t.rows.empty() && ok == t.rows.size(),
          fmt("%zu/%zu seeds with ensemble Brier <= mean member Brier (largest ensemble - mean %.2e)", ok,
              t.rows.size(), worst_margin)};
}

Outcome calibration_direction(const fs::path& work) {
  const auto t = read_csv(work / "calibrate" / "brier_table.csv");
  std::map<std::string, std::pair<double, double>> bt;
  for (const auto& r : t.rows)
    bt[r[t.column("model")]] = {parse_double(r[t.column("uncalibrated")]), parse_double(r[t.column("platt")])};
  const bool rf = bt.count("rf") && bt["rf"].second <= bt["rf"].first;
  const bool mlp = bt.count("mlp") && bt["mlp"].second <= bt["mlp"].first;

  Rng r(707);
  const std::size_t n = 5000;
  std::vector<double> s(n);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = r.normal(0, 2);
    y[i] = r.bernoulli(models::sigmoid(s[i]));
  }
  const auto pp = calibration::fit_platt(s, y);
  const bool recovered = pp.a >= 0.9 && pp.a <= 1.1 && pp.b >= -0.1 && pp.b <= 0.1;
  return {rf && mlp && recovered,
          fmt("rf Brier %.4f -> %.4f, mlp %.4f -> %.4f after Platt; recovery a=%.3f b=%.3f", bt["rf"].first,
              bt["rf"].second, bt["mlp"].first, bt["mlp"].second, pp.a, pp.b)};
}

// ------------------------------------------------------------------ 8

double monotone_ls(const std::vector<double>& t, const std::vector<double>& w) {
  const std::size_t n = t.size();
  double best = 1e300;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> fitted(n);
    double prev = -1e300;
    bool mono = true;
    for (std::size_t start = 0, i = 0; i < n; ++i) {
      if (i != n - 1 && !(mask >> i & 1u)) continue;
      double sw = 0, st = 0;
      for (std::size_t k = start; k <= i; ++k) sw += w[k], st += w[k] * t[k];
      const double m = st / sw;
      mono &= m >= prev - 1e-15;
      prev = m;
      for (std::size_t k = start; k <= i; ++k) fitted[k] = m;
      start = i + 1;
    }
    if (!mono) continue;
    double sse = 0;
    for (std::size_t k = 0; k < n; ++k) sse += w[k] * (t[k] - fitted[k]) * (t[k] - fitted[k]);
    best = std::min(best, sse);
  }
  return best;
}

Outcome pava_optimality() {
  const auto t0 = Clock::now();
  std::size_t instances = 0, bad = 0;
  auto check = [&](const std::vector<double>& t, const std::vector<double>& w) {
    std::vector<double> s(t.size());
    std::iota(s.begin(), s.end(), 0.0);
    const auto m = calibration::fit_isotonic(s, t, w);
    double sse = 0;
    for (std::size_t i = 0; i < t.size(); ++i) sse += w[i] * (t[i] - m.apply(s[i])) * (t[i] - m.apply(s[i]));
    ++instances;
    bad += std::abs(sse - monotone_ls(t, w)) > 1e-10 * std::max(1.0, sse);
  };
  // Every 0/1 target pattern up to six points, unit weights.
  for (std::size_t n = 1; n <= 6; ++n)
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      std::vector<double> t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = bits >> i & 1u;
      check(t, std::vector<double>(n, 1.0));
    }
  Rng r(808);
  for (int rep = 0; rep < 5000; ++rep) {
    const auto n = static_cast<std::size_t>(r.integer(1, 6));
    std::vector<double> t(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = r.uniform();
      w[i] = r.uniform(0.1, 5);
    }
    check(t, w);
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 5, fmt("%zu instances, %zu mismatches, %.2f s", instances, bad, secs)};
}

// ------------------------------------------------------------------ 9

Outcome shap_correctness() {
  Rng r(909);
  const std::size_t M = 6;
  double worst_gap = 0, worst_z = 0, worst_closed = 0;
  std::size_t within = 0, total = 0;
  for (int model = 0; model < 50; ++model) {
    Eigen::VectorXd w(M);
    Eigen::MatrixXd A(M, M);
    for (std::size_t i = 0; i < M; ++i) {
      w(static_cast<Eigen::Index>(i)) = r.normal();
      for (std::size_t j = 0; j < M; ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.4 * r.normal();
    }
    const double b = r.normal(0, 0.5);
    const explain::PredictFn f = [=](const Matrix& X) {
      std::vector<double> out(X.rows());
      for (std::size_t i = 0; i < X.rows(); ++i) {
        Eigen::VectorXd x(M);
        for (std::size_t j = 0; j < M; ++j) x(static_cast<Eigen::Index>(j)) = X(i, j);
        out[i] = models::sigmoid(w.dot(x) + x.dot(A * x) + b);
      }
      return out;
    };
    Matrix bg(20, M), x(1, M);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < M; ++j) bg(i, j) = r.normal();
    for (std::size_t j = 0; j < M; ++j) x(0, j) = r.normal();
    const auto ex = explain::exact_shap(f, x.row(0), bg);
    const auto pm = explain::permutation_shap(f, x.row(0), bg, 64, static_cast<std::uint64_t>(model));
    worst_gap = std::max({worst_gap, ex.additivity_gap(), pm.additivity_gap()});
    for (std::size_t j = 0; j < M; ++j) {
      const double diff = std::abs(pm.phi[j] - ex.phi[j]);
      const double z = pm.se[j] > 0 ? diff / pm.se[j] : (diff < 1e-12 ? 0.0 : 1e300);
      ++total;
      within += z <= 3;
      worst_z = std::max(worst_z, z);
    }

    // Linear model: phi_i = w_i (x_i - mean background).
    const explain::PredictFn lin = [=](const Matrix& X) {
      std::vector<double> out(X.rows(), b);
      for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < M; ++j) out[i] += w(static_cast<Eigen::Index>(j)) * X(i, j);
      return out;
    };
    const auto le = explain::exact_shap(lin, x.row(0), bg);
    const auto lp = explain::permutation_shap(lin, x.row(0), bg, 3, 1);
    for (std::size_t j = 0; j < M; ++j) {
      double mean = 0;
      for (std::size_t i = 0; i < 20; ++i) mean += bg(i, j) / 20;
      const double closed = w(static_cast<Eigen::Index>(j)) * (x(0, j) - mean);
      worst_closed = std::max({worst_closed, std::abs(le.phi[j] - closed), std::abs(lp.phi[j] - closed)});
    }
  }
  const double frac = static_cast<double>(within) / static_cast<double>(total);
  return {worst_gap <= 1e-9 && frac >= 0.99 && worst_z < 5 && worst_closed <= 1e-12,
          fmt("additivity gap %.1e; %zu/%zu sampled values within 3 SE (max %.2f SE); closed form max diff %.1e",
              worst_gap, within, total, worst_z, worst_closed)};
}

// ------------------------------------------------------------------ 10

Outcome mlp_gradient() {
  Rng data(1010);
  const Eigen::Index n = 32, p = 5;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = data.normal();
    y(i) = data.bernoulli(0.3);
    w(i) = data.uniform(0.5, 2);
  }
  double worst = 0;
  int configs = 0;
  for (int layers = 1; layers <= 3; ++layers)
    for (bool bn : {false, true})
      for (double dropout : {0.0, 0.25}) {
        Rng init(static_cast<std::uint64_t>(layers * 10 + bn));
        models::MlpNet net(static_cast<std::size_t>(p), layers, 4 + layers, bn, dropout, init);
        std::vector<double> grad;
        Rng m0(5);
        net.loss(X, y, w, true, &m0, &grad);
        auto theta = net.params();
        double num = 0, den = 0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
          const double h = 1e-5 * std::max(1.0, std::abs(theta[k])), keep = theta[k];
          theta[k] = keep + h;
          net.set_params(theta);
          Rng m1(5);
          const double up = net.loss(X, y, w, true, &m1, nullptr);
          theta[k] = keep - h;
          net.set_params(theta);
          Rng m2(5);
          const double dn = net.loss(X, y, w, true, &m2, nullptr);
          theta[k] = keep;
          net.set_params(theta);
          const double fd = (up - dn) / (2 * h);
          num += (fd - grad[k]) * (fd - grad[k]);
          den += std::max(fd * fd, grad[k] * grad[k]);
        }
        worst = std::max(worst, std::sqrt(num / den));
        ++configs;
      }
  return {worst <= 1e-4, fmt("%d configurations, max relative error %.2e", configs, worst)};
}

// ------------------------------------------------------------------ 11

struct PermRef {
  double F = 0;
  bool anova_sig = false;
  std::vector<bool> pair_sig;
};

// Independent F and permutation distributions of F and of the max pairwise
// studentized statistic (single-step, like Tukey's procedure).
PermRef permutation_reference(const std::vector<std::vector<double>>& g, std::size_t B, Rng& r) {
  std::vector<double> pooled;
  std::vector<std::size_t> sizes;
  for (const auto& v : g) {
    pooled.insert(pooled.end(), v.begin(), v.end());
    sizes.push_back(v.size());
  }
  const std::size_t k = g.size(), N = pooled.size();
  auto stats = [&](const std::vector<double>& x, std::vector<double>* q) {
    std::vector<double> mean(k, 0);
    double grand = 0;
    for (std::size_t i = 0, off = 0; i < k; off += sizes[i], ++i) {
      for (std::size_t j = 0; j < sizes[i]; ++j) mean[i] += x[off + j];
      grand += mean[i];
      mean[i] /= static_cast<double>(sizes[i]);
    }
    grand /= static_cast<double>(N);
    double ssb = 0, ssw = 0;
    for (std::size_t i = 0, off = 0; i < k; off += sizes[i], ++i) {
      ssb += static_cast<double>(sizes[i]) * (mean[i] - grand) * (mean[i] - grand);
      for (std::size_t j = 0; j < sizes[i]; ++j) ssw += (x[off + j] - mean[i]) * (x[off + j] - mean[i]);
    }
    const double msw = ssw / static_cast<double>(N - k);
    if (q) {
      q->clear();
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
          q->push_back(std::abs(mean[a] - mean[b]) /
                       std::sqrt(msw / 2 * (1.0 / static_cast<double>(sizes[a]) + 1.0 / static_cast<double>(sizes[b]))));
    }
    return (ssb / static_cast<double>(k - 1)) / msw;
  };
  PermRef out;
  std::vector<double> q_obs, q;
  out.F = stats(pooled, &q_obs);
  std::size_t f_ge = 0;
  std::vector<std::size_t> max_ge(q_obs.size(), 0);
  auto perm = pooled;
  for (std::size_t b = 0; b < B; ++b) {
    r.shuffle(std::span<double>(perm));
    f_ge += stats(perm, &q) >= out.F;
    const double mx = *std::max_element(q.begin(), q.end());
    for (std::size_t p = 0; p < q_obs.size(); ++p) max_ge[p] += mx >= q_obs[p];
  }
  const double denom = static_cast<double>(B + 1);
  out.anova_sig = static_cast<double>(f_ge + 1) / denom < 0.05;
  for (auto c : max_ge) out.pair_sig.push_back(static_cast<double>(c + 1) / denom < 0.05);
  return out;
}

Outcome statistical_tests() {
  Rng r(1111);
  std::size_t decisions = 0, agree = 0;
  double worst_f = 0, worst_shift = 0;
  bool shift_same = true;
  for (int config = 0; config < 20; ++config) {
    const auto k = static_cast<std::size_t>(r.integer(3, 6));
    const double effect = r.uniform(0, 1.5);
    std::vector<std::vector<double>> g(k);
    for (auto& grp : g) {
      const double mu = r.normal(0, effect);
      const auto n = static_cast<std::size_t>(r.integer(5, 12));
      for (std::size_t i = 0; i < n; ++i) grp.push_back(0.7 + 0.05 * (mu + r.normal()));
    }
    const auto a = evaluation::anova_oneway(g);
    const auto t = evaluation::tukey_hsd(g);
    const auto ref = permutation_reference(g, 20000, r);
    worst_f = std::max(worst_f, std::abs(a.F - ref.F) / ref.F);
    ++decisions;
    agree += (a.p < 0.05) == ref.anova_sig;
    for (std::size_t p = 0; p < t.pairs.size(); ++p) {
      ++decisions;
      agree += t.pairs[p].significant == ref.pair_sig[p];
    }
    auto h = g;
    for (auto& grp : h)
      for (auto& v : grp) v += 0.25;
    const auto ah = evaluation::anova_oneway(h);
    const auto th = evaluation::tukey_hsd(h);
    worst_shift = std::max(worst_shift, std::abs(ah.F - a.F) / a.F);
    shift_same &= (ah.p < 0.05) == (a.p < 0.05);
    for (std::size_t p = 0; p < t.pairs.size(); ++p) shift_same &= th.pairs[p].significant == t.pairs[p].significant;
  }
  return {agree == decisions && worst_f <= 1e-10 && shift_same && worst_shift <= 1e-9,
          fmt("%zu/%zu decisions agree with the permutation reference, F rel diff %.1e; shift: decisions %s, F rel "
              "diff %.1e",
              agree, decisions, worst_f, shift_same ? "identical" : "differ", worst_shift)};
}

// ------------------------------------------------------------------ 12

std::map<std::string, std::string> csv_hashes(const fs::path& root, const harness::RunManifest& m) {
  std::set<std::string> volat;
  for (const auto& [name, e] : m.stages) volat.insert(e.volatile_outputs.begin(), e.volatile_outputs.end());
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const auto rel = fs::relative(entry.path(), root).generic_string();
    if (!volat.count(rel)) out[rel] = sha256_file(entry.path());
  }
  return out;
}

struct FullRuns {
  Outcome determinism;
  fs::path work;
  bool ok = false;
};

FullRuns full_runs(const harness::PipelineConfig& base, const fs::path& root) {
  FullRuns fr;
  double secs[2] = {0, 0};
  std::map<std::string, std::string> hashes[2];
  try {
    for (int run = 0; run < 2; ++run) {
      auto cfg = base;
      cfg.work_dir = root / (run == 0 ? "run1" : "run2");
      fs::remove_all(cfg.work_dir);
      set_jobs(run == 0 ? max_jobs() : 1);
      const auto t0 = Clock::now();
      harness::run_all(cfg, run == 0 ? Exec::Parallel : Exec::Serial);
      secs[run] = seconds_since(t0);
      hashes[run] = csv_hashes(cfg.work_dir, harness::RunManifest::load(cfg.work_dir / harness::paths::kManifest));
      std::printf("  full run %d (%s) finished in %.1f s\n", run + 1, run == 0 ? "parallel" : "serial", secs[run]);
      std::fflush(stdout);
    }
  } catch (const std::exception& e) {
    fr.determinism = {false, std::string("full run failed: ") + e.what()};
    return fr;
  }
  std::size_t differ = 0;
  std::string first;
  for (const auto& [path, h] : hashes[0]) {
    const auto it = hashes[1].find(path);
    if (it == hashes[1].end() || it->second != h) {
      ++differ;
      if (first.empty()) first = path;
    }
  }
  differ += hashes[1].size() > hashes[0].size() ? hashes[1].size() - hashes[0].size() : 0;
  fr.work = root / "run1";
  fr.ok = true;
  fr.determinism = {differ == 0 && !hashes[0].empty() && secs[0] < 900,
                    fmt("%zu CSVs compared, %zu differ%s%s; desk run %.0f s on %d worker(s)", hashes[0].size(), differ,
                        first.empty() ? "" : ", first ", first.c_str(), secs[0], max_jobs())};
  return fr;
}

// ------------------------------------------------------------------ 13

Outcome report_format(const fs::path& work) {
  const auto rep = work / "report";
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  const std::vector<std::string> models{"dt", "lr", "rf", "gbt", "mlp", "ensemble"};

  const auto t2 = read_csv(rep / "table2.csv");
  need(t2.header == std::vector<std::string>{"model", "F1", "AUC", "normed MCC"}, "table2 header");
  need(t2.rows.size() == 6, "table2 has six models");
  for (const std::string m : {"f1", "auc", "normed_mcc"}) {
    const auto box = read_file(rep / ("boxplot_" + m + ".svg"));
    need(box.starts_with("<svg") || box.starts_with("<?xml"), "boxplot_" + m + " is SVG");
    need(count_of(box, "class=\"box\"") == 6, "boxplot_" + m + " has six boxes");
    const auto tk = read_file(rep / ("tukey_" + m + ".svg"));
    need(count_of(tk, "class=\"pair\"") == 15, "tukey_" + m + " has 15 pair cells");
  }
  const auto bt = read_csv(rep / "brier_table.csv");
  need(bt.header == std::vector<std::string>{"model", "uncalibrated", "platt", "isotonic"}, "brier table header");
  need(bt.rows.size() == 6, "brier table has six models");
  for (const auto& r : bt.rows)
    for (std::size_t c = 1; c < 4; ++c) {
      const double v = parse_double(r[c]);
      need(std::isnan(v) || (v >= 0 && v <= 1), "brier values in [0, 1]");
    }
  const auto top = read_csv(rep / "shap_top10.csv");
  need(top.header == std::vector<std::string>{"model", "rank", "feature", "mean_abs_shap"}, "shap_top10 header");
  for (const auto& m : models) {
    std::size_t rows = 0;
    double prev = 1e300;
    for (const auto& r : top.rows)
      if (r[0] == m) {
        ++rows;
        const double v = parse_double(r[3]);
        need(v <= prev, "shap_top10 sorted for " + m);
        prev = v;
      }
    need(rows == 10, "ten SHAP features for " + m);
    need(count_of(read_file(rep / ("shap_bar_" + m + ".svg")), "class=\"bar\"") == 10, "shap_bar_" + m + " has ten bars");
    need(fs::exists(rep / ("shap_beeswarm_" + m + ".svg")), "beeswarm for " + m);
    need(fs::exists(rep / ("calibration_" + m + ".svg")), "calibration curve for " + m);
  }
  std::ifstream in(rep / "report.json");
  const auto rj = nlohmann::json::parse(in, nullptr, false);
  need(!rj.is_discarded() && rj.at("tukey_pairs").get<int>() == 15 && rj.at("gaps").empty(), "report.json summary");
  std::string detail = "six model distributions, 15-pair heatmaps, 3-column Brier table, top-10 SHAP";
  if (!problems.empty()) {
    detail = "failed: " + problems.front();
    if (problems.size() > 1) detail += fmt(" (+%zu more)", problems.size() - 1);
  }
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work = "acceptance_work", config = "configs/desk.json";
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory for the full runs");
  app.add_option("--config", config, "desk configuration")->check(CLI::ExistingFile);
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const auto cfg = harness::PipelineConfig::load(config);
  auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  bool all = true;
  auto report = [&](int c, const Outcome& o) {
    std::printf("criterion %2d: %s  %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all &= o.pass;
  };
  auto guarded = [&](int c, const std::function<Outcome()>& fn) {
    if (!want(c)) return;
    try {
      report(c, fn());
    } catch (const std::exception& e) {
      report(c, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, metric_oracles);
  guarded(2, trend_oracle);
  guarded(3, [&] { return imputation(cfg); });
  guarded(4, selection_recovery);
  guarded(5, tpe_sanity);
  FullRuns fr;
  if (want(6) || want(7) || want(12) || want(13)) fr = full_runs(cfg, work);
  for (int c : {6, 7}) {
    if (!want(c)) continue;
    if (!fr.ok) {
      report(c, {false, "no finished full run"});
      continue;
    }
    guarded(c, [&] { return c == 6 ? ensemble_dominance(fr.work) : calibration_direction(fr.work); });
  }
  guarded(8, pava_optimality);
  guarded(9, shap_correctness);
  guarded(10, mlp_gradient);
  guarded(11, statistical_tests);
  if (want(12)) report(12, fr.determinism);
  if (want(13)) {
    if (fr.ok)
      guarded(13, [&] { return report_format(fr.work); });
    else
      report(13, {false, "no finished full run"});
  }
  return all ? 0 : 1;
}
