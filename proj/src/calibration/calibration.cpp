#include "kdisc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdisc/core/error.hpp"

namespace kdisc::calibration {

double brier(std::span<const double> p, const Labels& y) {
  if (p.empty()) throw DataError("Brier score of an empty prediction set");
  if (p.size() != y.size()) throw DataError("labels and predictions differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DataError("probability outside [0, 1]");
    const double d = p[i] - y[i];
    s += d * d;
  }
  return s / static_cast<double>(p.size());
}

namespace {

double sig(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Negative log-likelihood of smoothed targets t under sigmoid(a s + b).
double platt_nll(std::span<const double> s, const std::vector<double>& t, double a, double b) {
  double f = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z = a * s[i] + b;
    // -[t log p + (1-t) log(1-p)] = log(1 + e^z) - t z
    const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    f += sp - t[i] * z;
  }
  return f;
}

}  // namespace

double PlattParams::apply(double s) const { return sig(a * s + b); }

nlohmann::json PlattParams::to_json() const { return {{"a", a}, {"b", b}, {"iterations", iterations}}; }

PlattParams fit_platt(std::span<const double> s, const Labels& y) {
  if (s.size() != y.size() || s.empty()) throw DataError("scores and labels differ in length or are empty");
  double n_pos = 0.0;
  for (int v : y) n_pos += v;
  const double n_neg = static_cast<double>(y.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw DataError("Platt scaling needs both classes");
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  if (*lo == *hi) throw FitError("Platt scaling is unidentifiable: all scores are equal");

  const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
  const double t_neg = 1.0 / (n_neg + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] ? t_pos : t_neg;

  PlattParams p;
  p.a = 0.0;
  p.b = std::log((n_pos + 1.0) / (n_neg + 1.0));
  double f = platt_nll(s, t, p.a, p.b);
  const double n = static_cast<double>(s.size());
  const double s_scale = std::max({1.0, std::abs(*lo), std::abs(*hi)});
  for (int it = 1; it <= 100; ++it) {
    double ga = 0.0, gb = 0.0, haa = 1e-12, hab = 0.0, hbb = 1e-12;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double q = sig(p.a * s[i] + p.b);
      const double r = q - t[i];
      const double w = q * (1.0 - q);
      ga += r * s[i];
      gb += r;
      haa += w * s[i] * s[i];
      hab += w * s[i];
      hbb += w;
    }
    p.iterations = it;
    if (std::max(std::abs(ga) / s_scale, std::abs(gb)) < 1e-10 * n) return p;
    const double det = haa * hbb - hab * hab;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(-hab * ga + haa * gb) / det;
    // Newton decrement below rounding of the objective: nothing left to gain.
    if (-(ga * da + gb * db) < 1e-14 * std::max(1.0, f)) return p;
    double step = 1.0;
    for (;;) {
      const double na = p.a + step * da, nb = p.b + step * db;
      const double nf = platt_nll(s, t, na, nb);
      if (nf <= f + 1e-4 * step * (ga * da + gb * db)) {
        p.a = na;
        p.b = nb;
        f = nf;
        break;
      }
      step /= 2.0;
      if (step < 1e-12) {
        // No further decrease possible at double precision: treat as converged.
        return p;
      }
    }
  }
  throw FitError("Platt scaling did not converge in 100 iterations (last a=" + std::to_string(p.a) +
                 ", b=" + std::to_string(p.b) + ")");
}

std::vector<double> apply_platt(const PlattParams& params, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = params.apply(scores[i]);
  return out;
}

double IsotonicMap::apply(double s) const {
  if (value.empty()) return 0.5;
  if (s <= x_lo.front()) return value.front();
  if (s >= x_hi.back()) return value.back();
  // Last block starting at or before s.
  const auto it = std::upper_bound(x_lo.begin(), x_lo.end(), s);
  const auto k = static_cast<std::size_t>(it - x_lo.begin()) - 1;
  if (s <= x_hi[k]) return value[k];
  const double span = x_lo[k + 1] - x_hi[k];
  const double frac = (s - x_hi[k]) / span;
  return value[k] + frac * (value[k + 1] - value[k]);
}

nlohmann::json IsotonicMap::to_json() const {
  return {{"x_lo", x_lo}, {"x_hi", x_hi}, {"value", value}};
}

IsotonicMap fit_isotonic(std::span<const double> scores, std::span<const double> targets,
                         std::span<const double> weights) {
  if (scores.size() != targets.size() || (!weights.empty() && weights.size() != scores.size()))
    throw DataError("isotonic inputs differ in length");
  if (scores.empty()) throw DataError("isotonic regression of an empty set");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  struct Block {
    double lo, hi, sum, weight;
    double mean() const { return sum / weight; }
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < idx.size();) {
    // Pool tied scores first.
    Block b{scores[idx[i]], scores[idx[i]], 0.0, 0.0};
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      const double w = weights.empty() ? 1.0 : weights[idx[j]];
      b.sum += w * targets[idx[j]];
      b.weight += w;
      ++j;
    }
    i = j;
    blocks.push_back(b);
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block last = blocks.back();
      blocks.pop_back();
      auto& prev = blocks.back();
      prev.hi = last.hi;
      prev.sum += last.sum;
      prev.weight += last.weight;
    }
  }
  IsotonicMap m;
  for (const auto& b : blocks) {
    m.x_lo.push_back(b.lo);
    m.x_hi.push_back(b.hi);
    m.value.push_back(b.mean());
  }
  return m;
}

IsotonicMap fit_isotonic(std::span<const double> scores, const Labels& y) {
  std::vector<double> t(y.begin(), y.end());
  return fit_isotonic(scores, t);
}

std::vector<double> apply_isotonic(const IsotonicMap& map, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = map.apply(scores[i]);
  return out;
}

namespace {

std::size_t bin_of(double p, std::size_t n_bins) {
  const auto b = static_cast<std::size_t>(p * static_cast<double>(n_bins));
  return std::min(b, n_bins - 1);
}

}  // namespace

ReliabilityCurve reliability_curve(std::span<const double> p, const Labels& y, std::size_t n_bins) {
  if (n_bins == 0) throw DataError("reliability curve needs at least one bin");
  if (p.size() != y.size()) throw DataError("labels and predictions differ in length");
  std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DataError("probability outside [0, 1]");
    const std::size_t b = bin_of(p[i], n_bins);
    sum_p[b] += p[i];
    sum_y[b] += y[i];
    ++count[b];
  }
  ReliabilityCurve c;
  c.n_bins = n_bins;
  const double width = 1.0 / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) {
      c.empty_bins.push_back(b);
      continue;
    }
    const double n = static_cast<double>(count[b]);
    c.bins.push_back({b, static_cast<double>(b) * width, static_cast<double>(b + 1) * width,
                      sum_p[b] / n, sum_y[b] / n, count[b]});
  }
  return c;
}

BrierDecomposition brier_decomposition(std::span<const double> p, const Labels& y, std::size_t n_bins) {
  const ReliabilityCurve c = reliability_curve(p, y, n_bins);
  std::vector<double> pbar(n_bins, 0.0), obar(n_bins, 0.0);
  for (const auto& b : c.bins) {
    pbar[b.bin] = b.mean_pred;
    obar[b.bin] = b.frac_pos;
  }
  BrierDecomposition d;
  const double N = static_cast<double>(p.size());
  for (const auto& b : c.bins) {
    const double n = static_cast<double>(b.count);
    d.calibration += n * (b.mean_pred - b.frac_pos) * (b.mean_pred - b.frac_pos);
    d.refinement += n * b.frac_pos * (1.0 - b.frac_pos);
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t b = bin_of(p[i], n_bins);
    const double dp = p[i] - pbar[b];
    d.within_spread += dp * dp;
    d.covariance += -2.0 * dp * (y[i] - obar[b]);
  }
  d.calibration /= N;
  d.refinement /= N;
  d.within_spread /= N;
  d.covariance /= N;
  d.brier = brier(p, y);
  return d;
}

}  // namespace kdisc::calibration
