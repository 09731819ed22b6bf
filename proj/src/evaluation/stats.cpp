#include "kdisc/evaluation/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kdisc/core/error.hpp"

namespace kdisc::evaluation {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(range of k iid standard normals < w).
double normal_range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  auto f = [&](double z) {
    const double d = norm_cdf(z) - norm_cdf(z - w);
    return d <= 0.0 ? 0.0 : norm_pdf(z) * std::pow(d, k - 1);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double v = k * GK::integrate(f, -9.0, 9.0 + w, 12, 1e-12);
  return std::min(1.0, std::max(0.0, v));
}

void check_groups(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw DataError("at least two groups are required");
  for (const auto& g : groups)
    if (g.size() < 2) throw DataError("every group needs at least two samples");
}

}  // namespace

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  check_groups(groups);
  // Work on deviations from the first sample so a common shift only enters
  // through one subtraction per value.
  const double ref = groups.front().front();
  double n_total = 0.0, grand = 0.0;
  std::vector<double> means;
  for (const auto& g : groups) {
    double s = 0.0;
    for (double v : g) s += v - ref;
    means.push_back(s / static_cast<double>(g.size()));
    grand += s;
    n_total += static_cast<double>(g.size());
  }
  grand /= n_total;
  AnovaResult r;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double d = means[i] - grand;
    r.ss_between += static_cast<double>(groups[i].size()) * d * d;
    for (double v : groups[i]) {
      const double e = (v - ref) - means[i];
      r.ss_within += e * e;
    }
  }
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = n_total - static_cast<double>(groups.size());
  r.ms_within = r.ss_within / r.df_within;
  const double ms_between = r.ss_between / r.df_between;
  if (r.ss_within == 0.0) {
    if (r.ss_between == 0.0) {
      r.F = 0.0;
      r.p = 1.0;
    } else {
      r.F = std::numeric_limits<double>::max();
      r.p = 0.0;
    }
    return r;
  }
  r.F = ms_between / r.ms_within;
  boost::math::fisher_f_distribution<double> dist(r.df_between, r.df_within);
  r.p = r.F <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, r.F));
  return r;
}

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw DataError("the studentized range needs k >= 2");
  if (!(q > 0.0)) return 0.0;
  if (!std::isfinite(q)) return 1.0;
  if (!std::isfinite(df) || df > 5000.0) return normal_range_cdf(q, k);
  if (df < 1.0) throw DataError("the studentized range needs df >= 1");
  const double half = df / 2.0;
  const double log_norm = std::log(2.0) + half * std::log(half) - std::lgamma(half);
  auto g = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_g = log_norm + (df - 1.0) * std::log(s) - half * s * s;
    return std::exp(log_g) * normal_range_cdf(q * s, k);
  };
  // The chi scale concentrates around 1 with spread ~ 1/sqrt(2 df).
  const double spread = 1.0 / std::sqrt(2.0 * df);
  const double hi = 1.0 + 40.0 * spread + 10.0;
  const double mid = std::max(0.05, 1.0 - 6.0 * spread);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double v = GK::integrate(g, 0.0, mid, 12, 1e-12) + GK::integrate(g, mid, 1.0 + 6.0 * spread, 12, 1e-12) +
             GK::integrate(g, 1.0 + 6.0 * spread, hi, 12, 1e-12);
  return std::min(1.0, std::max(0.0, v));
}

std::vector<std::vector<double>> TukeyTable::p_matrix() const {
  std::vector<std::vector<double>> m(names.size(), std::vector<double>(names.size(), 1.0));
  for (const auto& p : pairs) {
    m[p.i][p.j] = p.p_adj;
    m[p.j][p.i] = p.p_adj;
  }
  return m;
}

nlohmann::json TukeyTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : pairs)
    rows.push_back({{"group_a", names[p.i]},
                    {"group_b", names[p.j]},
                    {"mean_diff", p.mean_diff},
                    {"q", p.q},
                    {"p_adj", p.p_adj},
                    {"significant", p.significant}});
  return {{"alpha", alpha}, {"ms_within", ms_within}, {"df_within", df_within},
          {"groups", names}, {"pairs", rows}};
}

TukeyTable tukey_hsd(const std::vector<std::vector<double>>& groups, std::vector<std::string> names,
                     double alpha) {
  const AnovaResult a = anova_oneway(groups);
  TukeyTable t;
  if (names.empty())
    for (std::size_t i = 0; i < groups.size(); ++i) names.push_back("g" + std::to_string(i));
  if (names.size() != groups.size()) throw DataError("group names and groups differ in count");
  t.names = std::move(names);
  t.alpha = alpha;
  t.ms_within = a.ms_within;
  t.df_within = a.df_within;
  const double ref = groups.front().front();
  std::vector<double> means;
  for (const auto& g : groups) {
    double s = 0.0;
    for (double v : g) s += v - ref;
    means.push_back(s / static_cast<double>(g.size()));
  }
  const int k = static_cast<int>(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyPair p;
      p.i = i;
      p.j = j;
      p.mean_diff = means[i] - means[j];
      const double se = std::sqrt(a.ms_within / 2.0 *
                                  (1.0 / static_cast<double>(groups[i].size()) +
                                   1.0 / static_cast<double>(groups[j].size())));
      const double diff = std::abs(p.mean_diff);
      if (se == 0.0) {
        p.q = diff == 0.0 ? 0.0 : std::numeric_limits<double>::max();
        p.p_adj = diff == 0.0 ? 1.0 : 0.0;
      } else {
        p.q = diff / se;
        p.p_adj = std::min(1.0, std::max(0.0, 1.0 - studentized_range_cdf(p.q, k, a.df_within)));
      }
      p.significant = p.p_adj < alpha;
      t.pairs.push_back(p);
    }
  return t;
}

}  // namespace kdisc::evaluation
