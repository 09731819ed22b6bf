#include <doctest.h>

#include <cmath>
#include <limits>

#include "kdisc/calibration.hpp"
#include "kdisc/core/error.hpp"
#include "kdisc/core/rng.hpp"

using namespace kdisc;
using namespace kdisc::calibration;

namespace {

// Isotonic least squares by enumerating every split into contiguous blocks.
double best_monotone_sse(const std::vector<double>& t, const std::vector<double>& w) {
  const std::size_t n = t.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> fitted(n);
    double prev = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool cut = i == n - 1 || (mask >> i & 1u);
      if (!cut) continue;
      double sw = 0, st = 0;
      for (std::size_t k = start; k <= i; ++k) sw += w[k], st += w[k] * t[k];
      const double m = st / sw;
      if (m < prev - 1e-15) monotone = false;
      prev = m;
      for (std::size_t k = start; k <= i; ++k) fitted[k] = m;
      start = i + 1;
    }
    if (!monotone) continue;
    double sse = 0;
    for (std::size_t k = 0; k < n; ++k) sse += w[k] * (t[k] - fitted[k]) * (t[k] - fitted[k]);
    best = std::min(best, sse);
  }
  return best;
}

}  // namespace

TEST_CASE("brier score by hand") {
  const std::vector<double> p{0.9, 0.2, 0.5};
  CHECK(brier(p, Labels{1, 0, 1}) == doctest::Approx((0.01 + 0.04 + 0.25) / 3));
}

TEST_CASE("Platt scaling recovers a planted sigmoid") {
  Rng r(1);
  const std::size_t n = 20000;
  std::vector<double> s(n);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = r.normal(0, 2);
    y[i] = r.bernoulli(1 / (1 + std::exp(-(1.5 * s[i] - 0.5))));
  }
  const auto pp = fit_platt(s, y);
  CHECK(pp.a == doctest::Approx(1.5).epsilon(0.07));
  CHECK(pp.b == doctest::Approx(-0.5).epsilon(0.2));
  // Stationarity against the smoothed targets.
  double np = 0;
  for (int v : y) np += v;
  const double tp = (np + 1) / (np + 2), tn = 1 / (static_cast<double>(n) - np + 2);
  double g0 = 0, g1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pp.apply(s[i]) - (y[i] ? tp : tn);
    g0 += d;
    g1 += d * s[i];
  }
  CHECK(std::abs(g0) < 1e-6 * static_cast<double>(n));
  CHECK(std::abs(g1) < 1e-6 * static_cast<double>(n));
}

TEST_CASE("Platt input errors") {
  CHECK_THROWS_AS(fit_platt(std::vector<double>{0.1, 0.2}, Labels{1, 1}), DataError);
  CHECK_THROWS_AS(fit_platt(std::vector<double>{0.3, 0.3}, Labels{1, 0}), FitError);
}

TEST_CASE("isotonic fit matches the exhaustive optimum") {
  Rng r(2);
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = static_cast<std::size_t>(r.integer(1, 9));
    std::vector<double> s(n), t(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(i) + r.uniform(0, 0.5);  // distinct, sorted
      t[i] = r.bernoulli(0.3 + 0.05 * static_cast<double>(i)) ? 1.0 : 0.0;
      w[i] = rep % 2 ? 1.0 : r.uniform(0.2, 3.0);
    }
    const auto m = fit_isotonic(s, t, w);
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) sse += w[i] * (t[i] - m.apply(s[i])) * (t[i] - m.apply(s[i]));
    CHECK(sse == doctest::Approx(best_monotone_sse(t, w)).epsilon(1e-10));
    for (std::size_t k = 1; k < m.value.size(); ++k) CHECK(m.value[k - 1] <= m.value[k]);
  }
}

TEST_CASE("isotonic pools ties and interpolates between blocks") {
  const auto m = fit_isotonic(std::vector<double>{1, 1, 2, 3}, std::vector<double>{0, 1, 0, 1});
  // Tied scores first pool to 0.5, then violate against 0 at score 2.
  CHECK(m.apply(1) == doctest::Approx(1.0 / 3));
  CHECK(m.apply(3) == doctest::Approx(1.0));
  CHECK(m.apply(-5) == doctest::Approx(1.0 / 3));
  CHECK(m.apply(10) == doctest::Approx(1.0));
  const auto lin = fit_isotonic(std::vector<double>{0, 1}, std::vector<double>{0, 1});
  CHECK(lin.apply(0.25) == doctest::Approx(0.25));
}

TEST_CASE("reliability curve bins by hand") {
  const std::vector<double> p{0.05, 0.15, 0.12, 0.95, 1.0};
  const Labels y{0, 1, 0, 1, 1};
  const auto c = reliability_curve(p, y, 10);
  REQUIRE(c.bins.size() == 3);
  CHECK(c.bins[0].bin == 0);
  CHECK(c.bins[1].count == 2);
  CHECK(c.bins[1].frac_pos == doctest::Approx(0.5));
  CHECK(c.bins[1].mean_pred == doctest::Approx(0.135));
  CHECK(c.bins[2].bin == 9);
  CHECK(c.bins[2].count == 2);
  CHECK(c.empty_bins.size() == 7);
}

TEST_CASE("brier decomposition terms add up") {
  Rng r(3);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 300;
    std::vector<double> p(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = r.uniform();
      y[i] = r.bernoulli(p[i] * p[i]);
    }
    const auto d = brier_decomposition(p, y, static_cast<std::size_t>(r.integer(2, 20)));
    CHECK(d.brier == doctest::Approx(brier(p, y)).epsilon(1e-12));
    CHECK(d.recombined() == doctest::Approx(d.brier).epsilon(1e-10));
    CHECK(d.calibration >= 0);
    CHECK(d.refinement >= 0);
  }
}
