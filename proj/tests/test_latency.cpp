// Metric checks against a literal transcription of the defining formulas.
#include "simt/latency.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

using simt::Schedule;

// Independent evaluator: direct formula transcription, no shared code with
// the library implementation.
namespace oracle {

double al(const std::vector<int>& g, int n) {
  const int m = static_cast<int>(g.size());
  int tau = m;
  for (int i = 1; i <= m; ++i)
    if (g[i - 1] == n) {
      tau = i;
      break;
    }
  double acc = 0.0;
  for (int i = 1; i <= tau; ++i) acc += g[i - 1] - (i - 1) / (double(m) / double(n));
  return acc / tau;
}

double cw(const std::vector<int>& g) {
  double num = 0.0;
  int den = 0;
  int prev = 0;
  for (int gi : g) {
    num += gi - prev;
    if (gi - prev > 0) ++den;
    prev = gi;
  }
  return num / den;
}

double ap(const std::vector<int>& g, int n) {
  double acc = 0.0;
  for (int gi : g) acc += gi;
  return acc / (double(n) * double(g.size()));
}

double dal(const std::vector<int>& g, int n) {
  const int m = static_cast<int>(g.size());
  std::vector<double> gp(m);
  for (int i = 1; i <= m; ++i)
    gp[i - 1] = i == 1 ? g[0] : std::max(double(g[i - 1]), gp[i - 2] + double(n) / m);
  double acc = 0.0;
  for (int i = 1; i <= m; ++i) acc += gp[i - 1] - (i - 1) / (double(m) / double(n));
  return acc / m;
}

}  // namespace oracle

namespace {

Schedule make(std::vector<int> g, int n) {
  Schedule s;
  s.g = std::move(g);
  s.n = n;
  return s;
}

}  // namespace

TEST_SUITE("latency") {
  TEST_CASE("brute-force oracle agreement on random schedules") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(1, 15);
    for (int rep = 0; rep < 1000; ++rep) {
      const int n = len(rng), m = len(rng);
      std::vector<int> g(m);
      std::uniform_int_distribution<int> gi(1, n);
      for (int& x : g) x = gi(rng);
      std::sort(g.begin(), g.end());
      Schedule s = make(g, n);
      REQUIRE(simt::average_lagging(s) == doctest::Approx(oracle::al(g, n)).epsilon(1e-9));
      REQUIRE(simt::consecutive_wait(s) == doctest::Approx(oracle::cw(g)).epsilon(1e-9));
      REQUIRE(simt::average_proportion(s) == doctest::Approx(oracle::ap(g, n)).epsilon(1e-9));
      REQUIRE(simt::differentiable_average_lagging(s) ==
              doctest::Approx(oracle::dal(g, n)).epsilon(1e-9));
    }
  }

  TEST_CASE("AL pinned values") {
    CHECK(simt::average_lagging(make({3, 4, 5, 6, 6, 6}, 6)) == doctest::Approx(3.0));
    for (int n = 1; n <= 12; ++n) {
      CHECK(simt::average_lagging(make(std::vector<int>(n, n), n)) == doctest::Approx(double(n)));
      for (int k = 1; k <= n; ++k)
        CHECK(simt::average_lagging(simt::wait_k_schedule(k, n, n)) == doctest::Approx(double(k)));
    }
  }

  TEST_CASE("CW pinned values") {
    CHECK(simt::consecutive_wait(make({1, 2, 3, 4}, 4)) == doctest::Approx(1.0));
    CHECK(simt::consecutive_wait(make({4, 4, 4, 4}, 4)) == doctest::Approx(4.0));
    CHECK(simt::consecutive_wait(make({2, 2, 4, 4}, 4)) == doctest::Approx(2.0));
  }

  TEST_CASE("AP pinned values") {
    CHECK(simt::average_proportion(make({4, 4, 4, 4}, 4)) == doctest::Approx(1.0));
    CHECK(simt::average_proportion(make({1, 2, 3, 4}, 4)) == doctest::Approx(0.625));
    CHECK(simt::average_proportion(make({3, 3, 3, 3}, 6)) == doctest::Approx(0.5));
  }

  TEST_CASE("DAL pinned values") {
    CHECK(simt::differentiable_average_lagging(make({4, 4, 4, 4}, 4)) == doctest::Approx(4.0));
    CHECK(simt::differentiable_average_lagging(make({1, 2, 3, 4}, 4)) == doctest::Approx(1.0));
    // Strictly one-step-increasing schedules with n = m: DAL equals AL equals k.
    for (int n = 2; n <= 10; ++n)
      for (int k = 1; k < n; ++k) {
        Schedule s = simt::wait_k_schedule(k, n, n);
        CHECK(simt::differentiable_average_lagging(s) == doctest::Approx(double(k)));
      }
  }

  TEST_CASE("corpus aggregation") {
    simt::LatencyReport a = simt::sentence_report(make({1, 2, 3, 4}, 4));
    simt::LatencyReport b = simt::sentence_report(make({3, 4, 5, 6, 6, 6}, 6));
    simt::CorpusLatency one = simt::corpus_report({a});
    CHECK(one.al == doctest::Approx(a.al));
    CHECK(one.early_stop_pct == 0.0);
    simt::CorpusLatency two = simt::corpus_report({a, b});
    simt::CorpusLatency swapped = simt::corpus_report({b, a});
    CHECK(two.al == doctest::Approx((a.al + b.al) / 2));
    CHECK(two.al == doctest::Approx(swapped.al));
    CHECK(two.dal == doctest::Approx(swapped.dal));
    CHECK_THROWS_AS(simt::corpus_report({}), std::invalid_argument);
  }

  TEST_CASE("csv formatting") {
    CHECK(simt::csv_header() == "policy,param,BLEU,AL,CW,AP,DAL,early_stop_pct");
    simt::CorpusLatency c;
    c.al = 3.0;
    c.cw = 1.005;
    c.ap = 0.625;
    c.dal = 3.5;
    c.early_stop_pct = 12.5;
    c.count = 8;
    CHECK(simt::csv_row("wait-info", "2.00", 59.4604, c) ==
          "wait-info,2.00,59.46,3.00,1.00,0.62,3.50,12.50");
  }
}
