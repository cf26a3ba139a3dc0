#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "xtbench/metrics.hpp"
#include "xtbench/rng.hpp"

using namespace xtb;

#include "ot_oracle.hpp"

namespace {

MassDistribution random_distribution(std::mt19937_64& rng, int count, int side) {
  MassDistribution d;
  std::uniform_real_distribution<double> uw(0.1, 1.0);
  std::vector<int> cells(static_cast<size_t>(side) * side);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    d.pixels.push_back(cells[static_cast<size_t>(i)]);
    d.weights.push_back(uw(rng));
    total += d.weights.back();
  }
  for (double& w : d.weights) w /= total;
  return d;
}

}  // namespace

TEST_CASE("transport cost matches the enumeration oracle on 200 small instances") {
  auto rng = make_rng(31);
  for (int inst = 0; inst < 200; ++inst) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int n = 1 + static_cast<int>(rng() % 4);
    const MassDistribution a = random_distribution(rng, m, 6);
    const MassDistribution b = random_distribution(rng, n, 6);
    std::vector<double> cost(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        cost[static_cast<size_t>(i) * n + j] =
            euclidean_pixel_distance(a.pixels[static_cast<size_t>(i)],
                                     b.pixels[static_cast<size_t>(j)], 6);
    const double got = optimal_transport_cost(a, b, 6);
    const double want = ot_bruteforce(a.weights, b.weights, cost);
    CHECK(std::fabs(got - want) < 1e-9);
  }
}

TEST_CASE("transport cost is a metric on distributions") {
  auto rng = make_rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const MassDistribution a = random_distribution(rng, 1 + static_cast<int>(rng() % 5), 8);
    const MassDistribution b = random_distribution(rng, 1 + static_cast<int>(rng() % 5), 8);
    const MassDistribution c = random_distribution(rng, 1 + static_cast<int>(rng() % 5), 8);
    const double ab = optimal_transport_cost(a, b, 8);
    const double ba = optimal_transport_cost(b, a, 8);
    const double aa = optimal_transport_cost(a, a, 8);
    const double bc = optimal_transport_cost(b, c, 8);
    const double ac = optimal_transport_cost(a, c, 8);
    CHECK(aa < 1e-9);                 // identity
    CHECK(std::fabs(ab - ba) < 1e-9); // symmetry
    CHECK(ac <= ab + bc + 1e-9);      // triangle
    CHECK(ab >= -1e-12);
  }
}

TEST_CASE("transport validates its inputs") {
  MassDistribution a;
  a.pixels = {0};
  a.weights = {1.0};
  MassDistribution bad;
  bad.pixels = {1};
  bad.weights = {0.5};  // unequal total mass
  CHECK_THROWS(optimal_transport_cost(a, bad, 4));
  MassDistribution neg;
  neg.pixels = {1, 2};
  neg.weights = {1.5, -0.5};
  CHECK_THROWS(optimal_transport_cost(a, neg, 4));
  CHECK_THROWS(optimal_transport_cost(a, MassDistribution{}, 4));
}

TEST_CASE("emd score identities") {
  const int side = 8, d = side * side;
  std::vector<uint8_t> mask(static_cast<size_t>(d), 0);
  for (int i : {9, 10, 11, 18}) mask[static_cast<size_t>(i)] = 1;

  SUBCASE("mask indicator scores exactly one") {
    std::vector<double> map(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) map[static_cast<size_t>(i)] = mask[static_cast<size_t>(i)];
    const ScorePair s = emd_score(map, mask.data(), side);
    CHECK_FALSE(s.degenerate);
    CHECK(s.value == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("mass at the opposite corner scores near the floor") {
    std::vector<double> map(static_cast<size_t>(d), 0.0);
    map[static_cast<size_t>(d - 1)] = 1.0;
    const ScorePair s = emd_score(map, mask.data(), side);
    CHECK(s.value < 0.3);
    CHECK(s.value >= 0.0);
  }
  SUBCASE("all-zero map is flagged degenerate with score zero") {
    const std::vector<double> map(static_cast<size_t>(d), 0.0);
    const ScorePair s = emd_score(map, mask.data(), side);
    CHECK(s.degenerate);
    CHECK(s.value == 0.0);
  }
  SUBCASE("moving mass farther from the mask never raises the score") {
    // one unit at increasing city-block distance along a row from the mask
    double prev = 2.0;
    for (int c = 3; c < 8; ++c) {
      std::vector<double> map(static_cast<size_t>(d), 0.0);
      map[static_cast<size_t>(1 * side + c)] = 1.0;
      const double v = emd_score(map, mask.data(), side).value;
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("importance mass accuracy and precision identities") {
  const int side = 8, d = side * side;
  std::vector<uint8_t> mask(static_cast<size_t>(d), 0);
  int k = 0;
  for (int i = 0; i < d; i += 7) {
    mask[static_cast<size_t>(i)] = 1;
    ++k;
  }

  SUBCASE("uniform map has mass fraction k/D") {
    const std::vector<double> uniform(static_cast<size_t>(d), 0.5);
    CHECK(ima_score(uniform, mask.data(), side).value ==
          doctest::Approx(static_cast<double>(k) / d).epsilon(1e-12));
  }
  SUBCASE("precision is 1 on the mask indicator and 0 off it") {
    std::vector<double> on(static_cast<size_t>(d), 0.0), off(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < d; ++i)
      (mask[static_cast<size_t>(i)] ? on : off)[static_cast<size_t>(i)] = 1.0;
    CHECK(precision_score(on, mask.data(), side) == 1.0);
    CHECK(precision_score(off, mask.data(), side) == 0.0);
  }
  SUBCASE("random maps average near k/D precision") {
    auto rng = make_rng(33);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int draws = 10000;
    double mean = 0.0;
    for (int t = 0; t < draws; ++t) {
      std::vector<double> map(static_cast<size_t>(d));
      for (double& v : map) v = u(rng);
      mean += precision_score(map, mask.data(), side);
    }
    mean /= draws;
    const double p = static_cast<double>(k) / d;
    // hypergeometric mean is k/D; bound via 3 standard errors of the estimate
    const double se = std::sqrt(p * (1 - p) / (draws * static_cast<double>(k)));
    CHECK(std::fabs(mean - p) <= 3 * se + 0.01);
  }
  SUBCASE("ties at the k-th score break in row-major order") {
    std::vector<double> map(static_cast<size_t>(d), 1.0);  // everything tied
    // the first k row-major pixels get picked
    std::vector<uint8_t> first(static_cast<size_t>(d), 0);
    for (int i = 0; i < k; ++i) first[static_cast<size_t>(i)] = 1;
    CHECK(precision_score(map, first.data(), side) == 1.0);
  }
}

TEST_CASE("all three metrics are invariant under positive scaling") {
  auto rng = make_rng(34);
  const int side = 8, d = side * side;
  std::vector<uint8_t> mask(static_cast<size_t>(d), 0);
  for (int i : {3, 12, 20, 33, 40}) mask[static_cast<size_t>(i)] = 1;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> map(static_cast<size_t>(d));
  for (double& v : map) v = normal(rng);
  const MetricResult base = score_map(map, mask.data(), side);
  for (double c : {1e-6, 3.0, 1e6}) {
    std::vector<double> scaled = map;
    for (double& v : scaled) v *= c;
    const MetricResult got = score_map(scaled, mask.data(), side);
    CHECK(got.emd == doctest::Approx(base.emd).epsilon(1e-9));
    CHECK(got.ima == doctest::Approx(base.ima).epsilon(1e-9));
    CHECK(got.precision == base.precision);
  }
}

TEST_CASE("emd stays within the unit interval on random maps") {
  auto rng = make_rng(35);
  const int side = 8, d = side * side;
  std::vector<uint8_t> mask(static_cast<size_t>(d), 0);
  mask[0] = 1;
  mask[63] = 1;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> map(static_cast<size_t>(d));
    for (double& v : map) v = normal(rng);
    const double v = emd_score(map, mask.data(), side).value;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("mass pruning drops only negligible support") {
  std::vector<double> m(16, 0.0);
  m[0] = 1.0;
  m[5] = 1e-14;  // below the relative pruning floor
  const MassDistribution d = MassDistribution::from_map(m);
  CHECK(d.pixels == std::vector<int>{0});
  CHECK(d.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(MassDistribution::from_map(std::vector<double>(16, 0.0)));
}
