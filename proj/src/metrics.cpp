#include "xtbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xtb {

MassDistribution MassDistribution::from_map(const std::vector<double>& abs_map) {
  double total = 0.0;
  for (double v : abs_map) total += v;
  if (total <= 0.0) throw std::invalid_argument("MassDistribution: zero total mass");
  MassDistribution d;
  for (size_t i = 0; i < abs_map.size(); ++i) {
    const double w = abs_map[i] / total;
    if (w >= 1e-12) {  // prune near-zero support for solver conditioning
      d.pixels.push_back(static_cast<int>(i));
      d.weights.push_back(w);
    }
  }
  double kept = std::accumulate(d.weights.begin(), d.weights.end(), 0.0);
  for (double& w : d.weights) w /= kept;
  return d;
}

MassDistribution MassDistribution::uniform_on_mask(const uint8_t* mask, int d) {
  MassDistribution m;
  for (int i = 0; i < d; ++i)
    if (mask[i]) m.pixels.push_back(i);
  if (m.pixels.empty()) throw std::invalid_argument("MassDistribution: empty mask");
  m.weights.assign(m.pixels.size(), 1.0 / static_cast<double>(m.pixels.size()));
  return m;
}

ScorePair emd_score(const std::vector<double>& map, const uint8_t* mask, int side) {
  const int d = side * side;
  std::vector<double> abs_map(map.size());
  double total = 0.0;
  for (size_t i = 0; i < map.size(); ++i) total += (abs_map[i] = std::fabs(map[i]));
  if (total == 0.0) return {0.0, true};
  const MassDistribution supply = MassDistribution::from_map(abs_map);
  const MassDistribution demand = MassDistribution::uniform_on_mask(mask, d);
  const double delta_max = std::sqrt(2.0) * (side - 1);
  const double cost = optimal_transport_cost(supply, demand, side);
  return {1.0 - cost / delta_max, false};
}

ScorePair ima_score(const std::vector<double>& map, const uint8_t* mask, int side) {
  double on_mask = 0.0, total = 0.0;
  for (size_t i = 0; i < map.size(); ++i) {
    const double v = std::fabs(map[i]);
    total += v;
    if (mask[i]) on_mask += v;
  }
  (void)side;
  if (total == 0.0) return {0.0, true};
  return {on_mask / total, false};
}

double precision_score(const std::vector<double>& map, const uint8_t* mask, int side) {
  const int d = side * side;
  int k = 0;
  for (int i = 0; i < d; ++i) k += mask[i] ? 1 : 0;
  if (k == 0) throw std::invalid_argument("precision_score: empty mask");
  std::vector<int> order(map.size());
  std::iota(order.begin(), order.end(), 0);
  // ties broken by row-major index (stable sort on descending |s|)
  std::stable_sort(order.begin(), order.end(), [&map](int a, int b) {
    return std::fabs(map[static_cast<size_t>(a)]) > std::fabs(map[static_cast<size_t>(b)]);
  });
  int hits = 0;
  for (int i = 0; i < k; ++i)
    if (mask[order[static_cast<size_t>(i)]]) ++hits;
  return static_cast<double>(hits) / k;
}

MetricResult score_map(const std::vector<double>& map, const uint8_t* mask, int side) {
  MetricResult r;
  const ScorePair e = emd_score(map, mask, side);
  const ScorePair i = ima_score(map, mask, side);
  r.emd = e.value;
  r.ima = i.value;
  r.degenerate = e.degenerate || i.degenerate;
  r.precision = precision_score(map, mask, side);
  return r;
}

}  // namespace xtb
