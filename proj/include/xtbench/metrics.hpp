#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xtbench/datagen.hpp"

namespace xtb {

// Discrete mass distribution on grid pixels (flat row-major indices).
struct MassDistribution {
  std::vector<int> pixels;
  std::vector<double> weights;  // nonnegative, sum 1

  static MassDistribution from_map(const std::vector<double>& abs_map);  // normalizes
  static MassDistribution uniform_on_mask(const uint8_t* mask, int d);
};

double euclidean_pixel_distance(int a, int b, int side);

// Exact minimum transport cost between equal-mass distributions under the
// Euclidean pixel ground metric (transportation simplex, no regularization).
double optimal_transport_cost(const MassDistribution& supply, const MassDistribution& demand,
                              int side);

struct MetricResult {
  double emd = 0.0;
  double ima = 0.0;
  double precision = 0.0;
  bool degenerate = false;  // all-zero importance map
  int sample_id = -1;
  std::string method_id;
};

struct ScorePair {
  double value = 0.0;
  bool degenerate = false;
};

ScorePair emd_score(const std::vector<double>& map, const uint8_t* mask, int side);
ScorePair ima_score(const std::vector<double>& map, const uint8_t* mask, int side);
double precision_score(const std::vector<double>& map, const uint8_t* mask, int side);

MetricResult score_map(const std::vector<double>& map, const uint8_t* mask, int side);

}  // namespace xtb
