#pragma once

#include <algorithm>
#include <limits>
#include <vector>

// Brute-force transportation LP oracle: enumerate all candidate bases of
// m+n-1 arcs, solve each spanning tree by leaf elimination, keep the
// cheapest feasible vertex. Exact for instances with few support points.
inline double ot_bruteforce(const std::vector<double>& supply, const std::vector<double>& demand,
                            const std::vector<double>& cost) {
  const int m = static_cast<int>(supply.size());
  const int n = static_cast<int>(demand.size());
  const int arcs = m * n, basis_size = m + n - 1;
  std::vector<int> pick(static_cast<size_t>(arcs), 0);
  std::fill(pick.end() - basis_size, pick.end(), 1);  // sorted: all combinations
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<int> chosen;
    for (int a = 0; a < arcs; ++a)
      if (pick[static_cast<size_t>(a)]) chosen.push_back(a);
    std::vector<double> residual(static_cast<size_t>(m + n));
    for (int i = 0; i < m; ++i) residual[static_cast<size_t>(i)] = supply[static_cast<size_t>(i)];
    for (int j = 0; j < n; ++j)
      residual[static_cast<size_t>(m + j)] = -demand[static_cast<size_t>(j)];
    std::vector<double> flow(chosen.size(), 0.0);
    std::vector<bool> used(chosen.size(), false);
    bool feasible = true;
    for (int round = 0; round < basis_size && feasible; ++round) {
      int leaf_node = -1, leaf_arc = -1;
      for (int node = 0; node < m + n && leaf_node < 0; ++node) {
        int deg = 0, last = -1;
        for (size_t e = 0; e < chosen.size(); ++e) {
          if (used[e]) continue;
          const int i = chosen[e] / n, j = chosen[e] % n;
          if (node == i || node == m + j) {
            ++deg;
            last = static_cast<int>(e);
          }
        }
        if (deg == 1) {
          leaf_node = node;
          leaf_arc = last;
        }
      }
      if (leaf_arc < 0) {
        feasible = false;  // cycle or disconnected: not a basis tree
        break;
      }
      const int i = chosen[static_cast<size_t>(leaf_arc)] / n;
      const int j = chosen[static_cast<size_t>(leaf_arc)] % n;
      const double f = leaf_node < m ? residual[static_cast<size_t>(leaf_node)]
                                     : -residual[static_cast<size_t>(leaf_node)];
      if (f < -1e-10) {
        feasible = false;
        break;
      }
      flow[static_cast<size_t>(leaf_arc)] = f;
      used[static_cast<size_t>(leaf_arc)] = true;
      residual[static_cast<size_t>(i)] -= f;
      residual[static_cast<size_t>(m + j)] += f;
    }
    if (!feasible) continue;
    double total = 0.0;
    for (size_t e = 0; e < chosen.size(); ++e)
      total += flow[e] * cost[static_cast<size_t>(chosen[e])];
    best = std::min(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}
