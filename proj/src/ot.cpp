#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "xtbench/metrics.hpp"

namespace xtb {

namespace {

constexpr double kRedCostTol = 1e-11;

// Transportation simplex over an m x n cost matrix. The basis is kept as a
// spanning tree of the bipartite supply/demand graph; entering arcs use the
// most negative reduced cost and fall back to Bland's rule after a streak of
// degenerate pivots so the method cannot cycle.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand,
                   std::vector<double> cost)
      : a_(std::move(supply)), b_(std::move(demand)), c_(std::move(cost)),
        m_(static_cast<int>(a_.size())), n_(static_cast<int>(b_.size())) {}

  double solve() {
    init_northwest();
    const int max_iters = 200000;
    int degenerate_streak = 0;
    for (int iter = 0; iter < max_iters; ++iter) {
      compute_duals();
      const auto [ei, ej] = find_entering(degenerate_streak > m_ + n_);
      if (ei < 0) break;
      if (!pivot(ei, ej))
        ++degenerate_streak;
      else
        degenerate_streak = 0;
    }
    double total = 0.0;
    for (const Cell& cell : basis_) total += cell.flow * c_[idx(cell.i, cell.j)];
    return total;
  }

 private:
  struct Cell {
    int i, j;
    double flow;
  };

  size_t idx(int i, int j) const { return static_cast<size_t>(i) * n_ + j; }
  int row_node(int i) const { return i; }
  int col_node(int j) const { return m_ + j; }

  void init_northwest() {
    basis_.clear();
    in_basis_.assign(static_cast<size_t>(m_) * n_, 0);
    double ra = a_[0], cb = b_[0];
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(ra, cb);
      basis_.push_back({i, j, f});
      in_basis_[idx(i, j)] = 1;
      if (i == m_ - 1 && j == n_ - 1) break;
      if ((ra <= cb && i < m_ - 1) || j == n_ - 1) {
        cb -= ra;
        ra = a_[static_cast<size_t>(++i)];
      } else {
        ra -= cb;
        cb = b_[static_cast<size_t>(++j)];
      }
    }
    rebuild_adjacency();
  }

  void rebuild_adjacency() {
    adj_.assign(static_cast<size_t>(m_ + n_), {});
    for (int e = 0; e < static_cast<int>(basis_.size()); ++e) {
      adj_[static_cast<size_t>(row_node(basis_[e].i))].push_back(e);
      adj_[static_cast<size_t>(col_node(basis_[e].j))].push_back(e);
    }
  }

  void compute_duals() {
    u_.assign(static_cast<size_t>(m_), 0.0);
    v_.assign(static_cast<size_t>(n_), 0.0);
    std::vector<uint8_t> seen(static_cast<size_t>(m_ + n_), 0);
    std::vector<int> stack{row_node(0)};
    seen[0] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int e : adj_[static_cast<size_t>(node)]) {
        const Cell& cell = basis_[static_cast<size_t>(e)];
        const int other = node == row_node(cell.i) ? col_node(cell.j) : row_node(cell.i);
        if (seen[static_cast<size_t>(other)]) continue;
        seen[static_cast<size_t>(other)] = 1;
        if (other >= m_)
          v_[static_cast<size_t>(other - m_)] = c_[idx(cell.i, cell.j)] - u_[static_cast<size_t>(cell.i)];
        else
          u_[static_cast<size_t>(other)] = c_[idx(cell.i, cell.j)] - v_[static_cast<size_t>(cell.j)];
        stack.push_back(other);
      }
    }
  }

  std::pair<int, int> find_entering(bool bland) const {
    int bi = -1, bj = -1;
    double best = -kRedCostTol;
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (in_basis_[idx(i, j)]) continue;
        const double red = c_[idx(i, j)] - u_[static_cast<size_t>(i)] - v_[static_cast<size_t>(j)];
        if (red < best) {
          best = red;
          bi = i;
          bj = j;
          if (bland) return {bi, bj};
        }
      }
    return {bi, bj};
  }

  // Returns true if the pivot moved a positive amount of mass.
  bool pivot(int ei, int ej) {
    // Path through the tree from the entering column node to the entering
    // row node; cycle = entering arc + path.
    const int src = col_node(ej), dst = row_node(ei);
    std::vector<int> parent_edge(static_cast<size_t>(m_ + n_), -1);
    std::vector<int> parent_node(static_cast<size_t>(m_ + n_), -1);
    std::vector<uint8_t> seen(static_cast<size_t>(m_ + n_), 0);
    std::vector<int> stack{src};
    seen[static_cast<size_t>(src)] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node == dst) break;
      for (int e : adj_[static_cast<size_t>(node)]) {
        const Cell& cell = basis_[static_cast<size_t>(e)];
        const int other = node == row_node(cell.i) ? col_node(cell.j) : row_node(cell.i);
        if (seen[static_cast<size_t>(other)]) continue;
        seen[static_cast<size_t>(other)] = 1;
        parent_edge[static_cast<size_t>(other)] = e;
        parent_node[static_cast<size_t>(other)] = node;
        stack.push_back(other);
      }
    }
    if (!seen[static_cast<size_t>(dst)])
      throw std::logic_error("transport simplex: basis is not a spanning tree");

    // Edges on the path, starting adjacent to the entering arc's row end.
    std::vector<int> path;
    for (int node = dst; node != src; node = parent_node[static_cast<size_t>(node)])
      path.push_back(parent_edge[static_cast<size_t>(node)]);
    // Signs alternate around the cycle: entering arc +, then -,+,-,...
    // walking from dst back toward src.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (size_t k = 0; k < path.size(); k += 2) {
      const Cell& cell = basis_[static_cast<size_t>(path[k])];
      if (cell.flow < theta) {
        theta = cell.flow;
        leaving = path[k];
      }
    }
    if (leaving < 0) throw std::logic_error("transport simplex: no leaving arc");
    for (size_t k = 0; k < path.size(); ++k)
      basis_[static_cast<size_t>(path[k])].flow += (k % 2 == 0) ? -theta : theta;
    Cell& out = basis_[static_cast<size_t>(leaving)];
    in_basis_[idx(out.i, out.j)] = 0;
    in_basis_[idx(ei, ej)] = 1;
    out = {ei, ej, theta};
    rebuild_adjacency();
    return theta > 0.0;
  }

  std::vector<double> a_, b_, c_;
  int m_, n_;
  std::vector<Cell> basis_;
  std::vector<uint8_t> in_basis_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_, v_;
};

}  // namespace

double euclidean_pixel_distance(int a, int b, int side) {
  const double dr = a / side - b / side;
  const double dc = a % side - b % side;
  return std::sqrt(dr * dr + dc * dc);
}

double optimal_transport_cost(const MassDistribution& supply, const MassDistribution& demand,
                              int side) {
  if (supply.pixels.empty() || demand.pixels.empty())
    throw std::invalid_argument("optimal_transport_cost: empty support");
  if (supply.pixels.size() != supply.weights.size() ||
      demand.pixels.size() != demand.weights.size())
    throw std::invalid_argument("optimal_transport_cost: malformed distribution");
  double sa = 0.0, sb = 0.0;
  for (double w : supply.weights) {
    if (w < 0.0) throw std::invalid_argument("optimal_transport_cost: negative weight");
    sa += w;
  }
  for (double w : demand.weights) {
    if (w < 0.0) throw std::invalid_argument("optimal_transport_cost: negative weight");
    sb += w;
  }
  if (sa <= 0.0 || sb <= 0.0)
    throw std::invalid_argument("optimal_transport_cost: zero total mass");
  if (std::fabs(sa - sb) > 1e-9)
    throw std::invalid_argument("optimal_transport_cost: unequal masses");

  const int m = static_cast<int>(supply.pixels.size());
  const int n = static_cast<int>(demand.pixels.size());
  std::vector<double> b = demand.weights;
  const double rescale = sa / sb;  // absorb rounding in the demand side
  for (double& w : b) w *= rescale;
  std::vector<double> cost(static_cast<size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      cost[static_cast<size_t>(i) * n + j] =
          euclidean_pixel_distance(supply.pixels[static_cast<size_t>(i)],
                                   demand.pixels[static_cast<size_t>(j)], side);
  return TransportSimplex(supply.weights, std::move(b), std::move(cost)).solve();
}

}  // namespace xtb
