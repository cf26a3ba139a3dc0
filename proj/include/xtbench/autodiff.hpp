#pragma once

#include <cstdint>
#include <vector>

#include "xtbench/kernels.hpp"
#include "xtbench/tensor.hpp"

namespace xtb {

enum class Op {
  Leaf,
  MatMul,
  AddBias,
  Relu,
  Conv2d,
  MaxPool2d,
  Softmax,
  CrossEntropy,
  Pick,
  Reshape,
};

// ReLU backward variants used by guided backprop / deconvolution.
enum class ReluRule { Plain, Guided, Deconv };

// Single-use forward tape. Nodes are appended in topological order and the
// recorded values are immutable afterwards, so several backward passes can
// run against one tape.
class Tape {
 public:
  int leaf(Tensor value);

  int matmul(int a, int b);
  int add_bias(int x, int bias);          // x[N,M] + bias[M] per row
  int relu(int x);
  int conv2d(int x, int w, int bias, const Conv2dAttrs& attrs);
  int maxpool2d(int x, const Pool2dAttrs& attrs);  // window clamps to input extent
  int softmax(int x);                     // rowwise over [N,M]
  int cross_entropy(int probs, std::vector<int> labels);  // mean -ln p[n,y_n]
  int pick(int x, int row, int col);      // scalar selection
  int reshape(int x, std::vector<int> shape);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  // Gradients of the scalar node `output` with respect to every node value.
  // Nodes not on a path to the output get zero gradient.
  std::vector<Tensor> backward(int output, ReluRule rule = ReluRule::Plain) const;

 private:
  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1, c = -1;
    Tensor value;
    Conv2dAttrs conv;
    Pool2dAttrs pool;
    std::vector<int> labels;
    std::vector<int> argmax;  // maxpool routing, one source index per output cell
    int pick_row = 0, pick_col = 0;
  };

  int push(Node n);
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
};

}  // namespace xtb
