#include "xtbench/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xtb {

namespace {
constexpr double kProbFloor = 1e-300;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.value = xtb::matmul(value(a), value(b));
  return push(std::move(n));
}

int Tape::add_bias(int x, int bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
    throw std::invalid_argument("add_bias: incompatible shapes " + xv.shape_str() + " + " +
                                bv.shape_str());
  Node n;
  n.op = Op::AddBias;
  n.a = x;
  n.b = bias;
  n.value = xv;
  for (int r = 0; r < xv.dim(0); ++r)
    for (int c = 0; c < xv.dim(1); ++c) n.value.at(r, c) += bv[static_cast<size_t>(c)];
  return push(std::move(n));
}

int Tape::relu(int x) {
  Node n;
  n.op = Op::Relu;
  n.a = x;
  n.value = value(x);
  for (double& v : n.value.vec()) v = std::max(v, 0.0);
  return push(std::move(n));
}

int Tape::conv2d(int x, int w, int bias, const Conv2dAttrs& attrs) {
  Node n;
  n.op = Op::Conv2d;
  n.a = x;
  n.b = w;
  n.c = bias;
  n.conv = attrs;
  n.value = xtb::conv2d(value(x), value(w), value(bias), attrs);
  return push(std::move(n));
}

int Tape::maxpool2d(int x, const Pool2dAttrs& attrs) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw std::invalid_argument("maxpool2d: expected [N,C,H,W]");
  if (attrs.kernel <= 0 || attrs.stride <= 0)
    throw std::invalid_argument("maxpool2d: bad attrs");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int kh = std::min(attrs.kernel, H), kw = std::min(attrs.kernel, W);
  const int Ho = (H - kh) / attrs.stride + 1;
  const int Wo = (W - kw) / attrs.stride + 1;
  Node n;
  n.op = Op::MaxPool2d;
  n.a = x;
  n.pool = attrs;
  n.value = Tensor({N, C, Ho, Wo});
  n.argmax.resize(n.value.size());
  for (int nc = 0; nc < N * C; ++nc) {
    const double* xp = xv.data() + static_cast<size_t>(nc) * H * W;
    double* yp = n.value.data() + static_cast<size_t>(nc) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        int best = -1;
        double bv = 0.0;
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const int idx = (oy * attrs.stride + ky) * W + ox * attrs.stride + kx;
            // first maximal element in row-major order wins ties
            if (best < 0 || xp[idx] > bv) {
              best = idx;
              bv = xp[idx];
            }
          }
        yp[static_cast<size_t>(oy) * Wo + ox] = bv;
        n.argmax[static_cast<size_t>(nc) * Ho * Wo + oy * Wo + ox] = nc * H * W + best;
      }
  }
  return push(std::move(n));
}

int Tape::softmax(int x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2) throw std::invalid_argument("softmax: expected [N,M]");
  Node n;
  n.op = Op::Softmax;
  n.a = x;
  n.value = xv;
  for (int r = 0; r < xv.dim(0); ++r) {
    double mx = xv.at(r, 0);
    for (int c = 1; c < xv.dim(1); ++c) mx = std::max(mx, xv.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < xv.dim(1); ++c) {
      n.value.at(r, c) = std::exp(xv.at(r, c) - mx);
      sum += n.value.at(r, c);
    }
    for (int c = 0; c < xv.dim(1); ++c) n.value.at(r, c) /= sum;
  }
  return push(std::move(n));
}

int Tape::cross_entropy(int probs, std::vector<int> labels) {
  const Tensor& pv = value(probs);
  if (pv.rank() != 2 || static_cast<size_t>(pv.dim(0)) != labels.size())
    throw std::invalid_argument("cross_entropy: probs " + pv.shape_str() + " vs " +
                                std::to_string(labels.size()) + " labels");
  Node n;
  n.op = Op::CrossEntropy;
  n.a = probs;
  n.labels = std::move(labels);
  double loss = 0.0;
  for (int r = 0; r < pv.dim(0); ++r)
    loss -= std::log(std::max(pv.at(r, n.labels[static_cast<size_t>(r)]), kProbFloor));
  n.value = Tensor({1}, {loss / pv.dim(0)});
  return push(std::move(n));
}

int Tape::pick(int x, int row, int col) {
  const Tensor& xv = value(x);
  if (xv.rank() != 2 || row >= xv.dim(0) || col >= xv.dim(1))
    throw std::invalid_argument("pick: out of range");
  Node n;
  n.op = Op::Pick;
  n.a = x;
  n.pick_row = row;
  n.pick_col = col;
  n.value = Tensor({1}, {xv.at(row, col)});
  return push(std::move(n));
}

int Tape::reshape(int x, std::vector<int> shape) {
  const Tensor& xv = value(x);
  Tensor v(std::move(shape), xv.vec());
  Node n;
  n.op = Op::Reshape;
  n.a = x;
  n.value = std::move(v);
  return push(std::move(n));
}

std::vector<Tensor> Tape::backward(int output, ReluRule rule) const {
  if (output < 0 || output >= num_nodes()) throw std::invalid_argument("backward: bad node id");
  if (value(output).size() != 1)
    throw std::invalid_argument("backward: output must be scalar, got " +
                                value(output).shape_str());
  std::vector<Tensor> grads(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i)
    grads[i] = Tensor(nodes_[i].value.shape(), 0.0);
  grads[static_cast<size_t>(output)][0] = 1.0;

  for (int id = output; id >= 0; --id) {
    const Node& n = node(id);
    const Tensor& g = grads[static_cast<size_t>(id)];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        Tensor& da = grads[static_cast<size_t>(n.a)];
        Tensor& db = grads[static_cast<size_t>(n.b)];
        const int m = a.dim(0), k = a.dim(1), p = b.dim(1);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < p; ++j) {
            const double gij = g.at(i, j);
            if (gij == 0.0) continue;
            for (int t = 0; t < k; ++t) {
              da.at(i, t) += gij * b.at(t, j);
              db.at(t, j) += gij * a.at(i, t);
            }
          }
        break;
      }
      case Op::AddBias: {
        Tensor& dx = grads[static_cast<size_t>(n.a)];
        Tensor& db = grads[static_cast<size_t>(n.b)];
        for (int r = 0; r < g.dim(0); ++r)
          for (int c = 0; c < g.dim(1); ++c) {
            dx.at(r, c) += g.at(r, c);
            db[static_cast<size_t>(c)] += g.at(r, c);
          }
        break;
      }
      case Op::Relu: {
        const Tensor& x = value(n.a);
        Tensor& dx = grads[static_cast<size_t>(n.a)];
        for (size_t i = 0; i < g.size(); ++i) {
          const double gi = g[i];
          switch (rule) {
            case ReluRule::Plain:
              if (x[i] > 0.0) dx[i] += gi;  // gradient at exactly 0 is 0
              break;
            case ReluRule::Guided:
              if (x[i] > 0.0 && gi > 0.0) dx[i] += gi;
              break;
            case ReluRule::Deconv:
              if (gi > 0.0) dx[i] += gi;
              break;
          }
        }
        break;
      }
      case Op::Conv2d: {
        Tensor dx, dw, dbias;
        conv2d_backward(value(n.a), value(n.b), n.conv, g, dx, dw, dbias);
        for (size_t i = 0; i < dx.size(); ++i) grads[static_cast<size_t>(n.a)][i] += dx[i];
        for (size_t i = 0; i < dw.size(); ++i) grads[static_cast<size_t>(n.b)][i] += dw[i];
        for (size_t i = 0; i < dbias.size(); ++i) grads[static_cast<size_t>(n.c)][i] += dbias[i];
        break;
      }
      case Op::MaxPool2d: {
        Tensor& dx = grads[static_cast<size_t>(n.a)];
        for (size_t i = 0; i < g.size(); ++i)
          dx[static_cast<size_t>(n.argmax[i])] += g[i];
        break;
      }
      case Op::Softmax: {
        const Tensor& p = n.value;
        Tensor& dx = grads[static_cast<size_t>(n.a)];
        for (int r = 0; r < p.dim(0); ++r) {
          double dot = 0.0;
          for (int c = 0; c < p.dim(1); ++c) dot += g.at(r, c) * p.at(r, c);
          for (int c = 0; c < p.dim(1); ++c)
            dx.at(r, c) += p.at(r, c) * (g.at(r, c) - dot);
        }
        break;
      }
      case Op::CrossEntropy: {
        const Tensor& p = value(n.a);
        Tensor& dp = grads[static_cast<size_t>(n.a)];
        const double gout = g[0];
        const int rows = p.dim(0);
        for (int r = 0; r < rows; ++r) {
          const int y = n.labels[static_cast<size_t>(r)];
          dp.at(r, y) -= gout / (rows * std::max(p.at(r, y), kProbFloor));
        }
        break;
      }
      case Op::Pick: {
        grads[static_cast<size_t>(n.a)].at(n.pick_row, n.pick_col) += g[0];
        break;
      }
      case Op::Reshape: {
        Tensor& dx = grads[static_cast<size_t>(n.a)];
        for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        break;
      }
    }
  }
  return grads;
}

}  // namespace xtb
