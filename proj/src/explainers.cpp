#include "xtbench/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xtbench/rng.hpp"

namespace xtb {

namespace {

struct ForwardRun {
  Tape tape;
  int input_id = -1;
  int logits_id = -1;
};

ForwardRun run_rows(const TrainedModel& model, const std::vector<double>& rows, int count) {
  ForwardRun r;
  const int d = model.arch.side * model.arch.side;
  r.input_id = r.tape.leaf(Tensor({count, d}, rows));
  std::vector<int> param_ids;
  for (const Tensor& p : model.params) param_ids.push_back(r.tape.leaf(p));
  r.logits_id = forward_logits(r.tape, model.arch, param_ids, r.input_id);
  return r;
}

// Target-class logit for a batch of inputs given as concatenated pixel rows.
std::vector<double> rows_target_logits(const TrainedModel& model,
                                       const std::vector<double>& rows, int count, int target) {
  ForwardRun r = run_rows(model, rows, count);
  const Tensor& logits = r.tape.value(r.logits_id);
  std::vector<double> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<size_t>(i)] = logits.at(i, target);
  return out;
}

// Gaussian elimination with partial pivoting; A is n x n row-major.
std::vector<double> solve_linear(std::vector<double> A, std::vector<double> b, int n,
                                 const std::string& who) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(A[static_cast<size_t>(r) * n + col]) >
          std::fabs(A[static_cast<size_t>(piv) * n + col]))
        piv = r;
    if (std::fabs(A[static_cast<size_t>(piv) * n + col]) < 1e-10)
      throw std::runtime_error(who + ": singular regression system");
    if (piv != col) {
      for (int c = 0; c < n; ++c)
        std::swap(A[static_cast<size_t>(piv) * n + c], A[static_cast<size_t>(col) * n + c]);
      std::swap(b[static_cast<size_t>(piv)], b[static_cast<size_t>(col)]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = A[static_cast<size_t>(r) * n + col] / A[static_cast<size_t>(col) * n + col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        A[static_cast<size_t>(r) * n + c] -= f * A[static_cast<size_t>(col) * n + c];
      b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
    }
  }
  std::vector<double> x(static_cast<size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) acc -= A[static_cast<size_t>(r) * n + c] * x[static_cast<size_t>(c)];
    x[static_cast<size_t>(r)] = acc / A[static_cast<size_t>(r) * n + r];
  }
  return x;
}

std::vector<std::vector<int>> patch_pixel_lists(int side, int patch) {
  const int per_row = side / patch;
  std::vector<std::vector<int>> patches(static_cast<size_t>(per_row) * per_row);
  for (int pr = 0; pr < per_row; ++pr)
    for (int pc = 0; pc < per_row; ++pc) {
      auto& px = patches[static_cast<size_t>(pr) * per_row + pc];
      for (int r = 0; r < patch; ++r)
        for (int c = 0; c < patch; ++c)
          px.push_back((pr * patch + r) * side + pc * patch + c);
    }
  return patches;
}

std::vector<double> masked_input(const std::vector<double>& x,
                                 const std::vector<std::vector<int>>& patches,
                                 const std::vector<uint8_t>& on) {
  std::vector<double> out(x.size(), 0.0);  // zero baseline
  for (size_t p = 0; p < patches.size(); ++p)
    if (on[p])
      for (int i : patches[p]) out[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
  return out;
}

}  // namespace

int effective_patch_size(const AttributionRequest& req) {
  if (req.config.patch_size > 0) return req.config.patch_size;
  return req.side <= 8 ? 1 : 4;
}

int patch_count(const AttributionRequest& req) {
  const int per_row = req.side / effective_patch_size(req);
  return per_row * per_row;
}

double logit_value(const TrainedModel& model, const std::vector<double>& x, int target) {
  return rows_target_logits(model, x, 1, target)[0];
}

ImportanceMap input_gradient(const TrainedModel& model, const std::vector<double>& x, int target,
                             ReluRule rule) {
  ForwardRun r = run_rows(model, x, 1);
  const int out = r.tape.pick(r.logits_id, 0, target);
  const auto grads = r.tape.backward(out, rule);
  return grads[static_cast<size_t>(r.input_id)].vec();
}

ImportanceMap saliency(const AttributionRequest& req) {
  return input_gradient(*req.model, req.sample, req.target);
}

namespace {

// Composite midpoint rule over [0,1] on the zero-baseline path, with the
// partition refined wherever the two cell-endpoint gradients differ. The
// networks are piecewise linear, so the gradient is constant (bitwise) on
// each linear region; equal endpoint gradients mean the cell is safe to
// close with one midpoint evaluation, and a plain uniform rule cannot meet
// the completeness tolerance because kinks straddle its cells.
struct IgPath {
  const TrainedModel* model;
  const std::vector<double>* x;
  int target;
  ImportanceMap sum;  // integral of the gradient over t

  ImportanceMap grad_at(double t) const {
    std::vector<double> point(x->size());
    for (size_t i = 0; i < point.size(); ++i) point[i] = t * (*x)[i];
    return input_gradient(*model, point, target);
  }
  void cell(double t0, const ImportanceMap& g0, double t1, const ImportanceMap& g1, int depth) {
    const double tm = 0.5 * (t0 + t1);
    const ImportanceMap gm = grad_at(tm);
    if (depth == 0 || g0 == g1) {
      for (size_t i = 0; i < sum.size(); ++i) sum[i] += (t1 - t0) * gm[i];
      return;
    }
    cell(t0, g0, tm, gm, depth - 1);
    cell(tm, gm, t1, g1, depth - 1);
  }
};

}  // namespace

ImportanceMap integrated_gradients(const AttributionRequest& req) {
  const int m = req.config.ig_steps;
  if (m < 1) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  IgPath path{req.model, &req.sample, req.target, ImportanceMap(req.sample.size(), 0.0)};
  // depth caps the bisection at cell width ~1/(m*2^36), far below any
  // meaningful kink spacing
  ImportanceMap g0 = path.grad_at(0.0);
  for (int k = 0; k < m; ++k) {
    ImportanceMap g1 = path.grad_at(static_cast<double>(k + 1) / m);
    path.cell(static_cast<double>(k) / m, g0, static_cast<double>(k + 1) / m, g1, 36);
    g0 = std::move(g1);
  }
  ImportanceMap attr = std::move(path.sum);
  for (size_t i = 0; i < attr.size(); ++i) attr[i] *= req.sample[i];
  return attr;
}

ImportanceMap guided_backprop(const AttributionRequest& req) {
  return input_gradient(*req.model, req.sample, req.target, ReluRule::Guided);
}

ImportanceMap deconvolution(const AttributionRequest& req) {
  return input_gradient(*req.model, req.sample, req.target, ReluRule::Deconv);
}

// ---------------------------------------------------------------------------
// LRP epsilon rule over the three supported architectures. Relevance starts
// at the target logit and is redistributed proportionally to each input's
// contribution; bias terms absorb their share (leak).

namespace {

double stabilized(double z, double eps_rel) {
  const double s = z >= 0.0 ? 1.0 : -1.0;
  return z + s * eps_rel * std::max(std::fabs(z), 1e-9);
}

// affine layer: z[out] from a[in] via w[in,out] (+ bias, absorbed)
std::vector<double> lrp_affine(const std::vector<double>& a, const Tensor& w,
                               const std::vector<double>& z, const std::vector<double>& rel,
                               double eps) {
  const int in = w.dim(0), out = w.dim(1);
  std::vector<double> r(static_cast<size_t>(in), 0.0);
  for (int j = 0; j < out; ++j) {
    if (rel[static_cast<size_t>(j)] == 0.0) continue;
    const double scale = rel[static_cast<size_t>(j)] / stabilized(z[static_cast<size_t>(j)], eps);
    for (int i = 0; i < in; ++i)
      r[static_cast<size_t>(i)] += a[static_cast<size_t>(i)] * w.at(i, j) * scale;
  }
  return r;
}

}  // namespace

ImportanceMap lrp_epsilon(const AttributionRequest& req) {
  const TrainedModel& model = *req.model;
  const double eps = req.config.lrp_epsilon;
  const int side = req.side;
  const int d = side * side;

  if (model.arch.kind == Arch::LLR || model.arch.kind == Arch::MLP) {
    // forward, keeping per-layer inputs and pre-activations
    std::vector<std::vector<double>> acts{req.sample};
    std::vector<std::vector<double>> zs;
    const size_t n_layers = model.params.size() / 2;
    for (size_t l = 0; l < n_layers; ++l) {
      const Tensor& w = model.params[l * 2];
      const Tensor& b = model.params[l * 2 + 1];
      std::vector<double> z(static_cast<size_t>(w.dim(1)));
      for (int j = 0; j < w.dim(1); ++j) {
        double acc = b[static_cast<size_t>(j)];
        for (int i = 0; i < w.dim(0); ++i) acc += acts.back()[static_cast<size_t>(i)] * w.at(i, j);
        z[static_cast<size_t>(j)] = acc;
      }
      zs.push_back(z);
      if (l + 1 < n_layers)
        for (double& v : z) v = std::max(v, 0.0);  // hidden ReLU
      acts.push_back(std::move(z));
    }
    std::vector<double> rel(zs.back().size(), 0.0);
    rel[static_cast<size_t>(req.target)] = zs.back()[static_cast<size_t>(req.target)];
    for (size_t l = n_layers; l-- > 0;)
      rel = lrp_affine(acts[l], model.params[l * 2], zs[l], rel, eps);
    return rel;
  }

  // CNN: replay the forward pass stage by stage, keeping the pool routing,
  // then redistribute relevance in reverse.
  // Stages: per block conv(+bias) -> relu -> pool; then flatten -> affine.
  struct Stage {
    Tensor conv_in;   // [1,C,H,W]
    Tensor conv_out;  // pre-relu
    Tensor relu_out;
    Tensor pool_out;
    std::vector<int> argmax;  // flat indices into relu_out
    Conv2dAttrs attrs;
    const Tensor* w;
  };
  std::vector<Stage> stages;
  Tensor cur({1, 1, side, side}, req.sample);
  size_t pi = 0;
  for (const auto& blk : model.arch.cnn_blocks()) {
    Stage st;
    st.conv_in = cur;
    st.attrs = blk.conv;
    st.w = &model.params[pi];
    st.conv_out = conv2d(cur, model.params[pi], model.params[pi + 1], blk.conv);
    st.relu_out = st.conv_out;
    for (double& v : st.relu_out.vec()) v = std::max(v, 0.0);
    {
      const Tensor& x = st.relu_out;
      const int C = x.dim(1), H = x.dim(2), W = x.dim(3);
      const int kh = std::min(blk.pool.kernel, H), kw = std::min(blk.pool.kernel, W);
      const int Ho = (H - kh) / blk.pool.stride + 1, Wo = (W - kw) / blk.pool.stride + 1;
      st.pool_out = Tensor({1, C, Ho, Wo});
      st.argmax.resize(static_cast<size_t>(C) * Ho * Wo);
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            int best = -1;
            double bv = 0.0;
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int idx =
                    c * H * W + (oy * blk.pool.stride + ky) * W + ox * blk.pool.stride + kx;
                if (best < 0 || x[static_cast<size_t>(idx)] > bv) {
                  best = idx;
                  bv = x[static_cast<size_t>(idx)];
                }
              }
            st.argmax[static_cast<size_t>(c) * Ho * Wo + oy * Wo + ox] = best;
            st.pool_out[static_cast<size_t>(c) * Ho * Wo + oy * Wo + ox] = bv;
          }
    }
    cur = st.pool_out;
    stages.push_back(std::move(st));
    pi += 2;
  }
  const Tensor& head_w = model.params[pi];
  const Tensor& head_b = model.params[pi + 1];
  const int flat = head_w.dim(0);
  std::vector<double> flat_in(cur.vec());
  std::vector<double> logits(2);
  for (int j = 0; j < 2; ++j) {
    double acc = head_b[static_cast<size_t>(j)];
    for (int i = 0; i < flat; ++i) acc += flat_in[static_cast<size_t>(i)] * head_w.at(i, j);
    logits[static_cast<size_t>(j)] = acc;
  }
  std::vector<double> rel(2, 0.0);
  rel[static_cast<size_t>(req.target)] = logits[static_cast<size_t>(req.target)];
  rel = lrp_affine(flat_in, head_w, logits, rel, eps);

  for (size_t s = stages.size(); s-- > 0;) {
    const Stage& st = stages[s];
    // pool: winner-take-all back to relu_out
    std::vector<double> relu_rel(st.relu_out.size(), 0.0);
    for (size_t i = 0; i < st.argmax.size(); ++i)
      relu_rel[static_cast<size_t>(st.argmax[i])] += rel[i];
    // relu: pass-through; conv: proportional redistribution
    const Tensor& x = st.conv_in;
    const Tensor& w = *st.w;
    const int C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int F = w.dim(0), k = st.attrs.kernel;
    const int Ho = st.conv_out.dim(2), Wo = st.conv_out.dim(3);
    std::vector<double> in_rel(x.size(), 0.0);
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const size_t oi = (static_cast<size_t>(f) * Ho + oy) * Wo + ox;
          if (relu_rel[oi] == 0.0) continue;
          const double scale = relu_rel[oi] / stabilized(st.conv_out[oi], eps);
          const int y0 = oy * st.attrs.stride - st.attrs.pad_top;
          const int x0 = ox * st.attrs.stride - st.attrs.pad_left;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x0 + kx;
                if (ix < 0 || ix >= W) continue;
                const size_t ii = (static_cast<size_t>(c) * H + iy) * W + ix;
                in_rel[ii] += x[ii] * w[((static_cast<size_t>(f) * C + c) * k + ky) * k + kx] * scale;
              }
            }
        }
    rel = std::move(in_rel);
  }
  if (static_cast<int>(rel.size()) != d) throw std::logic_error("lrp: bad relevance shape");
  return rel;
}

// ---------------------------------------------------------------------------

ImportanceMap permutation_feature_importance(const AttributionRequest& req) {
  if (req.config.pfi_repeats < 1)
    throw std::invalid_argument("permutation_feature_importance: repeats must be >= 1");
  if (!req.ref_x || req.ref_count < 2)
    throw std::invalid_argument("permutation_feature_importance: needs a reference batch");
  const TrainedModel& model = *req.model;
  const int d = req.side * req.side;
  const int n = req.ref_count;
  const double base =
      mean_cross_entropy(model.arch, model.params, req.ref_x, req.ref_y, n, d);
  ImportanceMap imp(static_cast<size_t>(d), 0.0);
  std::vector<float> work(req.ref_x, req.ref_x + static_cast<size_t>(n) * d);
  std::vector<int> perm(static_cast<size_t>(n));
  for (int px = 0; px < d; ++px) {
    double delta = 0.0;
    for (int rep = 0; rep < req.config.pfi_repeats; ++rep) {
      auto rng = derive_rng(req.seed, static_cast<uint64_t>(px), static_cast<uint64_t>(rep));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < n; ++i)
        work[static_cast<size_t>(i) * d + px] =
            req.ref_x[static_cast<size_t>(perm[static_cast<size_t>(i)]) * d + px];
      delta += mean_cross_entropy(model.arch, model.params, work.data(), req.ref_y, n, d) - base;
    }
    for (int i = 0; i < n; ++i)  // restore column
      work[static_cast<size_t>(i) * d + px] = req.ref_x[static_cast<size_t>(i) * d + px];
    imp[static_cast<size_t>(px)] = delta / req.config.pfi_repeats;
  }
  return imp;
}

ImportanceMap shapley_value_sampling(const AttributionRequest& req) {
  const int P = req.config.shapley_permutations;
  if (P < 1) throw std::invalid_argument("shapley_value_sampling: permutations must be >= 1");
  const auto patches = patch_pixel_lists(req.side, effective_patch_size(req));
  const int M = static_cast<int>(patches.size());
  const int d = req.side * req.side;
  auto rng = derive_rng(req.seed, 0x5a9bull);
  std::vector<double> phi(static_cast<size_t>(M), 0.0);
  std::vector<int> order(static_cast<size_t>(M));
  for (int p = 0; p < P; ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    // M+1 cumulative coalitions evaluated in one batch
    std::vector<double> rows(static_cast<size_t>(M + 1) * d, 0.0);
    std::vector<uint8_t> on(static_cast<size_t>(M), 0);
    for (int step = 1; step <= M; ++step) {
      on[static_cast<size_t>(order[static_cast<size_t>(step - 1)])] = 1;
      const auto masked = masked_input(req.sample, patches, on);
      std::copy(masked.begin(), masked.end(), rows.begin() + static_cast<size_t>(step) * d);
    }
    const auto f = rows_target_logits(*req.model, rows, M + 1, req.target);
    for (int step = 1; step <= M; ++step)
      phi[static_cast<size_t>(order[static_cast<size_t>(step - 1)])] +=
          f[static_cast<size_t>(step)] - f[static_cast<size_t>(step - 1)];
  }
  ImportanceMap map(static_cast<size_t>(d), 0.0);
  for (int m = 0; m < M; ++m)
    for (int i : patches[static_cast<size_t>(m)]) map[static_cast<size_t>(i)] = phi[static_cast<size_t>(m)] / P;
  return map;
}

ImportanceMap kernel_shap(const AttributionRequest& req) {
  const auto patches = patch_pixel_lists(req.side, effective_patch_size(req));
  const int M = static_cast<int>(patches.size());
  const int d = req.side * req.side;
  int C = req.config.kernel_shap_coalitions > 0 ? req.config.kernel_shap_coalitions
                                                : 2 * M + 16;
  if (C < M + 2)
    throw std::invalid_argument("kernel_shap: need at least patches+2 coalitions, got " +
                                std::to_string(C));

  // coalition list (empty/full handled by the efficiency constraint)
  std::vector<std::vector<uint8_t>> zs;
  std::vector<double> weights;
  auto kernel_weight = [M](int s) {
    return static_cast<double>(M - 1) / (static_cast<double>(s) * (M - s));
  };
  const bool enumerate_all = M <= 20 && (1LL << M) - 2 <= C;
  if (enumerate_all) {
    for (long long bits = 1; bits < (1LL << M) - 1; ++bits) {
      std::vector<uint8_t> z(static_cast<size_t>(M));
      int s = 0;
      for (int i = 0; i < M; ++i)
        if (bits >> i & 1) {
          z[static_cast<size_t>(i)] = 1;
          ++s;
        }
      zs.push_back(std::move(z));
      weights.push_back(kernel_weight(s));
    }
  } else {
    auto rng = derive_rng(req.seed, 0x4b53ull);
    std::vector<int> idx(static_cast<size_t>(M));
    for (int c = 0; c < C; ++c) {
      const int s = 1 + static_cast<int>(rng() % static_cast<uint64_t>(M - 1));
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<uint8_t> z(static_cast<size_t>(M), 0);
      for (int i = 0; i < s; ++i) z[static_cast<size_t>(idx[static_cast<size_t>(i)])] = 1;
      zs.push_back(std::move(z));
      weights.push_back(kernel_weight(s));
    }
  }

  const int rows_n = static_cast<int>(zs.size());
  std::vector<double> rows(static_cast<size_t>(rows_n + 2) * d, 0.0);
  for (int r = 0; r < rows_n; ++r) {
    const auto masked = masked_input(req.sample, patches, zs[static_cast<size_t>(r)]);
    std::copy(masked.begin(), masked.end(), rows.begin() + static_cast<size_t>(r) * d);
  }
  // last two rows: baseline and full input
  std::copy(req.sample.begin(), req.sample.end(),
            rows.begin() + static_cast<size_t>(rows_n + 1) * d);
  const auto f = rows_target_logits(*req.model, rows, rows_n + 2, req.target);
  const double f0 = f[static_cast<size_t>(rows_n)];
  const double fx = f[static_cast<size_t>(rows_n + 1)];

  // Efficiency-constrained weighted least squares: phi_{M-1} is eliminated
  // via sum(phi) = fx - f0, intercept fixed at f0.
  const int nfree = M - 1;
  std::vector<double> ata(static_cast<size_t>(nfree) * nfree, 0.0);
  std::vector<double> atb(static_cast<size_t>(nfree), 0.0);
  std::vector<double> feat(static_cast<size_t>(nfree));
  for (int r = 0; r < rows_n; ++r) {
    const auto& z = zs[static_cast<size_t>(r)];
    const double zm = z[static_cast<size_t>(M - 1)];
    for (int i = 0; i < nfree; ++i) feat[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] - zm;
    const double y = f[static_cast<size_t>(r)] - f0 - zm * (fx - f0);
    const double w = weights[static_cast<size_t>(r)];
    for (int i = 0; i < nfree; ++i) {
      if (feat[static_cast<size_t>(i)] == 0.0) continue;
      atb[static_cast<size_t>(i)] += w * feat[static_cast<size_t>(i)] * y;
      for (int j = 0; j < nfree; ++j)
        ata[static_cast<size_t>(i) * nfree + j] +=
            w * feat[static_cast<size_t>(i)] * feat[static_cast<size_t>(j)];
    }
  }
  std::vector<double> phi;
  try {
    phi = solve_linear(std::move(ata), std::move(atb), nfree, "kernel_shap");
  } catch (const std::runtime_error&) {
    throw std::runtime_error("kernel_shap: singular regression system with " +
                             std::to_string(rows_n) + " coalitions");
  }
  phi.push_back(fx - f0 - std::accumulate(phi.begin(), phi.end(), 0.0));

  ImportanceMap map(static_cast<size_t>(d), 0.0);
  for (int m = 0; m < M; ++m)
    for (int i : patches[static_cast<size_t>(m)]) map[static_cast<size_t>(i)] = phi[static_cast<size_t>(m)];
  return map;
}

ImportanceMap gradient_shap(const AttributionRequest& req) {
  const int S = req.config.grad_shap_samples;
  if (S < 1) throw std::invalid_argument("gradient_shap: samples must be >= 1");
  auto rng = derive_rng(req.seed, 0x6d5ull);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, req.config.grad_shap_noise);
  ImportanceMap attr(req.sample.size(), 0.0);
  std::vector<double> point(req.sample.size());
  for (int s = 0; s < S; ++s) {
    const double u = uniform(rng);
    for (size_t i = 0; i < point.size(); ++i)
      point[i] = u * req.sample[i] +
                 (req.config.grad_shap_noise > 0.0 ? noise(rng) : 0.0);
    const ImportanceMap g = input_gradient(*req.model, point, req.target);
    for (size_t i = 0; i < attr.size(); ++i) attr[i] += req.sample[i] * g[i];
  }
  for (double& v : attr) v /= S;
  return attr;
}

ImportanceMap lime(const AttributionRequest& req) {
  const auto patches = patch_pixel_lists(req.side, effective_patch_size(req));
  const int M = static_cast<int>(patches.size());
  const int d = req.side * req.side;
  const int Q = req.config.lime_perturbations;
  if (Q < M + 2)
    throw std::invalid_argument("lime: need at least patches+2 perturbations, got " +
                                std::to_string(Q));
  auto rng = derive_rng(req.seed, 0x11eull);
  std::vector<std::vector<uint8_t>> zs(static_cast<size_t>(Q));
  std::vector<double> rows(static_cast<size_t>(Q) * d, 0.0);
  for (int q = 0; q < Q; ++q) {
    auto& z = zs[static_cast<size_t>(q)];
    z.resize(static_cast<size_t>(M));
    for (int i = 0; i < M; ++i) z[static_cast<size_t>(i)] = static_cast<uint8_t>(rng() & 1u);
    const auto masked = masked_input(req.sample, patches, z);
    std::copy(masked.begin(), masked.end(), rows.begin() + static_cast<size_t>(q) * d);
  }
  const auto f = rows_target_logits(*req.model, rows, Q, req.target);

  const double width = req.config.lime_kernel_width_scale * std::sqrt(static_cast<double>(M));
  const int n = M + 1;  // intercept + patch coefficients
  std::vector<double> ata(static_cast<size_t>(n) * n, 0.0);
  std::vector<double> atb(static_cast<size_t>(n), 0.0);
  for (int q = 0; q < Q; ++q) {
    const auto& z = zs[static_cast<size_t>(q)];
    int off = 0;
    for (int i = 0; i < M; ++i) off += z[static_cast<size_t>(i)] ? 0 : 1;
    const double w = std::exp(-static_cast<double>(off) / (width * width));
    auto x_at = [&z](int c) { return c == 0 ? 1.0 : static_cast<double>(z[static_cast<size_t>(c - 1)]); };
    for (int i = 0; i < n; ++i) {
      const double xi = x_at(i);
      if (xi == 0.0) continue;
      atb[static_cast<size_t>(i)] += w * xi * f[static_cast<size_t>(q)];
      for (int j = 0; j < n; ++j)
        ata[static_cast<size_t>(i) * n + j] += w * xi * x_at(j);
    }
  }
  for (int i = 1; i < n; ++i) ata[static_cast<size_t>(i) * n + i] += req.config.lime_ridge;
  std::vector<double> beta;
  try {
    beta = solve_linear(std::move(ata), std::move(atb), n, "lime");
  } catch (const std::runtime_error&) {
    throw std::runtime_error("lime: degenerate perturbation set (" + std::to_string(Q) +
                             " perturbations)");
  }
  ImportanceMap map(static_cast<size_t>(d), 0.0);
  for (int m = 0; m < M; ++m)
    for (int i : patches[static_cast<size_t>(m)]) map[static_cast<size_t>(i)] = beta[static_cast<size_t>(m + 1)];
  return map;
}

// ---------------------------------------------------------------------------

namespace {

ImportanceMap convolve3x3(const std::vector<double>& x, int side, const double k[3][3]) {
  ImportanceMap out(x.size(), 0.0);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= side || cc < 0 || cc >= side) continue;  // zero padding
          acc += x[static_cast<size_t>(rr) * side + cc] * k[dr + 1][dc + 1];
        }
      out[static_cast<size_t>(r) * side + c] = acc;
    }
  return out;
}

}  // namespace

ImportanceMap baseline_map(BaselineKind kind, const std::vector<double>& sample, int side,
                           uint64_t seed) {
  switch (kind) {
    case BaselineKind::Sobel: {
      static const double gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
      static const double gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
      const ImportanceMap mx = convolve3x3(sample, side, gx);
      const ImportanceMap my = convolve3x3(sample, side, gy);
      ImportanceMap out(sample.size());
      for (size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(mx[i] * mx[i] + my[i] * my[i]);
      return out;
    }
    case BaselineKind::Laplace: {
      static const double lap[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
      return convolve3x3(sample, side, lap);
    }
    case BaselineKind::Random: {
      auto rng = derive_rng(seed, 0x7a4dull);
      std::uniform_real_distribution<double> uniform(-1.0, 1.0);
      ImportanceMap out(sample.size());
      for (double& v : out) v = uniform(rng);
      return out;
    }
    case BaselineKind::Input: {
      ImportanceMap out(sample.size());
      for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(sample[i]);
      return out;
    }
  }
  throw std::logic_error("baseline_map: bad kind");
}

std::vector<std::string> registered_methods() {
  return {"saliency",    "integrated_gradients", "guided_backprop", "deconvolution",
          "lrp",         "pfi",                  "shapley_sampling", "kernel_shap",
          "gradient_shap", "lime",               "sobel",            "laplace",
          "random",      "input"};
}

bool method_needs_model(const std::string& id) {
  return id != "sobel" && id != "laplace" && id != "random" && id != "input";
}

ImportanceMap explain(const std::string& method_id, const AttributionRequest& req) {
  if (method_id == "saliency") return saliency(req);
  if (method_id == "integrated_gradients") return integrated_gradients(req);
  if (method_id == "guided_backprop") return guided_backprop(req);
  if (method_id == "deconvolution") return deconvolution(req);
  if (method_id == "lrp") return lrp_epsilon(req);
  if (method_id == "pfi") return permutation_feature_importance(req);
  if (method_id == "shapley_sampling") return shapley_value_sampling(req);
  if (method_id == "kernel_shap") return kernel_shap(req);
  if (method_id == "gradient_shap") return gradient_shap(req);
  if (method_id == "lime") return lime(req);
  if (method_id == "sobel") return baseline_map(BaselineKind::Sobel, req.sample, req.side, req.seed);
  if (method_id == "laplace")
    return baseline_map(BaselineKind::Laplace, req.sample, req.side, req.seed);
  if (method_id == "random")
    return baseline_map(BaselineKind::Random, req.sample, req.side, req.seed);
  if (method_id == "input")
    return baseline_map(BaselineKind::Input, req.sample, req.side, req.seed);
  std::string ids;
  for (const auto& id : registered_methods()) ids += (ids.empty() ? "" : ", ") + id;
  throw std::invalid_argument("unknown method '" + method_id + "'; registered: " + ids);
}

}  // namespace xtb
