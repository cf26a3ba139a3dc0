#include "xtbench/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace xtb {

namespace {

void check_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " x " +
                                b.shape_str());
}

inline double dot_row_col(const double* a, const double* b, int k, int ldb) {
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += a[i] * b[static_cast<size_t>(i) * ldb];
  return acc;
}

inline double conv_cell(const double* xc, const double* wf, int C, int H, int W, int k,
                        int oy, int ox, const Conv2dAttrs& at) {
  double acc = 0.0;
  const int y0 = oy * at.stride - at.pad_top;
  const int x0 = ox * at.stride - at.pad_left;
  for (int c = 0; c < C; ++c) {
    const double* xp = xc + static_cast<size_t>(c) * H * W;
    const double* wp = wf + static_cast<size_t>(c) * k * k;
    for (int ky = 0; ky < k; ++ky) {
      const int iy = y0 + ky;
      if (iy < 0 || iy >= H) continue;
      for (int kx = 0; kx < k; ++kx) {
        const int ix = x0 + kx;
        if (ix < 0 || ix >= W) continue;
        acc += xp[static_cast<size_t>(iy) * W + ix] * wp[ky * k + kx];
      }
    }
  }
  return acc;
}

}  // namespace

void matmul_serial(const Tensor& a, const Tensor& b, Tensor& c) {
  check_matmul(a, b);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  c = Tensor({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      c.at(i, j) = dot_row_col(a.data() + static_cast<size_t>(i) * k, b.data() + j, k, n);
}

void matmul_omp(const Tensor& a, const Tensor& b, Tensor& c) {
  check_matmul(a, b);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  c = Tensor({m, n});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      c.at(i, j) = dot_row_col(a.data() + static_cast<size_t>(i) * k, b.data() + j, k, n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c;
  matmul_omp(a, b, c);
  return c;
}

static void check_conv(const Tensor& x, const Tensor& w, const Tensor& bias,
                       const Conv2dAttrs& at) {
  if (x.rank() != 4 || w.rank() != 4 || bias.rank() != 1)
    throw std::invalid_argument("conv2d: expected x[N,C,H,W] w[F,C,k,k] bias[F]");
  if (w.dim(1) != x.dim(1) || w.dim(2) != at.kernel || w.dim(3) != at.kernel ||
      bias.dim(0) != w.dim(0))
    throw std::invalid_argument("conv2d: incompatible shapes " + x.shape_str() + " " +
                                w.shape_str());
  if (at.kernel <= 0 || at.stride <= 0) throw std::invalid_argument("conv2d: bad attrs");
  if (at.out_dim(x.dim(2), at.pad_top, at.pad_bottom) <= 0 ||
      at.out_dim(x.dim(3), at.pad_left, at.pad_right) <= 0)
    throw std::invalid_argument("conv2d: empty output for input " + x.shape_str());
}

void conv2d_serial(const Tensor& x, const Tensor& w, const Tensor& bias,
                   const Conv2dAttrs& at, Tensor& y) {
  check_conv(x, w, bias, at);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = at.kernel;
  const int Ho = at.out_dim(H, at.pad_top, at.pad_bottom);
  const int Wo = at.out_dim(W, at.pad_left, at.pad_right);
  y = Tensor({N, F, Ho, Wo});
  for (int n = 0; n < N; ++n) {
    const double* xn = x.data() + static_cast<size_t>(n) * C * H * W;
    for (int f = 0; f < F; ++f) {
      const double* wf = w.data() + static_cast<size_t>(f) * C * k * k;
      double* yp = y.data() + (static_cast<size_t>(n) * F + f) * Ho * Wo;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
          yp[static_cast<size_t>(oy) * Wo + ox] =
              conv_cell(xn, wf, C, H, W, k, oy, ox, at) + bias[f];
    }
  }
}

void conv2d_omp(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dAttrs& at,
                Tensor& y) {
  check_conv(x, w, bias, at);
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = at.kernel;
  const int Ho = at.out_dim(H, at.pad_top, at.pad_bottom);
  const int Wo = at.out_dim(W, at.pad_left, at.pad_right);
  y = Tensor({N, F, Ho, Wo});
#pragma omp parallel for schedule(static) collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int f = 0; f < F; ++f) {
      const double* xn = x.data() + static_cast<size_t>(n) * C * H * W;
      const double* wf = w.data() + static_cast<size_t>(f) * C * k * k;
      double* yp = y.data() + (static_cast<size_t>(n) * F + f) * Ho * Wo;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
          yp[static_cast<size_t>(oy) * Wo + ox] =
              conv_cell(xn, wf, C, H, W, k, oy, ox, at) + bias[f];
    }
  }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dAttrs& at) {
  Tensor y;
  conv2d_omp(x, w, bias, at, y);
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Conv2dAttrs& at, const Tensor& dy,
                     Tensor& dx, Tensor& dw, Tensor& dbias) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = at.kernel;
  const int Ho = dy.dim(2), Wo = dy.dim(3);
  dx = Tensor({N, C, H, W});
  dw = Tensor({F, C, k, k});
  dbias = Tensor({F});
  // Serial scatter; gradient accumulation order must stay deterministic.
  for (int n = 0; n < N; ++n) {
    for (int f = 0; f < F; ++f) {
      const double* dyp = dy.data() + (static_cast<size_t>(n) * F + f) * Ho * Wo;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const double g = dyp[static_cast<size_t>(oy) * Wo + ox];
          dbias[f] += g;
          const int y0 = oy * at.stride - at.pad_top;
          const int x0 = ox * at.stride - at.pad_left;
          for (int c = 0; c < C; ++c) {
            const double* xp = x.data() + (static_cast<size_t>(n) * C + c) * H * W;
            double* dxp = dx.data() + (static_cast<size_t>(n) * C + c) * H * W;
            const double* wp = w.data() + (static_cast<size_t>(f) * C + c) * k * k;
            double* dwp = dw.data() + (static_cast<size_t>(f) * C + c) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x0 + kx;
                if (ix < 0 || ix >= W) continue;
                dxp[static_cast<size_t>(iy) * W + ix] += g * wp[ky * k + kx];
                dwp[ky * k + kx] += g * xp[static_cast<size_t>(iy) * W + ix];
              }
            }
          }
        }
      }
    }
  }
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian kernel: negative sigma");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// One separable pass along rows then columns, zero padding outside the grid.
template <bool Parallel>
void gaussian_blur_impl(const double* in, double* out, int side, double sigma) {
  if (sigma == 0.0) {
    for (int i = 0; i < side * side; ++i) out[i] = in[i];
    return;
  }
  const std::vector<double> k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(static_cast<size_t>(side) * side);
#pragma omp parallel for schedule(static) if (Parallel)
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o) {
        const int cc = c + o;
        if (cc < 0 || cc >= side) continue;
        acc += in[static_cast<size_t>(r) * side + cc] * k[static_cast<size_t>(o + radius)];
      }
      tmp[static_cast<size_t>(r) * side + c] = acc;
    }
#pragma omp parallel for schedule(static) if (Parallel)
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o) {
        const int rr = r + o;
        if (rr < 0 || rr >= side) continue;
        acc += tmp[static_cast<size_t>(rr) * side + c] * k[static_cast<size_t>(o + radius)];
      }
      out[static_cast<size_t>(r) * side + c] = acc;
    }
}

}  // namespace

void gaussian_blur_serial(const double* in, double* out, int side, double sigma) {
  gaussian_blur_impl<false>(in, out, side, sigma);
}

void gaussian_blur_omp(const double* in, double* out, int side, double sigma) {
  gaussian_blur_impl<true>(in, out, side, sigma);
}

}  // namespace xtb
