#pragma once

#include "xtbench/tensor.hpp"

namespace xtb {

// Compute-heavy inner loops. Each has a serial reference version and an
// OpenMP version; both assign every output element in full on one thread,
// so results are bitwise identical and the parallel path is order-stable.

struct Conv2dAttrs {
  int kernel = 1;
  int stride = 1;
  int pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;

  static Conv2dAttrs valid(int kernel, int stride) { return {kernel, stride, 0, 0, 0, 0}; }
  // TF-style SAME for stride 1: total pad = k-1, extra on bottom/right.
  static Conv2dAttrs same(int kernel) {
    int total = kernel - 1;
    int begin = total / 2;
    return {kernel, 1, begin, begin, total - begin, total - begin};
  }
  int out_dim(int in, int pad_a, int pad_b) const {
    return (in + pad_a + pad_b - kernel) / stride + 1;
  }
};

struct Pool2dAttrs {
  int kernel = 2;
  int stride = 2;
};

// C[M,N] = A[M,K] * B[K,N]
void matmul_serial(const Tensor& a, const Tensor& b, Tensor& c);
void matmul_omp(const Tensor& a, const Tensor& b, Tensor& c);
Tensor matmul(const Tensor& a, const Tensor& b);

// x[N,C,H,W] w[F,C,k,k] bias[F] -> y[N,F,Ho,Wo]
void conv2d_serial(const Tensor& x, const Tensor& w, const Tensor& bias,
                   const Conv2dAttrs& attrs, Tensor& y);
void conv2d_omp(const Tensor& x, const Tensor& w, const Tensor& bias,
                const Conv2dAttrs& attrs, Tensor& y);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dAttrs& attrs);

// Gradients of conv2d. dy[N,F,Ho,Wo] -> dx, dw, dbias.
void conv2d_backward(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs,
                     const Tensor& dy, Tensor& dx, Tensor& dw, Tensor& dbias);

// Separable Gaussian blur, kernel truncated at radius ceil(3*sigma),
// normalized over the truncated support, zero padding. sigma=0 is identity.
void gaussian_blur_serial(const double* in, double* out, int side, double sigma);
void gaussian_blur_omp(const double* in, double* out, int side, double sigma);

std::vector<double> gaussian_kernel_1d(double sigma);

}  // namespace xtb
