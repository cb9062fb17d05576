#include "stvqa/kernels.hpp"

#include <cmath>

// Work below these grain sizes is not worth a parallel region.
namespace {
constexpr long kMatmulGrain = 16 * 1024;
constexpr long kConvGrain = 16 * 1024;
constexpr long kMapGrain = 64 * 1024;
}  // namespace

namespace stvqa::kernels {

namespace serial {

void matmul_nn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      out[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      out[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < m; ++t) acc += a[t * k + i] * b[t * n + j];
      out[i * n + j] = acc;
    }
  }
}

void conv1d_same(const double* seq, const double* filt, const double* bias, double* out,
                 int M, int L, int din, int dout) {
  for (int i = 0; i < M; ++i) {
    const int start = conv_window_start(i, L);
    for (int o = 0; o < dout; ++o) {
      double acc = bias[o];
      for (int t = 0; t < L; ++t) {
        const int p = start + t;
        if (p < 0 || p >= M) continue;
        const double* f = filt + (t * din) * dout + o;
        const double* s = seq + p * din;
        for (int c = 0; c < din; ++c) acc += s[c] * f[c * dout];
      }
      out[i * dout + o] = acc;
    }
  }
}

void conv1d_grad_seq(const double* gout, const double* filt, double* gseq, int M, int L, int din, int dout) {
  for (int p = 0; p < M; ++p) {
    for (int c = 0; c < din; ++c) {
      double acc = 0.0;
      // output position i reads input p at tap t iff p == start(i) + t
      for (int t = 0; t < L; ++t) {
        const int i = p - (t - ((L % 2 == 1) ? (L - 1) / 2 : L / 2));
        if (i < 0 || i >= M) continue;
        const double* f = filt + (t * din + c) * dout;
        const double* g = gout + i * dout;
        for (int o = 0; o < dout; ++o) acc += g[o] * f[o];
      }
      gseq[p * din + c] += acc;
    }
  }
}

void conv1d_grad_filt(const double* gout, const double* seq, double* gfilt, int M, int L, int din, int dout) {
  for (int t = 0; t < L; ++t) {
    for (int c = 0; c < din; ++c) {
      for (int o = 0; o < dout; ++o) {
        double acc = 0.0;
        for (int i = 0; i < M; ++i) {
          const int p = conv_window_start(i, L) + t;
          if (p < 0 || p >= M) continue;
          acc += gout[i * dout + o] * seq[p * din + c];
        }
        gfilt[(t * din + c) * dout + o] += acc;
      }
    }
  }
}

void conv1d_grad_bias(const double* gout, double* gbias, int M, int dout) {
  for (int o = 0; o < dout; ++o) {
    double acc = 0.0;
    for (int i = 0; i < M; ++i) acc += gout[i * dout + o];
    gbias[o] += acc;
  }
}

void vtanh(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

}  // namespace serial

void matmul_nn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for if (work > kMatmulGrain)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      out[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for if (work > kMatmulGrain)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      out[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate) {
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for if (work > kMatmulGrain)
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? out[i * n + j] : 0.0;
      for (int t = 0; t < m; ++t) acc += a[t * k + i] * b[t * n + j];
      out[i * n + j] = acc;
    }
  }
}

void conv1d_same(const double* seq, const double* filt, const double* bias, double* out,
                 int M, int L, int din, int dout) {
  const long work = static_cast<long>(M) * L * din * dout;
#pragma omp parallel for if (work > kConvGrain)
  for (int i = 0; i < M; ++i) {
    const int start = conv_window_start(i, L);
    for (int o = 0; o < dout; ++o) {
      double acc = bias[o];
      for (int t = 0; t < L; ++t) {
        const int p = start + t;
        if (p < 0 || p >= M) continue;
        const double* f = filt + (t * din) * dout + o;
        const double* s = seq + p * din;
        for (int c = 0; c < din; ++c) acc += s[c] * f[c * dout];
      }
      out[i * dout + o] = acc;
    }
  }
}

void conv1d_grad_seq(const double* gout, const double* filt, double* gseq, int M, int L, int din, int dout) {
  const long work = static_cast<long>(M) * L * din * dout;
#pragma omp parallel for if (work > kConvGrain)
  for (int p = 0; p < M; ++p) {
    for (int c = 0; c < din; ++c) {
      double acc = 0.0;
      for (int t = 0; t < L; ++t) {
        const int i = p - (t - ((L % 2 == 1) ? (L - 1) / 2 : L / 2));
        if (i < 0 || i >= M) continue;
        const double* f = filt + (t * din + c) * dout;
        const double* g = gout + i * dout;
        for (int o = 0; o < dout; ++o) acc += g[o] * f[o];
      }
      gseq[p * din + c] += acc;
    }
  }
}

void conv1d_grad_filt(const double* gout, const double* seq, double* gfilt, int M, int L, int din, int dout) {
  const long work = static_cast<long>(M) * L * din * dout;
  const int cells = L * din;
#pragma omp parallel for if (work > kConvGrain)
  for (int cell = 0; cell < cells; ++cell) {
    const int t = cell / din;
    const int c = cell % din;
    for (int o = 0; o < dout; ++o) {
      double acc = 0.0;
      for (int i = 0; i < M; ++i) {
        const int p = conv_window_start(i, L) + t;
        if (p < 0 || p >= M) continue;
        acc += gout[i * dout + o] * seq[p * din + c];
      }
      gfilt[(t * din + c) * dout + o] += acc;
    }
  }
}

void conv1d_grad_bias(const double* gout, double* gbias, int M, int dout) {
  for (int o = 0; o < dout; ++o) {
    double acc = 0.0;
    for (int i = 0; i < M; ++i) acc += gout[i * dout + o];
    gbias[o] += acc;
  }
}

void vtanh(const double* x, double* y, int n) {
#pragma omp parallel for if (n > kMapGrain)
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

}  // namespace stvqa::kernels
