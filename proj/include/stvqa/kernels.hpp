#pragma once

// Dense numeric kernels behind the tape ops. Each kernel has an
// OpenMP-parallel version (this namespace) and a plain-loop reference in
// kernels::serial. The parallel versions split work over independent
// output elements only, so for any thread count they produce bit-identical
// results to the serial reference; tests assert exact equality and
// tools/bench_kernels compares their throughput.

namespace stvqa::kernels {

// out[m×n] = a[m×k] · b[k×n]; accumulate adds into out instead
void matmul_nn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);
// out[m×n] = a[m×k] · b[n×k]^T  (pairwise row dot products)
void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);
// out[k×n] = a[m×k]^T · b[m×n]
void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);

// Same-length 1-D convolution over a row-major [M×din] sequence with a
// [L×din×dout] filter bank and [dout] bias. Out-of-range taps contribute
// zero. Window alignment: position i covers i-(L-1)/2 … i+(L-1)/2 for odd
// L and i-L/2 … i+L/2-1 for even L.
void conv1d_same(const double* seq, const double* filt, const double* bias, double* out,
                 int M, int L, int din, int dout);
// gradient kernels accumulate (+=) into their outputs
void conv1d_grad_seq(const double* gout, const double* filt, double* gseq, int M, int L, int din, int dout);
void conv1d_grad_filt(const double* gout, const double* seq, double* gfilt, int M, int L, int din, int dout);
void conv1d_grad_bias(const double* gout, double* gbias, int M, int dout);

void vtanh(const double* x, double* y, int n);

// first input position of a length-L window centred per the alignment rule
inline int conv_window_start(int i, int L) { return (L % 2 == 1) ? i - (L - 1) / 2 : i - L / 2; }

namespace serial {
void matmul_nn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);
void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);
void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool accumulate = false);
void conv1d_same(const double* seq, const double* filt, const double* bias, double* out,
                 int M, int L, int din, int dout);
void conv1d_grad_seq(const double* gout, const double* filt, double* gseq, int M, int L, int din, int dout);
void conv1d_grad_filt(const double* gout, const double* seq, double* gfilt, int M, int L, int din, int dout);
void conv1d_grad_bias(const double* gout, double* gbias, int M, int dout);
void vtanh(const double* x, double* y, int n);
}  // namespace serial

}  // namespace stvqa::kernels
