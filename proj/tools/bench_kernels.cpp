// Throughput comparison of the OpenMP kernels against their serial
// references, with an exact-equality check on every output. Exits nonzero
// if any parallel result differs from the serial one by a single bit.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "stvqa/kernels.hpp"
#include "stvqa/tensor.hpp"

namespace {

using namespace stvqa;

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s < best) best = s;
  }
  return best;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int g_failures = 0;

void report(const std::string& name, double serial_s, double omp_s, bool identical) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name.c_str(),
              serial_s * 1e3, omp_s * 1e3, serial_s / omp_s, identical ? "identical" : "MISMATCH");
  if (!identical) ++g_failures;
}

void bench_matmul(Rng& rng, int m, int k, int n, int reps) {
  const Tensor a = random_uniform(rng, {m, k}, -1.0, 1.0);
  const Tensor b = random_uniform(rng, {k, n}, -1.0, 1.0);
  std::vector<double> out_serial(static_cast<size_t>(m) * n);
  std::vector<double> out_omp(out_serial.size());
  const double ts = time_best_of(
      reps, [&] { kernels::serial::matmul_nn(a.ptr(), b.ptr(), out_serial.data(), m, k, n); });
  const double tp =
      time_best_of(reps, [&] { kernels::matmul_nn(a.ptr(), b.ptr(), out_omp.data(), m, k, n); });
  char name[64];
  std::snprintf(name, sizeof(name), "matmul %dx%dx%d", m, k, n);
  report(name, ts, tp, bit_identical(out_serial, out_omp));
}

void bench_conv(Rng& rng, int M, int L, int d, int reps) {
  const Tensor seq = random_uniform(rng, {M, d}, -1.0, 1.0);
  const Tensor filt = random_uniform(rng, {L, d, d}, -0.5, 0.5);
  const Tensor bias = random_uniform(rng, {d}, -0.1, 0.1);
  std::vector<double> out_serial(static_cast<size_t>(M) * d);
  std::vector<double> out_omp(out_serial.size());
  const double ts = time_best_of(reps, [&] {
    kernels::serial::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), out_serial.data(), M, L, d, d);
  });
  const double tp = time_best_of(reps, [&] {
    kernels::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), out_omp.data(), M, L, d, d);
  });
  char name[64];
  std::snprintf(name, sizeof(name), "conv1d M=%d L=%d d=%d", M, L, d);
  report(name, ts, tp, bit_identical(out_serial, out_omp));
}

void bench_vtanh(Rng& rng, int n, int reps) {
  const Tensor x = random_uniform(rng, {n}, -2.0, 2.0);
  std::vector<double> out_serial(static_cast<size_t>(n));
  std::vector<double> out_omp(out_serial.size());
  const double ts =
      time_best_of(reps, [&] { kernels::serial::vtanh(x.ptr(), out_serial.data(), n); });
  const double tp = time_best_of(reps, [&] { kernels::vtanh(x.ptr(), out_omp.data(), n); });
  char name[64];
  std::snprintf(name, sizeof(name), "vtanh n=%d", n);
  report(name, ts, tp, bit_identical(out_serial, out_omp));
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);
  if (reps < 1) {
    std::fprintf(stderr, "usage: bench_kernels [reps]\n");
    return 2;
  }
  Rng rng(12345);

  // below the parallel grain: both paths run the same serial loop
  bench_matmul(rng, 48, 48, 48, reps);
  // above the grain
  bench_matmul(rng, 192, 192, 192, reps);
  bench_matmul(rng, 384, 384, 384, reps);
  bench_conv(rng, 32, 3, 64, reps);
  bench_conv(rng, 256, 3, 128, reps);
  bench_vtanh(rng, 1 << 14, reps);
  bench_vtanh(rng, 1 << 21, reps);

  if (g_failures > 0) {
    std::fprintf(stderr, "error: %d kernel(s) diverged from the serial reference\n", g_failures);
    return 1;
  }
  return 0;
}
