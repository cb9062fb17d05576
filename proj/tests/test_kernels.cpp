#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "stvqa/kernels.hpp"
#include "stvqa/tensor.hpp"

using namespace stvqa;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// naive reference used against both implementations
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int m, int k, int n) {
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[static_cast<size_t>(i) * k + t] * b[static_cast<size_t>(t) * n + j];
      out[static_cast<size_t>(i) * n + j] = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("matmul_nn hand oracle") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{0, 1};
  std::vector<double> out(2);
  kernels::matmul_nn(a.data(), b.data(), out.data(), 2, 2, 1);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 4.0);
}

TEST_CASE("matmul identity") {
  const std::vector<double> eye{1, 0, 0, 1};
  const std::vector<double> m{3.5, -2, 0.25, 7};
  std::vector<double> out(4);
  kernels::matmul_nn(eye.data(), m.data(), out.data(), 2, 2, 2);
  CHECK(out == m);
}

TEST_CASE("matmul accumulate adds into the output") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{1, 0, 0, 1};
  std::vector<double> out{10, 10, 10, 10};
  kernels::matmul_nn(a.data(), b.data(), out.data(), 2, 2, 2, true);
  CHECK(out == std::vector<double>{11, 12, 13, 14});
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(11);
  const int m = 5, k = 4, n = 3;
  const Tensor a = random_uniform(rng, {m, k}, -1, 1);
  const Tensor b = random_uniform(rng, {k, n}, -1, 1);

  // b_t[n×k] so that a · b = a ·(b_t)^T
  Tensor bt({n, k});
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) bt.at(j, i) = b.at(i, j);
  std::vector<double> nn(static_cast<size_t>(m) * n), nt(nn.size());
  kernels::matmul_nn(a.ptr(), b.ptr(), nn.data(), m, k, n);
  kernels::matmul_nt(a.ptr(), bt.ptr(), nt.data(), m, k, n);
  for (size_t i = 0; i < nn.size(); ++i) CHECK(nt[i] == doctest::Approx(nn[i]).epsilon(1e-15));

  // a^T · b with a_t[k×m] passed to nn
  Tensor at({k, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) at.at(j, i) = a.at(i, j);
  const Tensor c = random_uniform(rng, {m, n}, -1, 1);
  std::vector<double> tn(static_cast<size_t>(k) * n), ref(tn.size());
  kernels::matmul_tn(a.ptr(), c.ptr(), tn.data(), m, k, n);
  kernels::matmul_nn(at.ptr(), c.ptr(), ref.data(), k, m, n);
  for (size_t i = 0; i < tn.size(); ++i) CHECK(tn[i] == doctest::Approx(ref[i]).epsilon(1e-15));
}

TEST_CASE("conv1d_same identity filter") {
  // L=1, filter = identity map, bias 0: output equals input
  const int m = 4, d = 3;
  Rng rng(5);
  const Tensor seq = random_uniform(rng, {m, d}, -1, 1);
  Tensor filt({1, d, d});
  for (int j = 0; j < d; ++j) filt[j * d + j] = 1.0;
  Tensor bias({d});
  std::vector<double> out(static_cast<size_t>(m) * d);
  kernels::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), out.data(), m, 1, d, d);
  CHECK(bits_equal(out, seq.data()));
}

TEST_CASE("conv1d_same single-row input with window 3 sees only the center tap") {
  const int d = 2;
  Rng rng(6);
  const Tensor seq = random_uniform(rng, {1, d}, -1, 1);
  const Tensor filt = random_uniform(rng, {3, d, d}, -1, 1);
  const Tensor bias = random_uniform(rng, {d}, -1, 1);
  std::vector<double> out(d);
  kernels::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), out.data(), 1, 3, d, d);
  for (int o = 0; o < d; ++o) {
    double acc = bias[o];
    for (int j = 0; j < d; ++j) acc += seq[j] * filt[(1 * d + j) * d + o];  // tap t=1 is i+0
    CHECK(out[o] == doctest::Approx(acc).epsilon(1e-15));
  }
}

TEST_CASE("conv1d_same window alignment") {
  // scalar sequence [1,2,3,4], filter of ones, zero bias: the output is the
  // window sum, so alignment is directly readable
  const std::vector<double> seq{1, 2, 3, 4};
  std::vector<double> out(4);
  const std::vector<double> bias{0};

  SUBCASE("odd L=3 centers on i") {
    const std::vector<double> filt{1, 1, 1};
    kernels::conv1d_same(seq.data(), filt.data(), bias.data(), out.data(), 4, 3, 1, 1);
    CHECK(out == std::vector<double>{3, 6, 9, 7});
  }
  SUBCASE("even L=2 covers i-1..i") {
    const std::vector<double> filt{1, 1};
    kernels::conv1d_same(seq.data(), filt.data(), bias.data(), out.data(), 4, 2, 1, 1);
    CHECK(out == std::vector<double>{1, 3, 5, 7});
  }
  SUBCASE("L=4 covers i-2..i+1") {
    const std::vector<double> filt{1, 1, 1, 1};
    kernels::conv1d_same(seq.data(), filt.data(), bias.data(), out.data(), 4, 4, 1, 1);
    CHECK(out == std::vector<double>{3, 6, 10, 9});
  }
}

TEST_CASE("conv1d_same random instance matches a nested-loop oracle") {
  Rng rng(77);
  for (int L = 1; L <= 4; ++L) {
    const int m = 5, din = 3, dout = 4;
    const Tensor seq = random_uniform(rng, {m, din}, -1, 1);
    const Tensor filt = random_uniform(rng, {L, din, dout}, -1, 1);
    const Tensor bias = random_uniform(rng, {dout}, -1, 1);
    std::vector<double> out(static_cast<size_t>(m) * dout);
    kernels::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), out.data(), m, L, din, dout);
    CAPTURE(L);
    for (int i = 0; i < m; ++i) {
      const int start = kernels::conv_window_start(i, L);
      for (int o = 0; o < dout; ++o) {
        double acc = bias[o];
        for (int t = 0; t < L; ++t) {
          const int src = start + t;
          if (src < 0 || src >= m) continue;
          for (int j = 0; j < din; ++j) acc += seq.at(src, j) * filt[(t * din + j) * dout + o];
        }
        CHECK(std::fabs(out[static_cast<size_t>(i) * dout + o] - acc) < 1e-12);
      }
    }
  }
}

TEST_CASE("conv gradient kernels match finite differences of conv1d_same") {
  Rng rng(99);
  const int m = 4, din = 3, dout = 2, L = 3;
  const Tensor seq = random_uniform(rng, {m, din}, -1, 1);
  const Tensor filt = random_uniform(rng, {L, din, dout}, -1, 1);
  const Tensor bias = random_uniform(rng, {dout}, -1, 1);
  const Tensor gout = random_uniform(rng, {m, dout}, -1, 1);

  // loss = <gout, conv(seq, filt, bias)>
  auto loss = [&](const Tensor& s, const Tensor& f, const Tensor& b) {
    std::vector<double> out(static_cast<size_t>(m) * dout);
    kernels::conv1d_same(s.ptr(), f.ptr(), b.ptr(), out.data(), m, L, din, dout);
    double acc = 0.0;
    for (size_t i = 0; i < out.size(); ++i) acc += gout[static_cast<int>(i)] * out[i];
    return acc;
  };
  const double step = 1e-6;

  std::vector<double> gseq(static_cast<size_t>(m) * din, 0.0);
  kernels::conv1d_grad_seq(gout.ptr(), filt.ptr(), gseq.data(), m, L, din, dout);
  for (int i = 0; i < seq.numel(); ++i) {
    Tensor up = seq, dn = seq;
    up[i] += step;
    dn[i] -= step;
    const double fd = (loss(up, filt, bias) - loss(dn, filt, bias)) / (2 * step);
    CHECK(std::fabs(gseq[static_cast<size_t>(i)] - fd) < 1e-7);
  }

  std::vector<double> gfilt(static_cast<size_t>(L) * din * dout, 0.0);
  kernels::conv1d_grad_filt(gout.ptr(), seq.ptr(), gfilt.data(), m, L, din, dout);
  for (int i = 0; i < filt.numel(); ++i) {
    Tensor up = filt, dn = filt;
    up[i] += step;
    dn[i] -= step;
    const double fd = (loss(seq, up, bias) - loss(seq, dn, bias)) / (2 * step);
    CHECK(std::fabs(gfilt[static_cast<size_t>(i)] - fd) < 1e-7);
  }

  std::vector<double> gbias(dout, 0.0);
  kernels::conv1d_grad_bias(gout.ptr(), gbias.data(), m, dout);
  for (int i = 0; i < bias.numel(); ++i) {
    Tensor up = bias, dn = bias;
    up[i] += step;
    dn[i] -= step;
    const double fd = (loss(seq, filt, up) - loss(seq, filt, dn)) / (2 * step);
    CHECK(std::fabs(gbias[static_cast<size_t>(i)] - fd) < 1e-7);
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  Rng rng(2024);
  // sizes straddle the parallel grain in both directions
  const std::vector<std::array<int, 3>> shapes{{4, 3, 5}, {40, 30, 50}, {130, 130, 130}};
  for (const auto& [m, k, n] : shapes) {
    const Tensor a = random_uniform(rng, {m, k}, -1, 1);
    const Tensor b = random_uniform(rng, {k, n}, -1, 1);
    std::vector<double> omp(static_cast<size_t>(m) * n), ser(omp.size());
    kernels::matmul_nn(a.ptr(), b.ptr(), omp.data(), m, k, n);
    kernels::serial::matmul_nn(a.ptr(), b.ptr(), ser.data(), m, k, n);
    CHECK(bits_equal(omp, ser));
    CHECK(bits_equal(ser, naive_matmul(a.data(), b.data(), m, k, n)));

    std::vector<double> omp_nt(static_cast<size_t>(m) * k), ser_nt(omp_nt.size());
    const Tensor c = random_uniform(rng, {m, n}, -1, 1);
    // nt: [m×n]·[k×n]^T with b reinterpreted as k rows of length n
    kernels::matmul_nt(c.ptr(), b.ptr(), omp_nt.data(), m, n, k);
    kernels::serial::matmul_nt(c.ptr(), b.ptr(), ser_nt.data(), m, n, k);
    CHECK(bits_equal(omp_nt, ser_nt));

    std::vector<double> omp_tn(static_cast<size_t>(k) * n), ser_tn(omp_tn.size());
    kernels::matmul_tn(a.ptr(), c.ptr(), omp_tn.data(), m, k, n);
    kernels::serial::matmul_tn(a.ptr(), c.ptr(), ser_tn.data(), m, k, n);
    CHECK(bits_equal(omp_tn, ser_tn));
  }

  for (int L : {1, 2, 3}) {
    const int m = 64, d = 24;
    const Tensor seq = random_uniform(rng, {m, d}, -1, 1);
    const Tensor filt = random_uniform(rng, {L, d, d}, -1, 1);
    const Tensor bias = random_uniform(rng, {d}, -1, 1);
    std::vector<double> omp(static_cast<size_t>(m) * d), ser(omp.size());
    kernels::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), omp.data(), m, L, d, d);
    kernels::serial::conv1d_same(seq.ptr(), filt.ptr(), bias.ptr(), ser.data(), m, L, d, d);
    CHECK(bits_equal(omp, ser));

    const Tensor gout = random_uniform(rng, {m, d}, -1, 1);
    std::vector<double> gs_omp(static_cast<size_t>(m) * d, 0.25), gs_ser(gs_omp);
    kernels::conv1d_grad_seq(gout.ptr(), filt.ptr(), gs_omp.data(), m, L, d, d);
    kernels::serial::conv1d_grad_seq(gout.ptr(), filt.ptr(), gs_ser.data(), m, L, d, d);
    CHECK(bits_equal(gs_omp, gs_ser));

    std::vector<double> gf_omp(static_cast<size_t>(L) * d * d, -0.5), gf_ser(gf_omp);
    kernels::conv1d_grad_filt(gout.ptr(), seq.ptr(), gf_omp.data(), m, L, d, d);
    kernels::serial::conv1d_grad_filt(gout.ptr(), seq.ptr(), gf_ser.data(), m, L, d, d);
    CHECK(bits_equal(gf_omp, gf_ser));

    std::vector<double> gb_omp(d, 1.0), gb_ser(gb_omp);
    kernels::conv1d_grad_bias(gout.ptr(), gb_omp.data(), m, d);
    kernels::serial::conv1d_grad_bias(gout.ptr(), gb_ser.data(), m, d);
    CHECK(bits_equal(gb_omp, gb_ser));
  }

  for (int n : {100, 1 << 17}) {
    const Tensor x = random_uniform(rng, {n}, -3, 3);
    std::vector<double> omp(static_cast<size_t>(n)), ser(omp.size());
    kernels::vtanh(x.ptr(), omp.data(), n);
    kernels::serial::vtanh(x.ptr(), ser.data(), n);
    CHECK(bits_equal(omp, ser));
  }
}
