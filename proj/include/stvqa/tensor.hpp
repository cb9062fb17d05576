#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stvqa {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// log of a non-positive entry, sqrt of negative variance, etc.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// file parsing / format violations
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// combined attention denominator too close to zero
struct DegenerateAttentionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainAbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shape_str(const std::vector<int>& shape);

// Dense row-major tensor of 64-bit floats. Value semantics; shapes are
// checked by the ops that consume it, finiteness by assert_finite.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor full(std::vector<int> shape, double v);

  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int numel() const { return static_cast<int>(data_.size()); }
  const std::vector<int>& shape() const { return shape_; }

  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }
  // 2-D accessors
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool defined() const { return !shape_.empty(); }

  void fill(double v);
  // throws DomainError naming `what` if any entry is NaN or infinite
  void assert_finite(const char* what) const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

int shape_numel(const std::vector<int>& shape);

// Deterministic RNG used everywhere randomness is needed. Wraps a fixed
// engine and hand-rolled distributions so that a (seed, config, data)
// triple reproduces runs bit-exactly on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int below(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
    }
  }

  // derive an independent stream id (splitmix64 over the pair)
  static uint64_t mix(uint64_t a, uint64_t b);

 private:
  std::mt19937_64 eng_;
};

Tensor random_uniform(Rng& rng, std::vector<int> shape, double lo, double hi);

}  // namespace stvqa
