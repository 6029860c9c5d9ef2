// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mao {

// ---------------------------------------------------------------------------
// Buffer accounting
// ---------------------------------------------------------------------------

// Process-wide byte counters for every Tensor buffer. The peak can be reset
// at the start of a measurement window; it then tracks the high-water mark of
// live bytes from that point on.
struct TrackedBytes {
  static std::size_t live() noexcept;
  static std::size_t peak() noexcept;
  static void reset_peak() noexcept;
  static void add(std::size_t bytes) noexcept;
  static void sub(std::size_t bytes) noexcept;
};

template <class T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() noexcept = default;
  template <class U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    TrackedBytes::add(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    TrackedBytes::sub(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, TrackedAllocator<double>>;

// ---------------------------------------------------------------------------
// Tensor / Param
// ---------------------------------------------------------------------------

// Dense row-major tensor of doubles. Rank 1 and 2 are all this project needs,
// but the shape is kept general.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::span<const double> values);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::span<const double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept;
  std::span<const double> row(std::size_t r) const noexcept;

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  void fill(double v) noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  Buffer data_;
};

// A tensor with its gradient. Only trainable params ever receive gradient.
struct Param {
  Tensor value;
  Tensor grad;
  bool trainable = false;

  Param() = default;
  Param(Tensor v, bool is_trainable)
      : value(std::move(v)), grad(value.shape()), trainable(is_trainable) {}

  void zero_grad() noexcept { grad.fill(0.0); }
};

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; the distributions are implemented here because
// the standard library ones are not portable across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream keyed by a label. Does not advance this stream.
  Rng substream(std::string_view label) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64();
  double uniform();  // [0, 1), 53-bit resolution
  double normal();   // standard normal, Box-Muller
  std::size_t index(std::size_t n);  // uniform on [0, n), unbiased

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) noexcept;

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> v) noexcept;

// Unit-length copy of v. Throws kDegenerateInput on a zero (or non-finite) norm.
Tensor l2_normalize(std::span<const double> v);

// Backward of y = v / |v|: returns dv given y, |v| and dy.
void l2_normalize_backward(std::span<const double> y, double norm,
                           std::span<const double> dy, std::span<double> dv);

// softmax(logits / tau) with max subtraction. Throws kConfig if tau <= 0.
std::vector<double> softmax_temp(std::span<const double> logits, double tau);

double log_sum_exp(std::span<const double> v) noexcept;

double cosine_sim(std::span<const double> a, std::span<const double> b);

// Projection of mean-centred points onto their two leading principal axes.
// Each returned row is (pc1, pc2). Components with zero variance are returned
// as zeros. The sign of each axis is fixed so that its first nonzero loading
// is positive.
std::vector<std::array<double, 2>> pca_project_2d(const Tensor& points);

// Symmetric eigen-decomposition by cyclic Jacobi rotations. Eigenvalues are
// returned in descending order; eigenvectors are the columns of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  Tensor vectors;
};
SymmetricEigen symmetric_eigen(const Tensor& a);

// Compares the analytic gradient left in p.grad by `loss_and_grad` against
// central differences. `loss_and_grad` must compute the loss at p.value and
// add its gradient into p.grad. Returns the max over coordinates of
// |analytic - numeric| / max(|analytic|, |numeric|, floor), where floor is
// the resolution of the central difference, DBL_EPSILON * max(1, |loss|) / eps.
double finite_diff_check(const std::function<double(Param&)>& loss_and_grad,
                         Param& p, double eps);

}  // namespace mao
