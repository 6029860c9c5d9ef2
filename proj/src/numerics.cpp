// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "mao/errors.hpp"

namespace mao {

namespace {

std::atomic<std::size_t> g_live_bytes{0};
std::atomic<std::size_t> g_peak_bytes{0};

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t TrackedBytes::live() noexcept { return g_live_bytes.load(); }
std::size_t TrackedBytes::peak() noexcept { return g_peak_bytes.load(); }
void TrackedBytes::reset_peak() noexcept { g_peak_bytes.store(g_live_bytes.load()); }

void TrackedBytes::add(std::size_t bytes) noexcept {
  std::size_t now = g_live_bytes.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak_bytes.load();
  while (now > peak && !g_peak_bytes.compare_exchange_weak(peak, now)) {
  }
}

void TrackedBytes::sub(std::size_t bytes) noexcept { g_live_bytes.fetch_sub(bytes); }

// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::span<const double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (data_.size() != product(shape_)) {
    fail(ErrorCode::kShape, "tensor data length " + std::to_string(data_.size()) +
                                " does not match shape product " +
                                std::to_string(product(shape_)));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::span<const double>(values.begin(), values.size()));
}

Tensor Tensor::vector(std::span<const double> values) {
  return Tensor({values.size()}, values);
}

std::size_t Tensor::rows() const noexcept {
  return shape_.size() >= 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

std::span<double> Tensor::row(std::size_t r) noexcept {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

std::span<const double> Tensor::row(std::size_t r) const noexcept {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) noexcept {
  // FNV-1a over the label, then folded into the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::substream(std::string_view label) const { return Rng(mix_seed(seed_, label)); }

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) fail(ErrorCode::kArgument, "Rng::index called with n = 0");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

Tensor l2_normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    fail(ErrorCode::kDegenerateInput, "l2_normalize: input has zero or non-finite norm");
  }
  Tensor out({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

void l2_normalize_backward(std::span<const double> y, double norm,
                           std::span<const double> dy, std::span<double> dv) {
  const double proj = dot(y, dy);
  for (std::size_t i = 0; i < y.size(); ++i) dv[i] += (dy[i] - y[i] * proj) / norm;
}

std::vector<double> softmax_temp(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kConfig, "softmax temperature must be positive");
  if (logits.empty()) fail(ErrorCode::kArgument, "softmax of an empty row");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / tau);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double log_sum_exp(std::span<const double> v) noexcept {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::kShape, "cosine_sim: operand sizes differ");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (!(na > 0.0) || !(nb > 0.0)) {
    fail(ErrorCode::kDegenerateInput, "cosine_sim: zero-norm operand");
  }
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

// ---------------------------------------------------------------------------

SymmetricEigen symmetric_eigen(const Tensor& input) {
  const std::size_t n = input.rows();
  if (input.cols() != n) fail(ErrorCode::kShape, "symmetric_eigen: matrix is not square");
  Tensor a = input;
  Tensor v({n, n});
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.data()) scale = std::max(scale, std::abs(x));
  const double tol = std::max(scale, 1e-300) * 1e-15;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a.at(p, q)));
    if (off <= tol) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k);
          const double aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p);
          const double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a.at(i, i) > a.at(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Tensor({n, n});
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a.at(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, k) = v.at(i, order[k]);
  }
  return out;
}

std::vector<std::array<double, 2>> pca_project_2d(const Tensor& points) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (points.shape().size() != 2 || n < 3 || d < 2) {
    fail(ErrorCode::kArgument, "pca_project_2d needs at least 3 points of dimension >= 2");
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += points.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);

  Tensor centred({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centred.at(i, j) = points.at(i, j) - mean[j];

  Tensor cov({d, d});
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += centred.at(i, a) * centred.at(i, b);
      s /= static_cast<double>(n - 1);
      cov.at(a, b) = s;
      cov.at(b, a) = s;
    }
  }

  const SymmetricEigen eig = symmetric_eigen(cov);
  const double top = std::max(eig.values[0], 0.0);

  std::vector<std::array<double, 2>> out(n, {0.0, 0.0});
  for (std::size_t k = 0; k < 2; ++k) {
    // Rank-deficient direction: leave the coordinate at zero.
    if (!(eig.values[k] > top * 1e-12) || top == 0.0) continue;
    std::vector<double> axis(d);
    for (std::size_t j = 0; j < d; ++j) axis[j] = eig.vectors.at(j, k);
    for (double x : axis) {
      if (std::abs(x) > 1e-12) {
        if (x < 0.0)
          for (double& y : axis) y = -y;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i][k] = dot(centred.row(i), axis);
  }
  return out;
}

// ---------------------------------------------------------------------------

double finite_diff_check(const std::function<double(Param&)>& loss_and_grad,
                         Param& p, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    fail(ErrorCode::kArgument, "finite_diff_check: eps must lie in [1e-7, 1e-3]");
  }
  p.zero_grad();
  const double base = loss_and_grad(p);
  if (!std::isfinite(base)) fail(ErrorCode::kNumerical, "finite_diff_check: non-finite loss");
  const Tensor analytic = p.grad;
  const double floor =
      std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base)) / eps;

  double worst = 0.0;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double saved = p.value[i];
    p.value[i] = saved + eps;
    p.zero_grad();
    const double up = loss_and_grad(p);
    p.value[i] = saved - eps;
    p.zero_grad();
    const double down = loss_and_grad(p);
    p.value[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorCode::kNumerical, "finite_diff_check: non-finite loss at coordinate " +
                                      std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  p.grad = analytic;
  return worst;
}

}  // namespace mao
