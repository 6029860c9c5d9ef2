// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mao/errors.hpp"
#include "mao/numerics.hpp"
#include "oracles.hpp"

using namespace mao;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kUsage;  // sentinel: nothing thrown
}

}  // namespace

TEST_CASE("l2_normalize") {
  auto y = l2_normalize(std::vector<double>{3.0, 4.0});
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-15));

  const std::vector<double> unit{0.0, 1.0, 0.0};
  CHECK(oracle::to_vec(l2_normalize(unit).data()) == unit);

  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto v = random_vec(rng, 16, std::exp(4.0 * rng.normal()));
    const auto n = l2_normalize(v);
    CHECK(std::abs(oracle::norm(oracle::to_vec(n.data())) - 1.0) < 1e-12);
    CHECK(oracle::cosine(v, oracle::to_vec(n.data())) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(code_of([] { l2_normalize(std::vector<double>{0.0, 0.0}); }) ==
        ErrorCode::kDegenerateInput);
}

TEST_CASE("l2_normalize_backward against finite differences") {
  Rng rng(3);
  const auto v = random_vec(rng, 6);
  const auto dy = random_vec(rng, 6);
  const auto y = l2_normalize(v);
  std::vector<double> dv(6, 0.0);
  l2_normalize_backward(y.data(), norm2(v), dy, dv);
  for (std::size_t i = 0; i < 6; ++i) {
    auto plus = v, minus = v;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double num = (oracle::dot(oracle::to_vec(l2_normalize(plus).data()), dy) -
                        oracle::dot(oracle::to_vec(l2_normalize(minus).data()), dy)) /
                       2e-6;
    CHECK(dv[i] == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("softmax_temp") {
  for (double tau : {0.01, 1.0, 50.0}) {
    for (double p : softmax_temp(std::vector<double>{0.3, 0.3, 0.3, 0.3}, tau)) {
      CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
    }
  }

  double prev = 1.0;
  for (double tau : {0.1, 1.0, 10.0, 100.0, 1e4}) {
    const auto p = softmax_temp(std::vector<double>{1.0, 0.0}, tau);
    CHECK(p[0] < prev);
    CHECK(p[0] > 0.5);
    prev = p[0];
  }
  CHECK(prev == doctest::Approx(0.5).epsilon(1e-4));

  // Scalar recomputation of (2, 1, 0) at tau = 1.
  const double z = std::exp(2.0) + std::exp(1.0) + 1.0;
  const auto p = softmax_temp(std::vector<double>{2.0, 1.0, 0.0}, 1.0);
  CHECK(std::abs(p[0] - std::exp(2.0) / z) < 1e-12);
  CHECK(std::abs(p[1] - std::exp(1.0) / z) < 1e-12);
  CHECK(std::abs(p[2] - 1.0 / z) < 1e-12);

  Rng rng(5);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + rng.index(40);
    const auto logits = random_vec(rng, n, 1.0 + 100.0 * rng.uniform());
    const double tau = 0.001 + rng.uniform();
    const auto q = softmax_temp(logits, tau);
    double s = 0.0;
    for (double x : q) {
      s += x;
      if (!(x >= 0.0)) ++bad;
    }
    if (std::abs(s - 1.0) > 1e-12) ++bad;
  }
  CHECK(bad == 0);

  CHECK(code_of([] { softmax_temp(std::vector<double>{1.0}, 0.0); }) == ErrorCode::kConfig);
  CHECK(code_of([] { softmax_temp(std::vector<double>{1.0}, -1.0); }) == ErrorCode::kConfig);
}

TEST_CASE("log_sum_exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{0.0, std::log(3.0)}) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("cosine_sim") {
  CHECK(cosine_sim(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 1.0);
  CHECK(cosine_sim(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_sim(std::vector<double>{1, 2, 2}, std::vector<double>{2, 1, 2}) ==
        doctest::Approx(8.0 / 9.0).epsilon(1e-15));

  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_vec(rng, 7);
    const auto b = random_vec(rng, 7);
    auto a3 = a;
    for (double& x : a3) x *= 3.7;
    CHECK(cosine_sim(a, b) == doctest::Approx(cosine_sim(b, a)).epsilon(1e-14));
    CHECK(cosine_sim(a3, b) == doctest::Approx(cosine_sim(a, b)).epsilon(1e-13));
    CHECK(std::abs(cosine_sim(a, b)) <= 1.0);
  }
  CHECK(code_of([] { cosine_sim(std::vector<double>{0, 0}, std::vector<double>{1, 0}); }) ==
        ErrorCode::kDegenerateInput);
}

TEST_CASE("pca_project_2d on 2-d input is a rotation") {
  Rng rng(21);
  Tensor pts({6, 2});
  for (double& x : pts.data()) x = rng.normal();
  const auto proj = pca_project_2d(pts);
  // Pairwise distances survive a rotation of the centred cloud.
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      const double din = std::hypot(pts.at(i, 0) - pts.at(j, 0), pts.at(i, 1) - pts.at(j, 1));
      const double dout = std::hypot(proj[i][0] - proj[j][0], proj[i][1] - proj[j][1]);
      CHECK(dout == doctest::Approx(din).epsilon(1e-10));
    }
  }
}

TEST_CASE("pca_project_2d of collinear points has a flat second axis") {
  Tensor pts({5, 3});
  for (std::size_t i = 0; i < 5; ++i) {
    const double t = double(i) - 1.3 * double(i * i % 3);
    pts.at(i, 0) = 1.0 + 2.0 * t;
    pts.at(i, 1) = -1.0 + t;
    pts.at(i, 2) = 0.5 * t;
  }
  for (const auto& p : pca_project_2d(pts)) CHECK(std::abs(p[1]) < 1e-9);
}

TEST_CASE("pca_project_2d matches an Eigen eigen-decomposition") {
  Rng rng(1234);
  Tensor pts({10, 8});
  Eigen::MatrixXd m(10, 8);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      pts.at(i, j) = rng.normal() * double(j + 1);
      m(long(i), long(j)) = pts.at(i, j);
    }
  }
  const Eigen::MatrixXd centred = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / 9.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();

  const auto proj = pca_project_2d(pts);
  double v1 = 0.0, v2 = 0.0, total = 0.0;
  for (const auto& p : proj) {
    v1 += p[0] * p[0] / 9.0;
    v2 += p[1] * p[1] / 9.0;
  }
  for (long j = 0; j < 8; ++j) total += cov(j, j);
  CHECK(v1 == doctest::Approx(ev(0)).epsilon(1e-9));
  CHECK(v2 == doctest::Approx(ev(1)).epsilon(1e-9));
  CHECK(v1 / v2 == doctest::Approx(ev(0) / ev(1)).epsilon(1e-9));
  CHECK(v1 + v2 <= total + 1e-12);

  // Same axes up to the sign convention (first nonzero loading positive).
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::VectorXd u = vecs.col(axis);
    long first = 0;
    while (std::abs(u(first)) < 1e-12) ++first;
    if (u(first) < 0) u = -u;
    const Eigen::VectorXd ref = centred * u;
    for (long i = 0; i < 10; ++i) {
      CHECK(proj[std::size_t(i)][std::size_t(axis)] == doctest::Approx(ref(i)).epsilon(1e-8));
    }
  }

  const auto again = pca_project_2d(pts);
  CHECK(again == proj);
}

TEST_CASE("pca_project_2d zero-pads a rank-deficient cloud") {
  Tensor pts({4, 3}, 1.0);
  for (const auto& p : pca_project_2d(pts)) {
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.0);
  }
}

TEST_CASE("symmetric_eigen reconstructs its input") {
  Rng rng(8);
  Tensor a({5, 5});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j <= i; ++j) a.at(i, j) = a.at(j, i) = rng.normal();
  const auto e = symmetric_eigen(a);
  for (std::size_t i = 1; i < 5; ++i) CHECK(e.values[i - 1] >= e.values[i]);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += e.vectors.at(i, k) * e.values[k] * e.vectors.at(j, k);
      CHECK(s == doctest::Approx(a.at(i, j)).epsilon(1e-10));
    }
  }
}

TEST_CASE("finite_diff_check") {
  Rng rng(4);
  Param p(Tensor({7}), true);
  for (double& x : p.value.data()) x = rng.normal();

  const double quad = finite_diff_check(
      [](Param& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.value.size(); ++i) {
          s += 0.5 * q.value[i] * q.value[i];
          q.grad[i] += q.value[i];
        }
        return s;
      },
      p, 1e-5);
  CHECK(quad < 1e-8);

  const double flat = finite_diff_check([](Param&) { return 3.0; }, p, 1e-5);
  CHECK(flat == 0.0);

  // A wrong gradient is caught.
  const double wrong = finite_diff_check(
      [](Param& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.value.size(); ++i) {
          s += q.value[i] * q.value[i];
          q.grad[i] += q.value[i];
        }
        return s;
      },
      p, 1e-5);
  CHECK(wrong > 0.4);

  // Roundoff-sized gradients on a flat loss are within the difference's
  // resolution; a small but real gradient is not.
  const double noise = finite_diff_check(
      [](Param& q) {
        for (std::size_t i = 0; i < q.value.size(); ++i) q.grad[i] += (i % 2 ? 1e-16 : -1e-16);
        return 0.0;
      },
      p, 1e-5);
  CHECK(noise < 1e-4);
  const double missed = finite_diff_check(
      [](Param& q) {
        q.grad[0] += 1e-6;
        return 0.0;
      },
      p, 1e-5);
  CHECK(missed == doctest::Approx(1.0));

  CHECK(code_of([&] {
          finite_diff_check([](Param&) { return std::nan(""); }, p, 1e-5);
        }) == ErrorCode::kNumerical);
}

TEST_CASE("Rng is deterministic and substreams are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  const Rng root(42);
  Rng s1 = root.substream("x");
  Rng s1b = root.substream("x");
  Rng s2 = root.substream("y");
  int same = 0;
  for (int i = 0; i < 100; ++i) {
    const auto v = s1.next_u64();
    CHECK(v == s1b.next_u64());
    same += v == s2.next_u64();
  }
  CHECK(same == 0);

  Rng u(1);
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = u.normal();
    mean += x;
    var += x * x;
  }
  mean /= 20000;
  var = var / 20000 - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);

  Rng idx(2);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) ++counts[idx.index(5)];
  for (int c : counts) CHECK(std::abs(c - 1000) < 120);
}

TEST_CASE("tracked bytes follow tensor lifetimes") {
  TrackedBytes::reset_peak();
  const std::size_t before = TrackedBytes::live();
  {
    Tensor t({100});
    CHECK(TrackedBytes::live() == before + 100 * sizeof(double));
  }
  CHECK(TrackedBytes::live() == before);
  CHECK(TrackedBytes::peak() >= before + 100 * sizeof(double));
}

TEST_CASE("Tensor shape bookkeeping") {
  Tensor m({3, 4}, 2.0);
  CHECK(m.size() == 12);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 4);
  m.at(2, 3) = 5.0;
  CHECK(m.row(2)[3] == 5.0);
  const Tensor v = Tensor::vector({1.0, 2.0});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 2);
  CHECK(m.all_finite());
  m[0] = std::nan("");
  CHECK_FALSE(m.all_finite());
}
