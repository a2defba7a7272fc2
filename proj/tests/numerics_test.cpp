#include <doctest.h>

#include <cmath>

#include "stylid/error.hpp"
#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"
#include "support.hpp"

using namespace stylid;
using stylid::testing::random_tensor;

TEST_CASE("matmul hand product") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  CHECK(matmul(a, b).identical(Tensor::matrix({{19, 22}, {43, 50}})));
  CHECK(matmul(Tensor::identity(2), b).identical(b));
  CHECK(matmul(Tensor({2, 2}), b).identical(Tensor({2, 2})));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3] x [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random 4x4 triples") {
  RngStream rng(11);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = random_tensor(rng, {4, 4}), b = random_tensor(rng, {4, 4}), c = random_tensor(rng, {4, 4});
    const Tensor lhs = matmul(matmul(a, b), c), rhs = matmul(a, matmul(b, c));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-9 * std::max(1.0, frobenius_norm(lhs)));
  }
}

TEST_CASE("softmax rows") {
  const Tensor s = softmax_rows(Tensor::matrix({{0, 0, 0}}));
  for (int j = 0; j < 3; ++j) CHECK(s(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Tensor big = softmax_rows(Tensor::matrix({{1000, 0}}));
  CHECK(std::abs(big(0, 0) - 1.0) <= 1e-12);
  CHECK(std::abs(big(0, 1)) <= 1e-12);

  RngStream rng(3);
  for (int i = 0; i < 200; ++i) {
    const Tensor p = softmax_rows(random_tensor(rng, {5, 7}, 30.0));
    for (std::size_t r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 7; ++c) sum += p(r, c);
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

namespace {
std::uint64_t pack(std::uint32_t lo, std::uint32_t hi) { return (std::uint64_t{hi} << 32) | lo; }
}  // namespace

TEST_CASE("philox known answers") {
  // Random123 philox4x32_10 vectors. Counter words are (counter lo, counter
  // hi, stream lo, stream hi); the key is the seed.
  RngStream zero(0, 0, 0);
  auto b = zero.next_block();
  CHECK(b[0] == pack(0x6627e8d5, 0xe169c58d));
  CHECK(b[1] == pack(0xbc57ac4c, 0x9b00dbd8));

  RngStream ones(~0ULL, ~0ULL, ~0ULL);
  b = ones.next_block();
  CHECK(b[0] == pack(0x408f276d, 0x41c83b0e));
  CHECK(b[1] == pack(0xa20bc7c6, 0x6d5451fd));

  RngStream pi(pack(0xa4093822, 0x299f31d0), pack(0x13198a2e, 0x03707344), pack(0x243f6a88, 0x85a308d3));
  b = pi.next_block();
  CHECK(b[0] == pack(0xd16cfe09, 0x94fdcceb));
  CHECK(b[1] == pack(0x5001e420, 0x24126ea1));
}

TEST_CASE("rng determinism and splitting") {
  RngStream a(42), b(42);
  CHECK(gaussian(a, {3, 5}).identical(gaussian(b, {3, 5})));
  const RngStream root(42);
  RngStream s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  const Tensor x = gaussian(s1, {16});
  CHECK(x.identical(gaussian(s1b, {16})));
  CHECK_FALSE(x.identical(gaussian(s2, {16})));
  CHECK(root.counter() == 0);
}

TEST_CASE("gaussian moments over 1e5 draws") {
  RngStream rng(2024);
  const std::size_t n = 100000;
  const Tensor g = gaussian(rng, {n});
  double mean = 0.0;
  for (double v : g.values()) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : g.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("uniforms lie in (0, 1]") {
  RngStream rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_uniform();
    CHECK((u > 0.0 && u <= 1.0));
  }
}

TEST_CASE("finite differences") {
  const ScalarFunction square = [](const Tensor& x) { return x[0] * x[0]; };
  CHECK(std::abs(finite_diff_grad(square, Tensor::vector({3.0}), 1e-4)[0] - 6.0) <= 1e-6);

  const ScalarFunction constant = [](const Tensor&) { return 4.0; };
  CHECK(finite_diff_grad(constant, Tensor::vector({1, 2, 3}))
            .identical(Tensor::vector({0, 0, 0})));

  const Tensor c = Tensor::vector({0.5, -2.0, 3.0});
  const ScalarFunction linear = [&](const Tensor& x) { return dot(c, x); };
  CHECK(max_abs_diff(finite_diff_grad(linear, Tensor::vector({1, 1, 1})), c) <= 1e-9);

  // Degree-2 polynomial in several variables.
  const ScalarFunction quad = [](const Tensor& x) { return 2 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] + 7; };
  const Tensor g = finite_diff_grad(quad, Tensor::vector({1.5, -0.25}));
  CHECK(std::abs(g[0] - (4 * 1.5 + 0.25)) <= 1e-6);
  CHECK(std::abs(g[1] - (-1.5 + 0.5)) <= 1e-6);
}

TEST_CASE("finite differences reject bad input") {
  const ScalarFunction nan_fn = [](const Tensor&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_diff_grad(nan_fn, Tensor::vector({1.0})), EvaluationError);
  const ScalarFunction ok = [](const Tensor& x) { return x[0]; };
  CHECK_THROWS_AS(finite_diff_grad(ok, Tensor::vector({1.0}), 0.0), ConfigError);
}

TEST_CASE("tensor shape validation") {
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2}) + Tensor({3}), ShapeError);
}
