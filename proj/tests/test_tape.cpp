#include <doctest.h>

#include <array>
#include <cmath>

#include "mazeadapt/error.hpp"
#include "mazeadapt/grad_check.hpp"
#include "mazeadapt/param_vector.hpp"
#include "mazeadapt/rng.hpp"
#include "mazeadapt/tape.hpp"

using namespace mazeadapt;
using ad::Tape;
using ad::Var;

TEST_CASE("forward primitives: definitional values") {
  Tape tape;
  Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  CHECK(tape.value(tape.matmul(m, eye)) == tape.value(m));

  Var r = tape.relu(tape.constant(Tensor::vector({-1, 0, 2})));
  CHECK(tape.value(r) == Tensor::vector({0, 0, 2}));

  Var s = tape.sigmoid(tape.constant(Tensor::scalar(0.0)));
  CHECK(tape.value(s).data[0] == doctest::Approx(0.5));
}

TEST_CASE("shape mismatch names both shapes") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  Var b = tape.constant(Tensor::matrix(2, 2, std::vector<double>(4, 1.0)));
  try {
    tape.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("non-finite forward output is a numeric error") {
  Tape tape;
  Var big = tape.constant(Tensor::scalar(1e308));
  CHECK_THROWS_AS(tape.add(big, big), NumericError);
}

TEST_CASE("backward on linear sum gives ones") {
  Tape tape;
  Var w = tape.leaf(Tensor::vector({1.0, -2.0, 3.0}));
  Var loss = tape.sum(w);
  tape.backward(loss);
  CHECK(tape.grad(w) == Tensor::vector({1, 1, 1}));
}

TEST_CASE("sigmoid derivative at zero is 1/4") {
  Tape tape;
  Var w = tape.leaf(Tensor::scalar(0.0));
  Var loss = tape.sum(tape.sigmoid(w));
  tape.backward(loss);
  CHECK(tape.grad(w).data[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward contract errors") {
  SUBCASE("non-scalar loss") {
    Tape tape;
    Var w = tape.leaf(Tensor::vector({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(w), ContractError);
  }
  SUBCASE("second backward without re-forward") {
    Tape tape;
    Var w = tape.leaf(Tensor::scalar(1.0));
    Var loss = tape.sum(w);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), StateError);
  }
  SUBCASE("unreached leaves keep zero gradients") {
    Tape tape;
    Var used = tape.leaf(Tensor::scalar(2.0));
    Var unused = tape.leaf(Tensor::vector({5.0, 6.0}));
    tape.backward(tape.sum(used));
    CHECK(tape.grad(unused) == Tensor::zeros({2}));
  }
}

namespace {

// Small random network exercising every differentiable primitive:
// loss = BCE(sigmoid(concat(relu(x.W1 + b), scale(x.W2, 0.7)) row), targets)
// with a slice/reshape detour so those backward paths are covered too.
double primitive_net_loss(std::span<const double> flat, Tensor* grads_out = nullptr) {
  ParamVector p;
  p.add("w1", {4, 3});
  p.add("b", {3});
  p.add("w2", {4, 2});
  p.set_flat(flat);

  Tape tape;
  Var theta = tape.leaf(p.flat());
  Var w1 = tape.reshape(tape.slice(theta, 0, 12), {4, 3});
  Var b = tape.reshape(tape.slice(theta, 12, 3), {3});
  Var w2 = tape.reshape(tape.slice(theta, 15, 8), {4, 2});

  Tensor x = Tensor::matrix(2, 4, {0.5, -1.0, 0.25, 2.0, 1.5, 0.75, -0.5, 1.0});
  Var xa = tape.constant(x);
  Var h = tape.relu(tape.add_bias(tape.matmul(xa, w1), b));
  Var t = tape.scale(tape.matmul(xa, w2), 0.7);
  std::array<Var, 2> parts{h, t};
  Var wide = tape.concat(parts);
  Var y = tape.sigmoid(wide);
  Tensor targets = Tensor::matrix(2, 5, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  Var loss = tape.bce_loss(y, targets);
  const double value = tape.value(loss).data[0];
  if (grads_out) {
    tape.backward(loss);
    *grads_out = tape.grad(theta);
  }
  return value;
}

}  // namespace

TEST_CASE("random net gradients match central finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> point(23);
    fill_uniform(point, -2.0, 2.0, rng);
    Tensor analytic;
    primitive_net_loss(point, &analytic);
    const double err = ad::grad_check([](std::span<const double> x) {
      return primitive_net_loss(x);
    }, point, analytic.data);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("mse and distance losses match finite differences") {
  Rng rng(13);
  SUBCASE("mse") {
    Tensor targets = Tensor::vector({0.5, -1.0, 2.0, 0.0});
    auto f = [&](std::span<const double> x) {
      Tape tape;
      Var v = tape.leaf(Tensor::vector({x[0], x[1], x[2], x[3]}));
      return tape.value(tape.mse_loss(v, targets)).data[0];
    };
    std::vector<double> point(4);
    fill_uniform(point, -2.0, 2.0, rng);
    Tape tape;
    Var v = tape.leaf(Tensor::vector({point[0], point[1], point[2], point[3]}));
    Var loss = tape.mse_loss(v, targets);
    tape.backward(loss);
    CHECK(ad::grad_check(f, point, tape.grad(v).data) < 1e-6);
  }
  SUBCASE("distance loss") {
    Tensor target = Tensor::vector({1.1, 0.9, 1.0});  // 3 rows -> 3 pairs
    auto f = [&](std::span<const double> x) {
      Tape tape;
      Var z = tape.leaf(Tensor::matrix(3, 2, std::vector<double>(x.begin(), x.end())));
      return tape.value(tape.distance_loss(z, target)).data[0];
    };
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> point(6);
      fill_uniform(point, -2.0, 2.0, rng);
      Tape tape;
      Var z = tape.leaf(Tensor::matrix(3, 2, point));
      Var loss = tape.distance_loss(z, target);
      tape.backward(loss);
      CHECK(ad::grad_check(f, point, tape.grad(z).data) < 1e-5);
    }
  }
}

TEST_CASE("distance loss rejects degenerate input") {
  Tape tape;
  Var z = tape.leaf(Tensor::matrix(3, 2, std::vector<double>(6, 0.5)));
  CHECK_THROWS_AS(tape.distance_loss(z, Tensor::vector({1, 1, 1})), NumericError);
  Var one = tape.leaf(Tensor::matrix(1, 2, {0.0, 1.0}));
  CHECK_THROWS_AS(tape.distance_loss(one, Tensor::vector({})), ContractError);
}

TEST_CASE("bce at the all-0.5 point is ln 2") {
  Tape tape;
  Var p = tape.leaf(Tensor::vector({0.5, 0.5, 0.5}));
  Var loss = tape.bce_loss(p, Tensor::vector({1, 0, 1}));
  CHECK(tape.value(loss).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("forward and backward are bit-deterministic") {
  auto run = [](Tensor* grad) {
    std::vector<double> point(23);
    Rng rng(99);
    fill_uniform(point, -2.0, 2.0, rng);
    return primitive_net_loss(point, grad);
  };
  Tensor g1, g2;
  const double l1 = run(&g1);
  const double l2 = run(&g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("param vector round trip and sgd") {
  ParamVector p;
  p.add("w", {2, 2});
  p.add("b", {2});
  Rng rng(5);
  fill_uniform(p.values(), -1.0, 1.0, rng);

  SUBCASE("unflatten(flatten) is the identity, bit for bit") {
    const Tensor flat = p.flat();
    ParamVector q = p.zeros_like();
    q.set_flat(flat.data);
    CHECK(q.values().size() == p.values().size());
    CHECK(q.tensor("w") == p.tensor("w"));
    CHECK(q.tensor("b") == p.tensor("b"));
  }

  SUBCASE("json checkpoint round trip") {
    const ParamVector q = ParamVector::from_json(p.to_json());
    CHECK(q.same_layout(p));
    CHECK(q.flat() == p.flat());
  }

  SUBCASE("segments partition the flat array") {
    std::size_t at = 0;
    for (std::size_t i = 0; i < p.num_segments(); ++i) {
      CHECK(p.segment(i).offset == at);
      at += p.segment(i).size;
    }
    CHECK(at == p.size());
  }

  SUBCASE("sgd arithmetic") {
    ParamVector params = p.zeros_like();
    params.set_flat(std::vector<double>{1, 2, 0, 0, 0, 0});
    ParamVector grads = p.zeros_like();
    grads.set_flat(std::vector<double>{1, 1, 0, 0, 0, 0});
    const ParamVector out = sgd_step(params, grads, 0.5);
    CHECK(out.values()[0] == 0.5);
    CHECK(out.values()[1] == 1.5);

    const ParamVector still = sgd_step(params, params.zeros_like(), 0.1);
    CHECK(still.flat() == params.flat());

    ParamVector other;
    other.add("w", {3});
    CHECK_THROWS_AS(sgd_step(params, other, 0.1), ContractError);
  }

  SUBCASE("descent on w^2 converges monotonically to zero") {
    ParamVector w;
    w.add("w", {1});
    w.values()[0] = 1.0;
    double prev = 1.0;
    for (int i = 0; i < 50; ++i) {
      ParamVector g = w.zeros_like();
      g.values()[0] = 2.0 * w.values()[0];
      w = sgd_step(w, g, 0.1);
      CHECK(std::abs(w.values()[0]) < prev);
      prev = std::abs(w.values()[0]);
    }
    CHECK(prev < 1e-4);
  }
}

TEST_CASE("grad_check on a quadratic form is exact to rounding") {
  //  f(x) = x . diag(1, 2, 3) . x
  auto f = [](std::span<const double> x) {
    return x[0] * x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[2];
  };
  const std::vector<double> point{0.3, -0.7, 1.1};
  const std::vector<double> analytic{2.0 * point[0], 4.0 * point[1], 6.0 * point[2]};
  CHECK(ad::grad_check(f, point, analytic) < 1e-8);
}

TEST_CASE("rng streams are deterministic and well-behaved") {
  SUBCASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  }
  SUBCASE("normal moments") {
    Rng rng(4242);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double v = rng.normal();
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.1);
  }
  SUBCASE("below is unbiased-ish and in range") {
    Rng rng(7);
    std::array<int, 5> counts{};
    for (int i = 0; i < 5000; ++i) ++counts[rng.below(5)];
    for (int c : counts) CHECK(c > 800);
  }
}
