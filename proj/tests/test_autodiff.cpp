#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "pfedpm/autodiff.hpp"

using namespace pfedpm;
using testutil::max_rel_grad_err;
using testutil::random_tensor;

TEST_CASE("sum loss gives all-ones gradient") {
  Tensor x(3, 2, {1, -2, 3, 0.5, -1, 4});
  Tape tape;
  auto id = tape.param(x);
  tape.backward(tape.sum(id));
  for (double g : tape.grad(id).raw()) CHECK(g == 1.0);
}

TEST_CASE("squared-norm gradient at x=[3] is [6]") {
  Tensor x(1, 1, {3});
  Tape tape;
  auto id = tape.param(x);
  tape.backward(tape.mse(id, tape.constant(Tensor(1, 1))));
  CHECK(tape.grad(id).at(0, 0) == 6.0);
}

TEST_CASE("root of adjoint seed is 1") {
  Tensor x(1, 1, {2});
  Tape tape;
  auto id = tape.param(x);
  auto root = tape.sum(id);
  tape.backward(root);
  CHECK(tape.grad(root).at(0, 0) == 1.0);
}

TEST_CASE("non-scalar root rejected") {
  Tape tape;
  auto id = tape.param(Tensor(2, 2));
  CHECK_THROWS_AS(tape.backward(id), ContractError);
}

TEST_CASE("tape closed after backward") {
  Tape tape;
  auto id = tape.param(Tensor(1, 1, {1}));
  tape.backward(tape.sum(id));
  CHECK_THROWS_AS(tape.relu(id), ContractError);
  CHECK_THROWS_AS(tape.param(Tensor(1, 1)), ContractError);
}

TEST_CASE("grad before backward rejected") {
  Tape tape;
  auto id = tape.param(Tensor(1, 1, {1}));
  CHECK_THROWS_AS(tape.grad(id), ContractError);
}

TEST_CASE("constants receive no gradient flow but do not block it") {
  Tensor x(1, 2, {1, 2});
  Tensor c(1, 2, {5, 5});
  Tape tape;
  auto xid = tape.param(x);
  auto cid = tape.constant(c);
  tape.backward(tape.sum(tape.add(xid, cid)));
  CHECK(tape.grad(xid).at(0, 0) == 1.0);
  CHECK(tape.grad(cid).at(0, 0) == 0.0);
}

TEST_CASE("composite 2-layer MLP matches finite differences below 1e-5") {
  CounterRng rng(42, 99);
  Tensor x = random_tensor(5, 4, rng);
  Tensor w1 = random_tensor(4, 6, rng, -0.8, 0.8);
  Tensor b1 = random_tensor(1, 6, rng, -0.5, 0.5);
  Tensor w2 = random_tensor(6, 3, rng, -0.8, 0.8);
  Tensor b2 = random_tensor(1, 3, rng, -0.5, 0.5);
  std::vector<int> labels{0, 2, 1, 1, 0};

  double err = max_rel_grad_err(
      {x, w1, b1, w2, b2},
      [&labels](Tape& t, const std::vector<Tape::NodeId>& in) {
        auto h = t.relu(t.add_bias(t.matmul(in[0], in[1]), in[2]));
        auto logits = t.add_bias(t.matmul(h, in[3]), in[4]);
        return t.softmax_cross_entropy(logits, labels);
      });
  CHECK(err < 1e-5);
}

TEST_CASE("gather_rows scatter-adds its adjoint") {
  CounterRng rng(8, 99);
  Tensor x = random_tensor(4, 3, rng);
  std::vector<int> idx{0, 2, 2, 3};
  double err = max_rel_grad_err({x}, [&idx](Tape& t, const std::vector<Tape::NodeId>& in) {
    return t.sum(t.sigmoid(t.gather_rows(in[0], idx)));
  });
  CHECK(err < 1e-5);
}

TEST_CASE("scale and add compose") {
  CounterRng rng(9, 99);
  Tensor a = random_tensor(2, 2, rng);
  Tensor b = random_tensor(2, 2, rng);
  double err = max_rel_grad_err({a, b}, [](Tape& t, const std::vector<Tape::NodeId>& in) {
    return t.sum(t.add(t.scale(in[0], 2.5), in[1]));
  });
  CHECK(err < 1e-5);
}
