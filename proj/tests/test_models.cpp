#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pfedpm/models.hpp"

using namespace pfedpm;

namespace {

BodySpec small_spec() { return {4, {5}, 3}; }

template <class PtrVecA, class PtrVecB>
bool params_equal(const PtrVecA& a, const PtrVecB& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i] == *b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("init_body is reproducible from seed") {
  Body a = init_body(small_spec(), 7, 0);
  Body b = init_body(small_spec(), 7, 0);
  CHECK(params_equal(a.params(), b.params()));

  Body c = init_body(small_spec(), 8, 0);
  CHECK_FALSE(params_equal(a.params(), c.params()));
  Body d = init_body(small_spec(), 7, 1);
  CHECK_FALSE(params_equal(a.params(), d.params()));
}

TEST_CASE("init weights are centered: empirical mean within 3 sigma of 0") {
  // 10^4 draws of uniform(-b, b): stdev of the mean = b/sqrt(3*n)
  BodySpec spec{100, {}, 100};  // single 100x100 layer
  Body body = init_body(spec, 123, 0);
  double bound = std::sqrt(6.0 / 200.0);
  double s = 0.0;
  for (double w : body.layers[0].W.raw()) s += w;
  double mean = s / body.layers[0].W.size();
  double sigma_mean = bound / std::sqrt(3.0 * body.layers[0].W.size());
  CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("init biases are zero") {
  Body body = init_body(small_spec(), 7, 0);
  for (const auto& l : body.layers)
    for (double b : l.b.raw()) CHECK(b == 0.0);
}

TEST_CASE("body_forward shape contract and zero case") {
  Body body = init_body(small_spec(), 7, 0);
  Tensor x(6, 4);
  CHECK(body_forward(body, x).cols() == 3);
  CHECK(body_forward(body, x).rows() == 6);
  CHECK_THROWS_AS(body_forward(body, Tensor(2, 5)), DimensionError);

  for (Tensor* p : body.params())
    for (double& v : p->raw()) v = 0.0;
  Tensor h = body_forward(body, Tensor(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}));
  for (double v : h.raw()) CHECK(v == 0.0);
}

TEST_CASE("identity-like hidden layer applies relu") {
  BodySpec spec{2, {2}, 2};
  Body body = init_body(spec, 7, 0);
  for (Tensor* p : body.params())
    for (double& v : p->raw()) v = 0.0;
  body.layers[0].W.at(0, 0) = 1.0;
  body.layers[0].W.at(1, 1) = 1.0;
  body.layers[1].W.at(0, 0) = 1.0;
  body.layers[1].W.at(1, 1) = 1.0;
  Tensor x(1, 2, {-3, 5});
  CHECK(body_forward(body, x) == Tensor(1, 2, {0, 5}));
}

TEST_CASE("decision_forward zero head gives uniform softmax") {
  DecisionHead head = init_decision_head(3, {}, 4, 7, 0);
  for (Tensor* p : head.params())
    for (double& v : p->raw()) v = 0.0;
  Tensor logits = decision_forward(head, Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
  for (double v : logits.raw()) CHECK(v == 0.0);
  Tensor probs = softmax_rows(logits);
  for (double v : probs.raw()) CHECK(v == 0.25);
}

TEST_CASE("decision_forward empty batch gives 0xC output") {
  DecisionHead head = init_decision_head(3, {}, 4, 7, 0);
  Tensor out = decision_forward(head, Tensor(0, 3));
  CHECK(out.rows() == 0);
  CHECK(out.cols() == 4);
}

TEST_CASE("decision logits argmax stable under batch duplication") {
  DecisionHead head = init_decision_head(3, {8}, 4, 7, 0);
  Tensor h(2, 3, {0.5, -1, 2, 1, 1, -0.5});
  Tensor once = decision_forward(head, h);
  Tensor twice_in(4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) twice_in.at(r, c) = h.at(r % 2, c);
  Tensor twice = decision_forward(head, twice_in);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(twice.at(r, c) == once.at(r % 2, c));
}

TEST_CASE("relation_forward scores in (0,1), zero head gives 0.5") {
  RelationHead head = init_relation_head(3, 8, 7, 0);
  Tensor pairs(5, 6, {0.1, -2, 3, 0.5, 1, -1, 2, 2, 2, 2, 2, 2, -1, 0, 1, 0, -1, 1,
                      0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 9, -9, 9, -9, 9, -9});
  Tensor s = relation_forward(head, pairs);
  CHECK(s.cols() == 1);
  for (double v : s.raw()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  for (Tensor* p : head.params())
    for (double& v : p->raw()) v = 0.0;
  Tensor s0 = relation_forward(head, pairs);
  for (double v : s0.raw()) CHECK(v == 0.5);
}

TEST_CASE("relation_forward row permutation permutes outputs") {
  RelationHead head = init_relation_head(2, 6, 7, 0);
  Tensor pairs(3, 4, {1, 2, 3, 4, -1, -2, -3, -4, 0.5, 0, 0.5, 0});
  Tensor s = relation_forward(head, pairs);
  Tensor perm(3, 4);
  int order[3] = {2, 0, 1};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) perm.at(r, c) = pairs.at(order[r], c);
  Tensor sp = relation_forward(head, perm);
  for (int r = 0; r < 3; ++r) CHECK(sp.at(r, 0) == s.at(order[r], 0));
}

TEST_CASE("sgd_step fixed point and plain step") {
  Tensor p(1, 1, {1});
  SgdOptimizer opt{0.01, 0.0, {}};
  opt.step({&p}, {Tensor(1, 1)});
  CHECK(p.at(0, 0) == 1.0);

  opt.step({&p}, {Tensor(1, 1, {2})});
  CHECK(p.at(0, 0) == doctest::Approx(0.98).epsilon(1e-15));
}

TEST_CASE("sgd_step heavy-ball recurrence") {
  // momentum 0.5, eta 1, g=1 constant, p0=0: p1=-1, p2=-2.5
  Tensor p(1, 1);
  SgdOptimizer opt{1.0, 0.5, {}};
  opt.step({&p}, {Tensor(1, 1, {1})});
  CHECK(p.at(0, 0) == -1.0);
  opt.step({&p}, {Tensor(1, 1, {1})});
  CHECK(p.at(0, 0) == -2.5);
}

TEST_CASE("sgd_step on convex quadratic decreases loss") {
  // loss = ||p||^2, grad = 2p, eta = 0.1 < 2/curvature = 1
  Tensor p(1, 3, {1, -2, 0.5});
  double before = 0.0;
  for (double v : p.raw()) before += v * v;
  SgdOptimizer opt{0.1, 0.0, {}};
  Tensor g = p;
  for (double& v : g.raw()) v *= 2.0;
  opt.step({&p}, {g});
  double after = 0.0;
  for (double v : p.raw()) after += v * v;
  CHECK(after < before);
}

TEST_CASE("sgd_step shape mismatch rejected") {
  Tensor p(1, 2);
  SgdOptimizer opt{0.01, 0.5, {}};
  CHECK_THROWS_AS(opt.step({&p}, {Tensor(1, 3)}), ContractError);
}

TEST_CASE("forwards are pure") {
  Body body = init_body(small_spec(), 3, 0);
  Tensor x(4, 4, {1, 2, 3, 4, 5, 6, 7, 8, -1, -2, -3, -4, 0, 0.5, 1, 1.5});
  CHECK(body_forward(body, x) == body_forward(body, x));
}

TEST_CASE("heterogeneous hidden widths share feature_dim") {
  Body a = init_body({10, {16}, 5}, 7, 0);
  Body b = init_body({10, {32, 8}, 5}, 7, 1);
  Tensor x(3, 10);
  CHECK(body_forward(a, x).cols() == 5);
  CHECK(body_forward(b, x).cols() == 5);
}
