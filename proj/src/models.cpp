#include "pfedpm/models.hpp"

#include <cmath>

namespace pfedpm {

namespace {

// Glorot-uniform weights, zero biases.
Layer init_layer(int fan_in, int fan_out, CounterRng& rng) {
  Layer l;
  l.W = Tensor(fan_in, fan_out);
  l.b = Tensor(1, fan_out);
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& w : l.W.raw()) w = rng.uniform(-bound, bound);
  return l;
}

std::vector<Layer> init_mlp(const std::vector<int>& dims, CounterRng& rng) {
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    layers.push_back(init_layer(dims[i], dims[i + 1], rng));
  return layers;
}

template <typename Net>
std::vector<Tensor*> collect(Net& net) {
  std::vector<Tensor*> out;
  for (auto& l : net.layers) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

template <typename Net>
std::vector<const Tensor*> collect_const(const Net& net) {
  std::vector<const Tensor*> out;
  for (const auto& l : net.layers) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

// ReLU on all but the last layer; last layer linear.
Tensor mlp_forward(const std::vector<Layer>& layers, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = add_bias(matmul(h, layers[i].W), layers[i].b);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

Tape::NodeId mlp_forward(Tape& tape, const std::vector<Layer>& layers, Tape::NodeId x,
                         std::vector<Tape::NodeId>& param_ids) {
  Tape::NodeId h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Tape::NodeId w = tape.param(layers[i].W);
    Tape::NodeId b = tape.param(layers[i].b);
    param_ids.push_back(w);
    param_ids.push_back(b);
    h = tape.add_bias(tape.matmul(h, w), b);
    if (i + 1 < layers.size()) h = tape.relu(h);
  }
  return h;
}

}  // namespace

std::vector<Tensor*> Body::params() { return collect(*this); }
std::vector<const Tensor*> Body::params() const { return collect_const(*this); }
std::vector<Tensor*> DecisionHead::params() { return collect(*this); }
std::vector<const Tensor*> DecisionHead::params() const { return collect_const(*this); }
std::vector<Tensor*> RelationHead::params() { return collect(*this); }
std::vector<const Tensor*> RelationHead::params() const { return collect_const(*this); }

Body init_body(const BodySpec& spec, std::uint64_t master_seed, std::uint64_t client_id) {
  if (spec.input_dim <= 0 || spec.feature_dim <= 0)
    throw ContractError("init_body: dimensions must be positive");
  CounterRng rng(master_seed, CounterRng::kInitBody, client_id);
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.feature_dim);
  Body body;
  body.spec = spec;
  body.layers = init_mlp(dims, rng);
  return body;
}

DecisionHead init_decision_head(int feature_dim, const std::vector<int>& hidden_dims,
                                int num_classes, std::uint64_t master_seed,
                                std::uint64_t client_id) {
  CounterRng rng(master_seed, CounterRng::kInitDecision, client_id);
  std::vector<int> dims{feature_dim};
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(num_classes);
  DecisionHead head;
  head.layers = init_mlp(dims, rng);
  return head;
}

RelationHead init_relation_head(int feature_dim, int hidden_dim, std::uint64_t master_seed,
                                std::uint64_t client_id) {
  CounterRng rng(master_seed, CounterRng::kInitRelation, client_id);
  RelationHead head;
  head.layers = init_mlp({2 * feature_dim, hidden_dim, 1}, rng);
  return head;
}

Tensor body_forward(const Body& body, const Tensor& x) {
  if (x.cols() != body.spec.input_dim)
    throw DimensionError("body_forward: input width " + std::to_string(x.cols()) +
                         " != input_dim " + std::to_string(body.spec.input_dim));
  return mlp_forward(body.layers, x);
}

Tensor decision_forward(const DecisionHead& head, const Tensor& h) {
  if (h.cols() != head.layers.front().W.rows())
    throw DimensionError("decision_forward: feature width " + std::to_string(h.cols()) +
                         " != " + std::to_string(head.layers.front().W.rows()));
  return mlp_forward(head.layers, h);
}

Tensor relation_forward(const RelationHead& head, const Tensor& pairs) {
  if (pairs.cols() != head.layers.front().W.rows())
    throw DimensionError("relation_forward: pair width " + std::to_string(pairs.cols()) +
                         " != " + std::to_string(head.layers.front().W.rows()));
  return sigmoid(mlp_forward(head.layers, pairs));
}

Tape::NodeId body_forward(Tape& tape, const Body& body, Tape::NodeId x,
                          std::vector<Tape::NodeId>& param_ids) {
  if (tape.value(x).cols() != body.spec.input_dim)
    throw DimensionError("body_forward: input width mismatch");
  return mlp_forward(tape, body.layers, x, param_ids);
}

Tape::NodeId decision_forward(Tape& tape, const DecisionHead& head, Tape::NodeId h,
                              std::vector<Tape::NodeId>& param_ids) {
  return mlp_forward(tape, head.layers, h, param_ids);
}

Tape::NodeId relation_forward(Tape& tape, const RelationHead& head, Tape::NodeId pairs,
                              std::vector<Tape::NodeId>& param_ids) {
  return tape.sigmoid(mlp_forward(tape, head.layers, pairs, param_ids));
}

void SgdOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw ContractError("sgd_step: " + std::to_string(params.size()) + " params vs " +
                        std::to_string(grads.size()) + " grads");
  if (velocity.empty())
    for (const Tensor* p : params) velocity.emplace_back(p->rows(), p->cols());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    Tensor& v = velocity[i];
    if (!p.same_shape(g) || !p.same_shape(v))
      throw ContractError("sgd_step: shape mismatch at parameter " + std::to_string(i));
    for (std::size_t k = 0; k < p.size(); ++k) {
      v.raw()[k] = momentum * v.raw()[k] + g.raw()[k];
      p.raw()[k] -= lr * v.raw()[k];
    }
    check_finite(p, "sgd_step");
  }
}

long long param_count(const std::vector<const Tensor*>& params) {
  long long n = 0;
  for (const Tensor* p : params) n += static_cast<long long>(p->size());
  return n;
}

}  // namespace pfedpm
