#pragma once

#include <cstdint>
#include <vector>

#include "pfedpm/autodiff.hpp"
#include "pfedpm/rng.hpp"
#include "pfedpm/tensor.hpp"

namespace pfedpm {

// Architecture of a feature extraction body. hidden_dims may differ across
// clients; feature_dim must not (prototype compatibility).
struct BodySpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int feature_dim = 0;
};

struct Layer {
  Tensor W;  // in x out
  Tensor b;  // 1 x out
};

// ReLU MLP ending in a linear layer of width feature_dim.
struct Body {
  BodySpec spec;
  std::vector<Layer> layers;
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

// Classifier head, feature_dim -> C through optional ReLU hidden layers.
struct DecisionHead {
  std::vector<Layer> layers;
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

// Similarity scorer, 2*feature_dim -> hidden -> 1 with terminal sigmoid.
struct RelationHead {
  std::vector<Layer> layers;
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

Body init_body(const BodySpec& spec, std::uint64_t master_seed, std::uint64_t client_id);
DecisionHead init_decision_head(int feature_dim, const std::vector<int>& hidden_dims,
                                int num_classes, std::uint64_t master_seed,
                                std::uint64_t client_id);
RelationHead init_relation_head(int feature_dim, int hidden_dim, std::uint64_t master_seed,
                                std::uint64_t client_id);

// Evaluation-mode forwards (no recording).
Tensor body_forward(const Body& body, const Tensor& x);
Tensor decision_forward(const DecisionHead& head, const Tensor& h);
Tensor relation_forward(const RelationHead& head, const Tensor& pairs);

// Recorded forwards; param_ids receives one tape node per params() entry,
// in the same order.
Tape::NodeId body_forward(Tape& tape, const Body& body, Tape::NodeId x,
                          std::vector<Tape::NodeId>& param_ids);
Tape::NodeId decision_forward(Tape& tape, const DecisionHead& head, Tape::NodeId h,
                              std::vector<Tape::NodeId>& param_ids);
Tape::NodeId relation_forward(Tape& tape, const RelationHead& head, Tape::NodeId pairs,
                              std::vector<Tape::NodeId>& param_ids);

// Heavy-ball SGD: v <- momentum*v + g; p <- p - lr*v.
struct SgdOptimizer {
  double lr = 0.01;
  double momentum = 0.5;
  std::vector<Tensor> velocity;  // lazily shaped on first step

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
};

long long param_count(const std::vector<const Tensor*>& params);

}  // namespace pfedpm
