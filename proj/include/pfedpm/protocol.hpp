#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "pfedpm/data.hpp"
#include "pfedpm/metrics.hpp"
#include "pfedpm/models.hpp"

namespace pfedpm {

// label -> (prototype vector 1xd, sample count). Empty classes are absent,
// never zero-count.
struct PrototypeSet {
  std::map<int, std::pair<Tensor, long long>> entries;

  bool empty() const { return entries.empty(); }
  bool has(int label) const { return entries.count(label) != 0; }
  const Tensor& vec(int label) const { return entries.at(label).first; }
  long long count(int label) const { return entries.at(label).second; }
  bool covers_all(int num_classes) const;
};

struct UploadMsg {
  int client_id = 0;
  PrototypeSet protos;
};

struct ClientState {
  int id = 0;
  ClientSplit split;
  Body body;
  DecisionHead decision;
  RelationHead relation;
  SgdOptimizer opt_main;  // body + decision head
  SgdOptimizer opt_rel;   // relation head only
  PrototypeSet local_protos;
  PrototypeSet mixed_protos;
  int num_classes = 0;
};

struct ServerState {
  PrototypeSet global_protos;
  int round = 0;
  long long cum_upload_scalars = 0;
};

struct RoundConfig {
  double mix_a = 0.5;       // a of the local/global feature mix
  double lambda = 1.0;      // prototype-consistency regularization weight
  int local_epochs = 1;     // E
  int batch_size = 10;
  double lr = 0.01;
  double momentum = 0.5;
  int rounds = 30;          // T
  int relation_epochs = 1;
  std::uint64_t seed = 1;
  bool aggregate = true;    // false: no server exchange (degeneracy runs)
};

// Full-pass per-class mean of body features over the train split (eval
// mode, no recording).
PrototypeSet compute_local_prototypes(const ClientState& client, const Dataset& ds);

// Count-weighted mean per class over uploads, iterated in ascending
// client-id order; stored count is the total sample count N_j.
PrototypeSet aggregate_global(const std::vector<UploadMsg>& uploads);

// a*local + (1-a)*global per owned class; global substituted for classes
// the client lacks. Result covers every class present in global_.
PrototypeSet mix_prototypes(const PrototypeSet& local, const PrototypeSet& global_, double a);

// E epochs of minibatch SGD on cross-entropy plus lambda times the mean
// (over classes present in the batch) L2 distance between the frozen mixed
// prototype and the differentiable batch class-mean feature. Returns the
// per-batch loss trace. With no mixed prototypes yet (round 1) the
// regularizer is skipped.
std::vector<double> local_update(ClientState& client, const Dataset& ds,
                                 const RoundConfig& cfg, int round);

// MSE training of the relation head on (feature, mixed prototype) pairs
// with 0/1 targets; the body is frozen (features computed without
// recording). Requires mixed prototypes for all C classes.
std::vector<double> train_relation(ClientState& client, const Dataset& ds,
                                   const RoundConfig& cfg, int round);

// One pFedPM round: local updates, prototype upload, aggregation,
// broadcast + mixing, relation training, evaluation.
RoundMetrics run_round(ServerState& server, std::vector<ClientState>& clients,
                       const Dataset& ds, const RoundConfig& cfg, int threads = 1);

std::vector<RoundMetrics> run_pfedpm(ServerState& server, std::vector<ClientState>& clients,
                                     const Dataset& ds, const RoundConfig& cfg,
                                     int threads = 1);

// Per-client training with lambda=0 and no communication.
std::vector<RoundMetrics> run_local_baseline(std::vector<ClientState>& clients,
                                             const Dataset& ds, const RoundConfig& cfg,
                                             int threads = 1);

// Homogeneous-only FedAvg: local cross-entropy training, |D_i|/N-weighted
// parameter averaging, broadcast.
std::vector<RoundMetrics> run_fedavg_baseline(std::vector<ClientState>& clients,
                                              const Dataset& ds, const RoundConfig& cfg,
                                              int threads = 1);

// Uploaded-scalar count for one pFedPM round: sum over clients of
// |owned classes| * (d+1).
long long pfedpm_upload_scalars(const std::vector<ClientState>& clients, int feature_dim);
long long pfedpm_upload_bytes(const std::vector<ClientState>& clients, int feature_dim);
long long fedavg_upload_scalars(const std::vector<ClientState>& clients);

// Relation-head scores for a batch of samples against all C mixed
// prototypes; returns an m x C score matrix.
Tensor relation_scores(const ClientState& client, const Tensor& features);

}  // namespace pfedpm
