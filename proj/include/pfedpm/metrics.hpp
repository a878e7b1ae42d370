#pragma once

#include <string>
#include <vector>

namespace pfedpm {

struct ClientState;
struct Dataset;

struct RoundMetrics {
  int round = 0;
  std::vector<double> decision_acc;  // per client with test data
  std::vector<double> relation_acc;  // same clients; empty when not evaluated
  double mean_decision_acc = 0.0;
  double std_decision_acc = 0.0;
  double mean_relation_acc = 0.0;
  double std_relation_acc = 0.0;
  double mean_train_loss = 0.0;
  long long upload_scalars = 0;
  long long cum_upload_scalars = 0;
};

// Modeled communication: per uploaded class, d+1 scalars (vector + count)
// and 4 + 8 + 8d bytes (label id, count, vector).
struct CommLedger {
  std::vector<long long> per_round_scalars;
  std::vector<long long> per_round_bytes;
  long long fedavg_scalars_per_round = 0;  // comparison entry

  long long cumulative_scalars() const;
  double fedavg_ratio() const;  // FedAvg scalars / mean pFedPM scalars per round
};

double mean_of(const std::vector<double>& xs);
double population_stdev(const std::vector<double>& xs);

// Decision-head test accuracy; argmax ties break toward the smallest index.
double evaluate_decision(const ClientState& client, const Dataset& ds);

// Relation-head test accuracy via duplicate-concatenate-score with the
// client's mixed prototypes; softmax over the C scores, then argmax.
double evaluate_relation(const ClientState& client, const Dataset& ds);

// Fraction of round transitions with strictly decreasing mean train loss.
double loss_decrease_diagnostic(const std::vector<double>& mean_loss_per_round);

// CSV schema: header + one row per round, 9 significant digits.
std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds);

}  // namespace pfedpm
