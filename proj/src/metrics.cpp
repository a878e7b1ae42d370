#include "pfedpm/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "pfedpm/protocol.hpp"

namespace pfedpm {

namespace {

int argmax_row(const Tensor& t, int row) {
  int best = 0;  // ties toward the smallest index
  for (int j = 1; j < t.cols(); ++j)
    if (t.at(row, j) > t.at(row, best)) best = j;
  return best;
}

std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_stdev(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double evaluate_decision(const ClientState& client, const Dataset& ds) {
  if (client.split.test_idx.empty())
    throw ContractError("evaluate_decision: client " + std::to_string(client.id) +
                        " has an empty test split");
  Tensor x = gather_rows(ds.features, client.split.test_idx);
  Tensor logits = decision_forward(client.decision, body_forward(client.body, x));
  int correct = 0;
  for (int r = 0; r < logits.rows(); ++r)
    if (argmax_row(logits, r) == ds.labels[client.split.test_idx[r]]) ++correct;
  return static_cast<double>(correct) / logits.rows();
}

double evaluate_relation(const ClientState& client, const Dataset& ds) {
  if (client.split.test_idx.empty())
    throw ContractError("evaluate_relation: client " + std::to_string(client.id) +
                        " has an empty test split");
  Tensor x = gather_rows(ds.features, client.split.test_idx);
  Tensor scores = relation_scores(client, body_forward(client.body, x));
  Tensor probs = softmax_rows(scores);
  int correct = 0;
  for (int r = 0; r < probs.rows(); ++r)
    if (argmax_row(probs, r) == ds.labels[client.split.test_idx[r]]) ++correct;
  return static_cast<double>(correct) / probs.rows();
}

double loss_decrease_diagnostic(const std::vector<double>& mean_loss_per_round) {
  if (mean_loss_per_round.size() < 2)
    throw ContractError("loss_decrease_diagnostic: need at least 2 rounds");
  int decreasing = 0;
  int transitions = static_cast<int>(mean_loss_per_round.size()) - 1;
  for (int t = 0; t < transitions; ++t)
    if (mean_loss_per_round[t + 1] < mean_loss_per_round[t]) ++decreasing;
  return static_cast<double>(decreasing) / transitions;
}

long long CommLedger::cumulative_scalars() const {
  long long s = 0;
  for (long long x : per_round_scalars) s += x;
  return s;
}

double CommLedger::fedavg_ratio() const {
  if (per_round_scalars.empty() || cumulative_scalars() == 0) return 0.0;
  double mean = static_cast<double>(cumulative_scalars()) /
                static_cast<double>(per_round_scalars.size());
  return static_cast<double>(fedavg_scalars_per_round) / mean;
}

std::string metrics_to_csv(const std::vector<RoundMetrics>& rounds) {
  std::string out =
      "round,mean_acc_decision,std_acc_decision,mean_acc_relation,std_acc_relation,"
      "mean_train_loss,upload_scalars,cum_upload_scalars\n";
  for (const auto& m : rounds) {
    out += std::to_string(m.round) + "," + fmt9(m.mean_decision_acc) + "," +
           fmt9(m.std_decision_acc) + "," + fmt9(m.mean_relation_acc) + "," +
           fmt9(m.std_relation_acc) + "," + fmt9(m.mean_train_loss) + "," +
           std::to_string(m.upload_scalars) + "," + std::to_string(m.cum_upload_scalars) + "\n";
  }
  return out;
}

}  // namespace pfedpm
