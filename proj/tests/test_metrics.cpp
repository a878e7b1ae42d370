#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pfedpm/experiment.hpp"
#include "pfedpm/metrics.hpp"
#include "pfedpm/protocol.hpp"

using namespace pfedpm;

namespace {

// one client over a 2-class blobs set, all classes owned
struct Fixture {
  Dataset ds;
  std::vector<ClientState> clients;
  ExperimentConfig cfg;

  Fixture() {
    cfg = parse_config_text(
        "dataset = blobs\nblobs_classes = 2\nblobs_dim = 6\nblobs_per_class = 30\n"
        "blobs_std = 0.3\nclients = 1\nn_mean = 2\nk_mean = 25\nstdev = 0\n"
        "hidden_dims = 8\nfeature_dim = 4\n");
    ds = build_dataset(cfg);
    auto splits = partition_label_skew(ds, SkewSpec{1, 2, 25, 0, cfg.seed});
    clients = build_clients(cfg, ds, splits);
  }
};

void zero_params(std::vector<Tensor*> params) {
  for (Tensor* p : params)
    for (double& v : p->raw()) v = 0.0;
}

}  // namespace

TEST_CASE("mean_of and population_stdev") {
  CHECK(mean_of({1, 2, 3, 4}) == 2.5);
  CHECK(population_stdev({2, 2, 2}) == 0.0);
  // population stdev of {1,3} is 1, not sqrt(2)
  CHECK(population_stdev({1, 3}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("evaluate_decision: perfect classifier scores 1.0") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  // zero body + zero head gives constant logits; a one-hot output bias on a
  // single-class test split then classifies everything correctly
  zero_params(c.body.params());
  zero_params(c.decision.params());
  int cls = fx.ds.labels[c.split.test_idx[0]];
  std::vector<int> one_class;
  for (int i : c.split.test_idx)
    if (fx.ds.labels[i] == cls) one_class.push_back(i);
  c.split.test_idx = one_class;
  c.decision.layers.back().b.at(0, cls) = 1.0;
  CHECK(evaluate_decision(c, fx.ds) == 1.0);
}

TEST_CASE("evaluate_decision: constant logits give smallest-index base rate") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  zero_params(c.body.params());
  zero_params(c.decision.params());
  // every argmax tie resolves to class 0
  int zeros = 0;
  for (int i : c.split.test_idx)
    if (fx.ds.labels[i] == 0) ++zeros;
  double base = static_cast<double>(zeros) / c.split.test_idx.size();
  CHECK(evaluate_decision(c, fx.ds) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("evaluate_decision matches a brute-force scan") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  int correct = 0;
  for (int i : c.split.test_idx) {
    Tensor logits = decision_forward(
        c.decision, body_forward(c.body, gather_rows(fx.ds.features, {i})));
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits.at(0, j) > logits.at(0, best)) best = j;
    if (best == fx.ds.labels[i]) ++correct;
  }
  double oracle = static_cast<double>(correct) / c.split.test_idx.size();
  CHECK(evaluate_decision(c, fx.ds) == oracle);
}

TEST_CASE("evaluate_decision rejects an empty test split") {
  Fixture fx;
  fx.clients[0].split.test_idx.clear();
  CHECK_THROWS_AS(evaluate_decision(fx.clients[0], fx.ds), ContractError);
}

TEST_CASE("evaluate_relation: zero head scores the tie-break base rate") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  c.mixed_protos = compute_local_prototypes(c, fx.ds);
  zero_params(c.relation.params());  // all scores sigmoid(0) = 0.5
  int zeros = 0;
  for (int i : c.split.test_idx)
    if (fx.ds.labels[i] == 0) ++zeros;
  double base = static_cast<double>(zeros) / c.split.test_idx.size();
  CHECK(evaluate_relation(c, fx.ds) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("evaluate_relation requires complete mixed prototypes") {
  Fixture fx;
  CHECK_THROWS_AS(evaluate_relation(fx.clients[0], fx.ds), ProtocolError);
}

TEST_CASE("argmax over raw scores equals argmax over softmaxed scores") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  c.mixed_protos = compute_local_prototypes(c, fx.ds);
  Tensor scores =
      relation_scores(c, body_forward(c.body, gather_rows(fx.ds.features, c.split.test_idx)));
  Tensor soft = softmax_rows(scores);
  for (int r = 0; r < scores.rows(); ++r) {
    int a = 0, b = 0;
    for (int j = 1; j < scores.cols(); ++j) {
      if (scores.at(r, j) > scores.at(r, a)) a = j;
      if (soft.at(r, j) > soft.at(r, b)) b = j;
    }
    CHECK(a == b);
  }
}

TEST_CASE("evaluation is pure: repeated calls agree bitwise") {
  Fixture fx;
  ClientState& c = fx.clients[0];
  c.mixed_protos = compute_local_prototypes(c, fx.ds);
  CHECK(evaluate_decision(c, fx.ds) == evaluate_decision(c, fx.ds));
  CHECK(evaluate_relation(c, fx.ds) == evaluate_relation(c, fx.ds));
}

TEST_CASE("loss_decrease_diagnostic on forced traces") {
  CHECK(loss_decrease_diagnostic({3, 2, 1}) == 1.0);
  CHECK(loss_decrease_diagnostic({1, 2}) == 0.0);
  CHECK(loss_decrease_diagnostic({2, 1, 1, 0}) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK_THROWS_AS(loss_decrease_diagnostic({1}), ContractError);
}

TEST_CASE("upload size model: 20 clients x 3 classes x (50+1) = 3060") {
  std::vector<ClientState> clients(20);
  for (int i = 0; i < 20; ++i) {
    clients[i].id = i;
    for (int j = 0; j < 3; ++j) clients[i].local_protos.entries[j] = {Tensor(1, 50), 1};
  }
  CHECK(pfedpm_upload_scalars(clients, 50) == 3060);
  // byte model: per class 4 (label) + 8 (count) + 8*50 (vector)
  CHECK(pfedpm_upload_bytes(clients, 50) == 20LL * 3 * (4 + 8 + 8 * 50));
}

TEST_CASE("comm ledger: cumulative equals the sum, ratio from the size model") {
  CommLedger ledger;
  ledger.per_round_scalars = {3060, 3000, 3100};
  ledger.fedavg_scalars_per_round = 305300;
  CHECK(ledger.cumulative_scalars() == 9160);
  double mean_round = 9160.0 / 3;
  CHECK(ledger.fedavg_ratio() == doctest::Approx(305300.0 / mean_round).epsilon(1e-12));
}

TEST_CASE("default architecture comm ratio exceeds 50x") {
  // 784 -> 128 -> 50 body plus 50 -> 10 head, against 51 scalars per class
  long long fedavg = 784LL * 128 + 128 + 128LL * 50 + 50 + 50LL * 10 + 10;
  long long per_client_protos = 3 * 51;
  CHECK(fedavg > 100000);
  CHECK(static_cast<double>(fedavg) / per_client_protos > 50.0);
}

TEST_CASE("metrics_to_csv schema and determinism") {
  RoundMetrics m;
  m.round = 0;
  m.decision_acc = {0.5, 0.75};
  m.mean_decision_acc = 0.625;
  m.std_decision_acc = 0.125;
  m.mean_relation_acc = 0.5;
  m.std_relation_acc = 0.0;
  m.mean_train_loss = 1.2345678901234;  // exercises the 9-digit cap
  m.upload_scalars = 3060;
  m.cum_upload_scalars = 3060;
  std::string csv = metrics_to_csv({m});
  std::istringstream in(csv);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header ==
        "round,mean_acc_decision,std_acc_decision,mean_acc_relation,std_acc_relation,"
        "mean_train_loss,upload_scalars,cum_upload_scalars");
  CHECK(row == "0,0.625,0.125,0.5,0,1.23456789,3060,3060");
  CHECK_FALSE(std::getline(in, extra));
  CHECK(metrics_to_csv({m}) == csv);
}

TEST_CASE("blobs run: mean train loss mostly decreases over 30 rounds") {
  ExperimentConfig cfg = parse_config_text(
      "dataset = blobs\nblobs_classes = 5\nblobs_dim = 10\nblobs_per_class = 60\n"
      "blobs_std = 0.5\nclients = 5\nn_mean = 3\nk_mean = 30\nstdev = 0.5\n"
      "hidden_dims = 16\nfeature_dim = 8\nrounds = 30\nlambda = 1\nlr = 0.01\n");
  Dataset ds = build_dataset(cfg);
  auto splits = partition_label_skew(ds, SkewSpec{cfg.clients, cfg.n_mean, cfg.k_mean,
                                                  cfg.stdev, cfg.seed});
  auto clients = build_clients(cfg, ds, splits);
  ServerState server;
  auto rounds = run_pfedpm(server, clients, ds, cfg.round_config());
  std::vector<double> trace;
  for (const auto& r : rounds) trace.push_back(r.mean_train_loss);
  CHECK(loss_decrease_diagnostic(trace) >= 0.8);
  for (const auto& r : rounds) {
    for (double a : r.decision_acc) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
  for (std::size_t t = 1; t < rounds.size(); ++t)
    CHECK(rounds[t].cum_upload_scalars >= rounds[t - 1].cum_upload_scalars);
}
