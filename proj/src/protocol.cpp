#include "pfedpm/protocol.hpp"

#include <algorithm>

#include "pfedpm/parallel.hpp"
#include "pfedpm/rng.hpp"

namespace pfedpm {

namespace {

// Distinct shuffle salts per (round, epoch, phase) so the decision-path and
// relation-path streams never collide.
std::uint64_t shuffle_salt(int round, int epoch, bool relation) {
  return (static_cast<std::uint64_t>(round) << 24) | (static_cast<std::uint64_t>(epoch) << 1) |
         (relation ? 1u : 0u);
}

std::vector<int> epoch_order(const ClientState& client, const RoundConfig& cfg, int round,
                             int epoch, bool relation) {
  std::vector<int> order = client.split.train_idx;
  CounterRng rng(cfg.seed, CounterRng::kShuffle, static_cast<std::uint64_t>(client.id),
                 shuffle_salt(round, epoch, relation));
  shuffle_indices(order, rng);
  return order;
}

std::vector<Tensor*> main_params(ClientState& client) {
  std::vector<Tensor*> ps = client.body.params();
  for (Tensor* p : client.decision.params()) ps.push_back(p);
  return ps;
}

int proto_dim(const PrototypeSet& ps) { return ps.entries.begin()->second.first.cols(); }

RoundMetrics evaluate_round(const std::vector<ClientState>& clients, const Dataset& ds,
                            int round, bool with_relation, int threads) {
  RoundMetrics m;
  m.round = round;
  int n = static_cast<int>(clients.size());
  // A client whose every class drew fewer than 5 samples has no test data
  // (20% floor split); it still trains but cannot be scored.
  std::vector<double> dec(n, -1.0), rel(n, -1.0);
  parallel_for(n, threads, [&](int i) {
    if (clients[i].split.test_idx.empty()) return;
    dec[i] = evaluate_decision(clients[i], ds);
    if (with_relation) rel[i] = evaluate_relation(clients[i], ds);
  });
  for (int i = 0; i < n; ++i) {
    if (dec[i] < 0.0) continue;
    m.decision_acc.push_back(dec[i]);
    if (with_relation) m.relation_acc.push_back(rel[i]);
  }
  m.mean_decision_acc = mean_of(m.decision_acc);
  m.std_decision_acc = population_stdev(m.decision_acc);
  if (with_relation) {
    m.mean_relation_acc = mean_of(m.relation_acc);
    m.std_relation_acc = population_stdev(m.relation_acc);
  }
  return m;
}

double mean_loss(const std::vector<std::vector<double>>& traces) {
  double s = 0.0;
  long long n = 0;
  for (const auto& t : traces)
    for (double v : t) {
      s += v;
      ++n;
    }
  return n ? s / n : 0.0;
}

}  // namespace

bool PrototypeSet::covers_all(int num_classes) const {
  for (int j = 0; j < num_classes; ++j)
    if (!has(j)) return false;
  return true;
}

PrototypeSet compute_local_prototypes(const ClientState& client, const Dataset& ds) {
  if (client.split.train_idx.empty())
    throw ContractError("compute_local_prototypes: client " + std::to_string(client.id) +
                        " has no training data");
  // group train indices by label, ascending label order
  std::map<int, std::vector<int>> by_class;
  for (int i : client.split.train_idx) by_class[ds.labels[i]].push_back(i);

  PrototypeSet out;
  for (const auto& [label, idx] : by_class) {
    Tensor x = gather_rows(ds.features, idx);
    Tensor h = body_forward(client.body, x);
    out.entries[label] = {mean_rows(h), static_cast<long long>(idx.size())};
  }
  return out;
}

PrototypeSet aggregate_global(const std::vector<UploadMsg>& uploads) {
  std::vector<const UploadMsg*> ordered;
  for (const auto& u : uploads) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const UploadMsg* a, const UploadMsg* b) { return a->client_id < b->client_id; });

  // first pass: class totals N_j and dimension check
  std::map<int, long long> totals;
  int d = -1;
  for (const UploadMsg* u : ordered)
    for (const auto& [label, entry] : u->protos.entries) {
      if (d < 0) d = entry.first.cols();
      if (entry.first.cols() != d || entry.first.rows() != 1)
        throw ProtocolError("aggregate_global: prototype for class " + std::to_string(label) +
                            " from client " + std::to_string(u->client_id) + " has shape " +
                            entry.first.shape_str() + ", expected 1x" + std::to_string(d));
      totals[label] += entry.second;
    }

  // second pass: weighted sum in ascending client-id order
  PrototypeSet out;
  for (const auto& [label, total] : totals) out.entries[label] = {Tensor(1, d), total};
  for (const UploadMsg* u : ordered)
    for (const auto& [label, entry] : u->protos.entries) {
      double w = static_cast<double>(entry.second) / static_cast<double>(totals[label]);
      Tensor& acc = out.entries[label].first;
      for (int j = 0; j < d; ++j) acc.at(0, j) += w * entry.first.at(0, j);
    }
  return out;
}

PrototypeSet mix_prototypes(const PrototypeSet& local, const PrototypeSet& global_, double a) {
  if (a < 0.0 || a > 1.0)
    throw ContractError("mix_prototypes: a = " + std::to_string(a) + " outside [0,1]");
  for (const auto& [label, entry] : local.entries)
    if (!global_.has(label))
      throw ProtocolError("mix_prototypes: class " + std::to_string(label) +
                          " present locally but missing from the global set");
  PrototypeSet out;
  for (const auto& [label, gentry] : global_.entries) {
    if (local.has(label)) {
      const Tensor& lv = local.vec(label);
      const Tensor& gv = gentry.first;
      Tensor mixed(1, gv.cols());
      for (int j = 0; j < gv.cols(); ++j)
        mixed.at(0, j) = a * lv.at(0, j) + (1.0 - a) * gv.at(0, j);
      out.entries[label] = {std::move(mixed), local.count(label)};
    } else {
      out.entries[label] = gentry;
    }
  }
  return out;
}

std::vector<double> local_update(ClientState& client, const Dataset& ds,
                                 const RoundConfig& cfg, int round) {
  if (client.split.train_idx.empty())
    throw ContractError("local_update: client " + std::to_string(client.id) +
                        " has no training data");
  bool regularize = cfg.lambda > 0.0 && !client.mixed_protos.empty();
  std::vector<double> trace;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::vector<int> order = epoch_order(client, cfg, round, epoch, false);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      std::vector<int> labels;
      for (int i : batch) labels.push_back(ds.labels[i]);

      Tape tape;
      std::vector<Tape::NodeId> pids;
      Tape::NodeId x = tape.constant(gather_rows(ds.features, batch));
      Tape::NodeId h = body_forward(tape, client.body, x, pids);
      Tape::NodeId logits = decision_forward(tape, client.decision, h, pids);
      Tape::NodeId loss = tape.softmax_cross_entropy(logits, labels);

      if (regularize) {
        // classes present in the batch, ascending
        std::map<int, std::vector<int>> rows_by_class;
        for (std::size_t r = 0; r < labels.size(); ++r)
          rows_by_class[labels[r]].push_back(static_cast<int>(r));
        Tape::NodeId reg = -1;
        int terms = 0;
        for (const auto& [label, rows] : rows_by_class) {
          if (!client.mixed_protos.has(label)) continue;
          Tape::NodeId c_batch = tape.mean_rows(tape.gather_rows(h, rows));
          Tape::NodeId target = tape.constant(client.mixed_protos.vec(label));
          Tape::NodeId term = tape.l2_distance(c_batch, target);
          reg = (terms == 0) ? term : tape.add(reg, term);
          ++terms;
        }
        if (terms > 0) loss = tape.add(loss, tape.scale(reg, cfg.lambda / terms));
      }

      trace.push_back(tape.value(loss).at(0, 0));
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Tape::NodeId pid : pids) grads.push_back(tape.grad(pid));
      client.opt_main.lr = cfg.lr;
      client.opt_main.momentum = cfg.momentum;
      client.opt_main.step(main_params(client), grads);
    }
  }
  return trace;
}

std::vector<double> train_relation(ClientState& client, const Dataset& ds,
                                   const RoundConfig& cfg, int round) {
  int C = client.num_classes;
  if (!client.mixed_protos.covers_all(C))
    throw ProtocolError("train_relation: mixed prototypes incomplete for client " +
                        std::to_string(client.id));
  std::vector<double> trace;
  int d = proto_dim(client.mixed_protos);

  for (int epoch = 0; epoch < cfg.relation_epochs; ++epoch) {
    std::vector<int> order = epoch_order(client, cfg, round, epoch, true);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      int m = static_cast<int>(batch.size());

      // body frozen: features are plain values
      Tensor h = body_forward(client.body, gather_rows(ds.features, batch));

      // duplicate each feature C times, concatenate with each mixed prototype
      Tensor pairs(m * C, 2 * d);
      Tensor targets(m * C, 1);
      for (int s = 0; s < m; ++s)
        for (int j = 0; j < C; ++j) {
          int r = s * C + j;
          for (int t = 0; t < d; ++t) {
            pairs.at(r, t) = h.at(s, t);
            pairs.at(r, d + t) = client.mixed_protos.vec(j).at(0, t);
          }
          targets.at(r, 0) = (ds.labels[batch[s]] == j) ? 1.0 : 0.0;
        }

      Tape tape;
      std::vector<Tape::NodeId> pids;
      Tape::NodeId scores = relation_forward(tape, client.relation, tape.constant(pairs), pids);
      Tape::NodeId loss = tape.mse(scores, tape.constant(targets));

      trace.push_back(tape.value(loss).at(0, 0));
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (Tape::NodeId pid : pids) grads.push_back(tape.grad(pid));
      client.opt_rel.lr = cfg.lr;
      client.opt_rel.momentum = cfg.momentum;
      client.opt_rel.step(client.relation.params(), grads);
    }
  }
  return trace;
}

Tensor relation_scores(const ClientState& client, const Tensor& features) {
  int C = client.num_classes;
  if (!client.mixed_protos.covers_all(C))
    throw ProtocolError("relation_scores: mixed prototypes incomplete for client " +
                        std::to_string(client.id));
  int d = proto_dim(client.mixed_protos);
  int m = features.rows();
  Tensor pairs(m * C, 2 * d);
  for (int s = 0; s < m; ++s)
    for (int j = 0; j < C; ++j)
      for (int t = 0; t < d; ++t) {
        pairs.at(s * C + j, t) = features.at(s, t);
        pairs.at(s * C + j, d + t) = client.mixed_protos.vec(j).at(0, t);
      }
  Tensor flat = relation_forward(client.relation, pairs);
  Tensor scores(m, C);
  for (int s = 0; s < m; ++s)
    for (int j = 0; j < C; ++j) scores.at(s, j) = flat.at(s * C + j, 0);
  return scores;
}

long long pfedpm_upload_scalars(const std::vector<ClientState>& clients, int feature_dim) {
  long long n = 0;
  for (const auto& c : clients)
    n += static_cast<long long>(c.local_protos.entries.size()) * (feature_dim + 1);
  return n;
}

long long pfedpm_upload_bytes(const std::vector<ClientState>& clients, int feature_dim) {
  long long n = 0;
  for (const auto& c : clients)
    n += static_cast<long long>(c.local_protos.entries.size()) * (4 + 8 + 8LL * feature_dim);
  return n;
}

long long fedavg_upload_scalars(const std::vector<ClientState>& clients) {
  long long n = 0;
  for (const auto& c : clients)
    n += param_count(c.body.params()) + param_count(c.decision.params());
  return n;
}

RoundMetrics run_round(ServerState& server, std::vector<ClientState>& clients,
                       const Dataset& ds, const RoundConfig& cfg, int threads) {
  int n = static_cast<int>(clients.size());
  int round = server.round;
  std::vector<std::vector<double>> traces(n);

  // (1) local updates against the previous round's mixed prototypes
  parallel_for(n, threads, [&](int i) { traces[i] = local_update(clients[i], ds, cfg, round); });

  // (2)+(3) fresh local prototypes, uploaded
  parallel_for(n, threads,
               [&](int i) { clients[i].local_protos = compute_local_prototypes(clients[i], ds); });

  long long scalars = 0;
  if (cfg.aggregate) {
    std::vector<UploadMsg> uploads;
    for (auto& c : clients) uploads.push_back({c.id, c.local_protos});
    // (4) server aggregation, ascending client-id order
    server.global_protos = aggregate_global(uploads);
    scalars = pfedpm_upload_scalars(clients, proto_dim(server.global_protos));
    // (5) broadcast + mixing
    parallel_for(n, threads, [&](int i) {
      clients[i].mixed_protos =
          mix_prototypes(clients[i].local_protos, server.global_protos, cfg.mix_a);
    });
  } else {
    parallel_for(n, threads, [&](int i) { clients[i].mixed_protos = clients[i].local_protos; });
  }

  // (6) relation training against the fresh mixed prototypes
  bool relation_ready = cfg.relation_epochs > 0;
  for (const auto& c : clients)
    relation_ready = relation_ready && c.mixed_protos.covers_all(c.num_classes);
  if (relation_ready)
    parallel_for(n, threads, [&](int i) { train_relation(clients[i], ds, cfg, round); });

  server.round = round + 1;
  server.cum_upload_scalars += scalars;

  RoundMetrics m = evaluate_round(clients, ds, round, relation_ready, threads);
  m.mean_train_loss = mean_loss(traces);
  m.upload_scalars = scalars;
  m.cum_upload_scalars = server.cum_upload_scalars;
  return m;
}

std::vector<RoundMetrics> run_pfedpm(ServerState& server, std::vector<ClientState>& clients,
                                     const Dataset& ds, const RoundConfig& cfg, int threads) {
  std::vector<RoundMetrics> out;
  for (int t = 0; t < cfg.rounds; ++t) out.push_back(run_round(server, clients, ds, cfg, threads));
  return out;
}

std::vector<RoundMetrics> run_local_baseline(std::vector<ClientState>& clients,
                                             const Dataset& ds, const RoundConfig& cfg,
                                             int threads) {
  RoundConfig local_cfg = cfg;
  local_cfg.lambda = 0.0;
  local_cfg.mix_a = 1.0;
  local_cfg.aggregate = false;
  int n = static_cast<int>(clients.size());
  std::vector<RoundMetrics> out;
  long long cum = 0;
  for (int t = 0; t < cfg.rounds; ++t) {
    std::vector<std::vector<double>> traces(n);
    parallel_for(n, threads,
                 [&](int i) { traces[i] = local_update(clients[i], ds, local_cfg, t); });
    RoundMetrics m = evaluate_round(clients, ds, t, false, threads);
    m.mean_train_loss = mean_loss(traces);
    m.upload_scalars = 0;
    m.cum_upload_scalars = cum;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<RoundMetrics> run_fedavg_baseline(std::vector<ClientState>& clients,
                                              const Dataset& ds, const RoundConfig& cfg,
                                              int threads) {
  int n = static_cast<int>(clients.size());
  if (n == 0) throw ContractError("run_fedavg_baseline: no clients");
  for (const auto& c : clients)
    if (c.body.spec.hidden_dims != clients[0].body.spec.hidden_dims ||
        c.body.spec.input_dim != clients[0].body.spec.input_dim ||
        c.body.spec.feature_dim != clients[0].body.spec.feature_dim)
      throw ContractError("run_fedavg_baseline: heterogeneous client architectures");

  RoundConfig local_cfg = cfg;
  local_cfg.lambda = 0.0;

  double total = 0.0;
  for (const auto& c : clients) total += static_cast<double>(c.split.train_idx.size());

  std::vector<RoundMetrics> out;
  long long cum = 0;
  for (int t = 0; t < cfg.rounds; ++t) {
    std::vector<std::vector<double>> traces(n);
    parallel_for(n, threads,
                 [&](int i) { traces[i] = local_update(clients[i], ds, local_cfg, t); });

    // |D_i|/N-weighted parameter average, ascending client-id order
    std::vector<Tensor*> ref = main_params(clients[0]);
    std::vector<Tensor> avg;
    for (Tensor* p : ref) avg.emplace_back(p->rows(), p->cols());
    for (int i = 0; i < n; ++i) {
      double w = static_cast<double>(clients[i].split.train_idx.size()) / total;
      std::vector<Tensor*> ps = main_params(clients[i]);
      for (std::size_t k = 0; k < ps.size(); ++k)
        for (std::size_t e = 0; e < avg[k].size(); ++e)
          avg[k].raw()[e] += w * ps[k]->raw()[e];
    }
    long long scalars = fedavg_upload_scalars(clients);
    cum += scalars;
    for (int i = 0; i < n; ++i) {
      std::vector<Tensor*> ps = main_params(clients[i]);
      for (std::size_t k = 0; k < ps.size(); ++k) *ps[k] = avg[k];
    }

    RoundMetrics m = evaluate_round(clients, ds, t, false, threads);
    m.mean_train_loss = mean_loss(traces);
    m.upload_scalars = scalars;
    m.cum_upload_scalars = cum;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace pfedpm
