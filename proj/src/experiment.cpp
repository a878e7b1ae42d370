#include "pfedpm/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace pfedpm {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kPrngScheme =
    "counter-based: stream = hash(master seed, purpose id, client id, salt); "
    "draw n = hash(stream key, n)";

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key, int line) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      throw ConfigError("config line " + std::to_string(line) + ": key '" + key +
                        "': bad integer '" + item + "'");
    }
  }
  return out;
}

std::string join_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void validate(const ExperimentConfig& c) {
  auto bad = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (c.dataset != "blobs" && c.dataset != "mnist") bad("dataset", "must be blobs or mnist");
  if (c.method != "pfedpm" && c.method != "local" && c.method != "fedavg")
    bad("method", "must be pfedpm, local or fedavg");
  if (c.a < 0.0 || c.a > 1.0) bad("a", "must lie in [0,1]");
  if (c.lambda < 0.0) bad("lambda", "must be >= 0");
  if (c.epochs < 1) bad("epochs", "must be >= 1");
  if (c.batch < 1) bad("batch", "must be >= 1");
  if (c.rounds < 1) bad("rounds", "must be >= 1");
  if (c.relation_epochs < 0) bad("relation_epochs", "must be >= 0");
  if (c.clients < 1) bad("clients", "must be >= 1");
  if (c.n_mean < 1.0) bad("n_mean", "must be >= 1");
  if (c.k_mean < 1.0) bad("k_mean", "must be >= 1");
  if (c.stdev < 0.0) bad("stdev", "must be >= 0");
  if (c.feature_dim < 1) bad("feature_dim", "must be >= 1");
  if (c.relation_hidden < 1) bad("relation_hidden", "must be >= 1");
  if (c.lr <= 0.0) bad("lr", "must be > 0");
  if (c.momentum < 0.0 || c.momentum >= 1.0) bad("momentum", "must lie in [0,1)");
  if (c.method == "fedavg" && !c.hetero_widths.empty())
    bad("hetero_widths", "fedavg requires homogeneous client architectures");
  if (c.dataset == "mnist") {
    if (!fs::exists(c.mnist_images)) bad("mnist_images", "file not found: " + c.mnist_images);
    if (!fs::exists(c.mnist_labels)) bad("mnist_labels", "file not found: " + c.mnist_labels);
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace

RoundConfig ExperimentConfig::round_config() const {
  RoundConfig rc;
  rc.mix_a = a;
  rc.lambda = lambda;
  rc.local_epochs = epochs;
  rc.batch_size = batch;
  rc.lr = lr;
  rc.momentum = momentum;
  rc.rounds = rounds;
  rc.relation_epochs = relation_epochs;
  rc.seed = seed;
  return rc;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    auto as_int = [&](int& dst) {
      try {
        dst = std::stoi(val);
      } catch (...) {
        throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                          "': bad integer '" + val + "'");
      }
    };
    auto as_double = [&](double& dst) {
      try {
        dst = std::stod(val);
      } catch (...) {
        throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                          "': bad number '" + val + "'");
      }
    };

    if (key == "dataset") c.dataset = val;
    else if (key == "mnist_images") c.mnist_images = val;
    else if (key == "mnist_labels") c.mnist_labels = val;
    else if (key == "blobs_classes") as_int(c.blobs_classes);
    else if (key == "blobs_dim") as_int(c.blobs_dim);
    else if (key == "blobs_per_class") as_int(c.blobs_per_class);
    else if (key == "blobs_std") as_double(c.blobs_std);
    else if (key == "blobs_sep") as_double(c.blobs_sep);
    else if (key == "clients") as_int(c.clients);
    else if (key == "n_mean") as_double(c.n_mean);
    else if (key == "k_mean") as_double(c.k_mean);
    else if (key == "stdev") as_double(c.stdev);
    else if (key == "hidden_dims") c.hidden_dims = parse_int_list(val, key, lineno);
    else if (key == "hetero_widths") c.hetero_widths = parse_int_list(val, key, lineno);
    else if (key == "feature_dim") as_int(c.feature_dim);
    else if (key == "decision_hidden") c.decision_hidden = parse_int_list(val, key, lineno);
    else if (key == "relation_hidden") as_int(c.relation_hidden);
    else if (key == "method") c.method = val;
    else if (key == "a") as_double(c.a);
    else if (key == "lambda") as_double(c.lambda);
    else if (key == "epochs") as_int(c.epochs);
    else if (key == "batch") as_int(c.batch);
    else if (key == "lr") as_double(c.lr);
    else if (key == "momentum") as_double(c.momentum);
    else if (key == "rounds") as_int(c.rounds);
    else if (key == "relation_epochs") as_int(c.relation_epochs);
    else if (key == "seed") {
      try {
        c.seed = std::stoull(val);
      } catch (...) {
        throw ConfigError("config line " + std::to_string(lineno) + ": key 'seed': bad integer '" +
                          val + "'");
      }
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_file(path));
}

std::string resolve_config(const ExperimentConfig& c) {
  std::string out;
  out += "dataset = " + c.dataset + "\n";
  out += "mnist_images = " + c.mnist_images + "\n";
  out += "mnist_labels = " + c.mnist_labels + "\n";
  out += "blobs_classes = " + std::to_string(c.blobs_classes) + "\n";
  out += "blobs_dim = " + std::to_string(c.blobs_dim) + "\n";
  out += "blobs_per_class = " + std::to_string(c.blobs_per_class) + "\n";
  out += "blobs_std = " + fmt_double(c.blobs_std) + "\n";
  out += "blobs_sep = " + fmt_double(c.blobs_sep) + "\n";
  out += "clients = " + std::to_string(c.clients) + "\n";
  out += "n_mean = " + fmt_double(c.n_mean) + "\n";
  out += "k_mean = " + fmt_double(c.k_mean) + "\n";
  out += "stdev = " + fmt_double(c.stdev) + "\n";
  out += "hidden_dims = " + join_int_list(c.hidden_dims) + "\n";
  out += "hetero_widths = " + join_int_list(c.hetero_widths) + "\n";
  out += "feature_dim = " + std::to_string(c.feature_dim) + "\n";
  out += "decision_hidden = " + join_int_list(c.decision_hidden) + "\n";
  out += "relation_hidden = " + std::to_string(c.relation_hidden) + "\n";
  out += "method = " + c.method + "\n";
  out += "a = " + fmt_double(c.a) + "\n";
  out += "lambda = " + fmt_double(c.lambda) + "\n";
  out += "epochs = " + std::to_string(c.epochs) + "\n";
  out += "batch = " + std::to_string(c.batch) + "\n";
  out += "lr = " + fmt_double(c.lr) + "\n";
  out += "momentum = " + fmt_double(c.momentum) + "\n";
  out += "rounds = " + std::to_string(c.rounds) + "\n";
  out += "relation_epochs = " + std::to_string(c.relation_epochs) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  return out;
}

std::string preset_config(const std::string& name) {
  // Desk-scale versions of the reference setup: ~2000 training samples
  // total across 20 clients instead of full datasets, and MLP bodies.
  if (name == "blobs-skew-n3")
    return "dataset = blobs\nblobs_classes = 10\nblobs_dim = 20\nblobs_per_class = 200\n"
           "blobs_std = 0.6\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hidden_dims = 64\nfeature_dim = 50\nmethod = pfedpm\nrounds = 30\n";
  if (name == "blobs-local")
    return "dataset = blobs\nblobs_classes = 10\nblobs_dim = 20\nblobs_per_class = 200\n"
           "blobs_std = 0.6\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hidden_dims = 64\nfeature_dim = 50\nmethod = local\nrounds = 30\n";
  if (name == "mnist-skew-n3")
    return "dataset = mnist\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hidden_dims = 128\nfeature_dim = 50\nmethod = pfedpm\nrounds = 50\n"
           "relation_epochs = 5\n";
  if (name == "mnist-local")
    return "dataset = mnist\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hidden_dims = 128\nfeature_dim = 50\nmethod = local\nrounds = 50\n";
  if (name == "mnist-fedavg")
    return "dataset = mnist\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hidden_dims = 128\nfeature_dim = 50\nmethod = fedavg\nrounds = 50\n";
  if (name == "mnist-hetero")
    return "dataset = mnist\nclients = 20\nn_mean = 3\nk_mean = 42\nstdev = 2\n"
           "hetero_widths = 112,128,144\nfeature_dim = 50\nmethod = pfedpm\nrounds = 50\n"
           "relation_epochs = 5\n";
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"blobs-skew-n3", "blobs-local", "mnist-skew-n3",
          "mnist-local",   "mnist-fedavg", "mnist-hetero"};
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset == "blobs")
    return synth_blobs(cfg.blobs_classes, cfg.blobs_dim, cfg.blobs_per_class, cfg.blobs_std,
                       cfg.seed, cfg.blobs_sep);
  return load_mnist_idx(cfg.mnist_images, cfg.mnist_labels);
}

std::vector<ClientState> build_clients(const ExperimentConfig& cfg, const Dataset& ds,
                                       const std::vector<ClientSplit>& splits) {
  std::vector<ClientState> clients;
  for (const auto& sp : splits) {
    BodySpec spec;
    spec.input_dim = ds.input_dim();
    spec.feature_dim = cfg.feature_dim;
    if (cfg.hetero_widths.empty())
      spec.hidden_dims = cfg.hidden_dims;
    else
      spec.hidden_dims = {cfg.hetero_widths[sp.id % cfg.hetero_widths.size()]};

    ClientState c;
    c.id = sp.id;
    c.split = sp;
    c.num_classes = ds.num_classes;
    c.body = init_body(spec, cfg.seed, sp.id);
    c.decision = init_decision_head(cfg.feature_dim, cfg.decision_hidden, ds.num_classes,
                                    cfg.seed, sp.id);
    c.relation = init_relation_head(cfg.feature_dim, cfg.relation_hidden, cfg.seed, sp.id);
    c.opt_main = {cfg.lr, cfg.momentum, {}};
    c.opt_rel = {cfg.lr, cfg.momentum, {}};
    clients.push_back(std::move(c));
  }
  return clients;
}

ExperimentResult run_configured(const ExperimentConfig& cfg, const Dataset& ds,
                                std::vector<ClientState>& clients, int threads) {
  RoundConfig rc = cfg.round_config();
  ExperimentResult res;
  if (cfg.method == "pfedpm") {
    ServerState server;
    res.rounds = run_pfedpm(server, clients, ds, rc, threads);
  } else if (cfg.method == "local") {
    res.rounds = run_local_baseline(clients, ds, rc, threads);
  } else {
    res.rounds = run_fedavg_baseline(clients, ds, rc, threads);
  }
  for (const auto& m : res.rounds) {
    res.ledger.per_round_scalars.push_back(m.upload_scalars);
    res.ledger.per_round_bytes.push_back(
        cfg.method == "pfedpm" ? pfedpm_upload_bytes(clients, cfg.feature_dim)
                               : m.upload_scalars * 8);
  }
  res.ledger.fedavg_scalars_per_round = fedavg_upload_scalars(clients);
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                int threads) {
  fs::create_directories(out_dir);
  Dataset ds = build_dataset(cfg);
  SkewSpec skew{cfg.clients, cfg.n_mean, cfg.k_mean, cfg.stdev, cfg.seed};
  std::vector<ClientSplit> splits = partition_label_skew(ds, skew);
  std::vector<ClientState> clients = build_clients(cfg, ds, splits);

  ExperimentResult res = run_configured(cfg, ds, clients, threads);

  write_file(out_dir + "/partition.json", partition_to_json(splits));
  write_file(out_dir + "/metrics.csv", metrics_to_csv(res.rounds));

  const RoundMetrics& last = res.rounds.back();
  std::vector<double> mean_losses;
  for (const auto& m : res.rounds) mean_losses.push_back(m.mean_train_loss);
  nlohmann::json summary = {
      {"method", cfg.method},
      {"rounds", cfg.rounds},
      {"final_mean_decision_acc", last.mean_decision_acc},
      {"final_std_decision_acc", last.std_decision_acc},
      {"final_mean_relation_acc", last.mean_relation_acc},
      {"final_std_relation_acc", last.std_relation_acc},
      {"total_upload_scalars", last.cum_upload_scalars},
      {"fedavg_equivalent_scalars_per_round", res.ledger.fedavg_scalars_per_round},
      {"loss_decrease_fraction",
       res.rounds.size() >= 2 ? loss_decrease_diagnostic(mean_losses) : 0.0},
  };
  write_file(out_dir + "/summary.json", summary.dump(2) + "\n");

  nlohmann::json manifest = {
      {"version", kVersion},
      {"seed", cfg.seed},
      {"prng_scheme", kPrngScheme},
      {"config", resolve_config(cfg)},
      {"outputs",
       {{"metrics.csv", hex64(fnv1a64_file(out_dir + "/metrics.csv"))},
        {"summary.json", hex64(fnv1a64_file(out_dir + "/summary.json"))},
        {"partition.json", hex64(fnv1a64_file(out_dir + "/partition.json"))}}},
  };
  write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  return res;
}

void sweep(const ExperimentConfig& cfg, const std::string& parameter,
           const std::vector<double>& values, const std::string& out_dir, int threads) {
  if (values.empty()) throw ContractError("sweep: empty value list");
  if (parameter != "a" && parameter != "lambda" && parameter != "stdev" &&
      parameter != "n_mean")
    throw ConfigError("sweep: parameter must be one of a, lambda, stdev, n_mean");
  fs::create_directories(out_dir);

  std::string combined = parameter + ",round,mean_acc_decision,std_acc_decision,"
                         "mean_acc_relation,std_acc_relation,mean_train_loss,"
                         "upload_scalars,cum_upload_scalars\n";
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (parameter == "a") c.a = v;
    else if (parameter == "lambda") c.lambda = v;
    else if (parameter == "stdev") c.stdev = v;
    else c.n_mean = v;

    char tag[48];
    std::snprintf(tag, sizeof(tag), "%s_%g", parameter.c_str(), v);
    ExperimentResult res = run_experiment(c, out_dir + "/" + tag, threads);

    std::string csv = metrics_to_csv(res.rounds);
    char vbuf[32];
    std::snprintf(vbuf, sizeof(vbuf), "%.9g", v);
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);  // drop header
    while (std::getline(ss, line))
      if (!line.empty()) combined += std::string(vbuf) + "," + line + "\n";
  }
  write_file(out_dir + "/sweep.csv", combined);
}

bool replay(const std::string& manifest_path, const std::string& out_dir, int threads) {
  nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path));
  ExperimentConfig cfg = parse_config_text(manifest.at("config").get<std::string>());
  run_experiment(cfg, out_dir, threads);
  bool ok = true;
  for (const auto& [file, checksum] : manifest.at("outputs").items())
    ok = ok && hex64(fnv1a64_file(out_dir + "/" + file)) == checksum.get<std::string>();
  return ok;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::string data = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pfedpm
