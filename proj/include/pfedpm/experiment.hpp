#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfedpm/data.hpp"
#include "pfedpm/metrics.hpp"
#include "pfedpm/protocol.hpp"

namespace pfedpm {

// Flat key=value experiment description. Every field has a documented
// default; unknown keys are rejected at parse time.
struct ExperimentConfig {
  std::string dataset = "blobs";  // blobs | mnist
  std::string mnist_images = "data/mnist/mnist-images-idx3-ubyte";
  std::string mnist_labels = "data/mnist/mnist-labels-idx1-ubyte";
  int blobs_classes = 10;
  int blobs_dim = 20;
  int blobs_per_class = 200;
  double blobs_std = 0.6;
  double blobs_sep = 1.0;

  int clients = 20;
  double n_mean = 3.0;
  double k_mean = 42.0;
  double stdev = 2.0;

  std::vector<int> hidden_dims{128};
  std::vector<int> hetero_widths;  // when set, client i uses width [i % size]
  int feature_dim = 50;
  std::vector<int> decision_hidden;
  int relation_hidden = 32;

  std::string method = "pfedpm";  // pfedpm | local | fedavg
  double a = 0.5;
  double lambda = 1.0;
  int epochs = 1;
  int batch = 10;
  double lr = 0.01;
  double momentum = 0.5;
  int rounds = 30;
  int relation_epochs = 1;
  std::uint64_t seed = 1;

  RoundConfig round_config() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical emission; parse(resolve(cfg)) == cfg.
std::string resolve_config(const ExperimentConfig& cfg);

// Named presets (desk-scale versions of the reference experiments).
std::string preset_config(const std::string& name);
std::vector<std::string> preset_names();

Dataset build_dataset(const ExperimentConfig& cfg);
std::vector<ClientState> build_clients(const ExperimentConfig& cfg, const Dataset& ds,
                                       const std::vector<ClientSplit>& splits);

struct ExperimentResult {
  std::vector<RoundMetrics> rounds;
  CommLedger ledger;
};

ExperimentResult run_configured(const ExperimentConfig& cfg, const Dataset& ds,
                                std::vector<ClientState>& clients, int threads);

// Full run: dataset, partition, clients, training, artifact emission
// (metrics.csv, summary.json, partition.json, manifest.json) into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                int threads = 1);

// Independent seeded runs for each value of `parameter` (a | lambda |
// stdev | n_mean); per-value subdirectories plus a combined CSV keyed by
// the parameter value.
void sweep(const ExperimentConfig& cfg, const std::string& parameter,
           const std::vector<double>& values, const std::string& out_dir, int threads = 1);

// Re-runs the experiment recorded in a manifest and verifies that the
// regenerated outputs match the recorded checksums. Returns true on match.
bool replay(const std::string& manifest_path, const std::string& out_dir, int threads = 1);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace pfedpm
