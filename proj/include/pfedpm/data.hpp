#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pfedpm/tensor.hpp"

namespace pfedpm {

struct Dataset {
  Tensor features;          // N x input_dim
  std::vector<int> labels;  // length N, values in [0, C)
  int num_classes = 0;

  int size() const { return features.rows(); }
  int input_dim() const { return features.cols(); }
};

// Label-distribution-skew parameters: each client gets ~n_mean classes and
// ~k_mean training samples per class, both jittered by Gaussian noise.
struct SkewSpec {
  int num_clients = 20;
  double n_mean = 3.0;
  double k_mean = 100.0;
  double stdev = 2.0;
  std::uint64_t seed = 1;
};

struct ClientSplit {
  int id = 0;
  std::vector<int> classes;
  std::vector<int> train_idx;
  std::vector<int> test_idx;
};

// Big-endian IDX pair (image magic 2051, label magic 2049); pixels scaled
// to [0,1], 28x28 flattened row-major to 784.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian clusters with means at distinct corners of a hypercube scaled by
// `separation` (centroid distance >= separation along each differing axis).
Dataset synth_blobs(int num_classes, int input_dim, int per_class, double cluster_std,
                    std::uint64_t seed, double separation = 1.0);

std::vector<ClientSplit> partition_label_skew(const Dataset& ds, const SkewSpec& spec);

// Exact multiset counts of the split's train labels.
std::map<int, int> client_class_counts(const ClientSplit& split, const Dataset& ds);

std::string partition_to_json(const std::vector<ClientSplit>& splits);

}  // namespace pfedpm
