#include "pfedpm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "pfedpm/rng.hpp"

namespace pfedpm {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t off,
                   const std::string& path) {
  if (off + 4 > buf.size())
    throw FormatError(path + ": truncated header at offset " + std::to_string(off));
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

int clamp_round(double x, int lo, int hi) {
  int v = static_cast<int>(std::llround(x));
  return std::max(lo, std::min(hi, v));
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = read_file(images_path);
  auto lab = read_file(labels_path);

  if (be32(img, 0, images_path) != kImageMagic)
    throw FormatError(images_path + ": bad image magic at offset 0, expected 2051 got " +
                      std::to_string(be32(img, 0, images_path)));
  std::uint32_t n = be32(img, 4, images_path);
  std::uint32_t rows = be32(img, 8, images_path);
  std::uint32_t cols = be32(img, 12, images_path);
  std::size_t need = 16 + std::size_t(n) * rows * cols;
  if (img.size() < need)
    throw FormatError(images_path + ": truncated payload, need " + std::to_string(need) +
                      " bytes, have " + std::to_string(img.size()) + " (offset " +
                      std::to_string(img.size()) + ")");

  if (be32(lab, 0, labels_path) != kLabelMagic)
    throw FormatError(labels_path + ": bad label magic at offset 0, expected 2049 got " +
                      std::to_string(be32(lab, 0, labels_path)));
  std::uint32_t ln = be32(lab, 4, labels_path);
  if (ln != n)
    throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                      " does not match image count " + std::to_string(n));
  if (lab.size() < 8 + std::size_t(ln))
    throw FormatError(labels_path + ": truncated payload (offset " +
                      std::to_string(lab.size()) + ")");

  int dim = static_cast<int>(rows * cols);
  Dataset ds;
  ds.features = Tensor(static_cast<int>(n), dim);
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int p = 0; p < dim; ++p)
      ds.features.at(static_cast<int>(i), p) = img[16 + std::size_t(i) * dim + p] / 255.0;
    ds.labels[i] = lab[8 + i];
  }
  int max_label = 0;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = max_label + 1;
  return ds;
}

Dataset synth_blobs(int num_classes, int input_dim, int per_class, double cluster_std,
                    std::uint64_t seed, double separation) {
  if (num_classes <= 0 || input_dim <= 0 || per_class <= 0 || cluster_std < 0.0)
    throw ContractError("synth_blobs: all parameters must be positive");
  int bits = 0;
  while ((1 << bits) < num_classes) ++bits;
  if (bits > input_dim)
    throw ContractError("synth_blobs: input_dim too small to separate classes");

  // class means at distinct hypercube corners
  std::vector<Tensor> means;
  for (int j = 0; j < num_classes; ++j) {
    Tensor mu(1, input_dim);
    for (int t = 0; t < bits; ++t) mu.at(0, t) = separation * ((j >> t) & 1);
    means.push_back(mu);
  }

  CounterRng rng(seed, CounterRng::kBlobData);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.features = Tensor(num_classes * per_class, input_dim);
  ds.labels.resize(static_cast<std::size_t>(num_classes) * per_class);
  int r = 0;
  for (int s = 0; s < per_class; ++s)
    for (int j = 0; j < num_classes; ++j) {
      for (int t = 0; t < input_dim; ++t)
        ds.features.at(r, t) = means[j].at(0, t) + cluster_std * rng.gaussian();
      ds.labels[r] = j;
      ++r;
    }
  return ds;
}

std::vector<ClientSplit> partition_label_skew(const Dataset& ds, const SkewSpec& spec) {
  int C = ds.num_classes;
  if (C < 1 || ds.size() == 0) throw ContractError("partition: empty dataset");
  if (spec.num_clients < 1) throw ContractError("partition: num_clients must be >= 1");
  if (spec.n_mean < 1.0 || spec.n_mean > C)
    throw ContractError("partition: n_mean must lie in [1, C]");
  if (spec.k_mean < 1.0 || spec.stdev < 0.0)
    throw ContractError("partition: k_mean >= 1 and stdev >= 0 required");

  // per-class index pools, consumed sequentially; a pool is reshuffled and
  // reused only once exhausted
  std::vector<std::vector<int>> pool(C);
  std::vector<std::size_t> cursor(C, 0);
  std::vector<int> refill_round(C, 0);
  for (int i = 0; i < ds.size(); ++i) pool[ds.labels[i]].push_back(i);
  for (int j = 0; j < C; ++j) {
    if (pool[j].empty()) continue;
    CounterRng prng(spec.seed, CounterRng::kPartition, 0, 1000 + j);
    shuffle_indices(pool[j], prng);
  }

  std::vector<ClientSplit> splits;
  for (int i = 0; i < spec.num_clients; ++i) {
    CounterRng rng(spec.seed, CounterRng::kPartition, static_cast<std::uint64_t>(i) + 1);
    int n_i = clamp_round(spec.n_mean + spec.stdev * rng.gaussian(), 1, C);

    // classes drawn uniformly without replacement (partial Fisher-Yates),
    // restricted to classes that actually have samples
    std::vector<int> candidates;
    for (int j = 0; j < C; ++j)
      if (!pool[j].empty()) candidates.push_back(j);
    if (candidates.empty()) throw ContractError("partition: no non-empty classes");
    n_i = std::min<int>(n_i, static_cast<int>(candidates.size()));
    shuffle_indices(candidates, rng);
    std::vector<int> classes(candidates.begin(), candidates.begin() + n_i);
    std::sort(classes.begin(), classes.end());

    ClientSplit sp;
    sp.id = i;
    sp.classes = classes;
    for (int j : classes) {
      int avail = static_cast<int>(pool[j].size());
      double noise = rng.gaussian() * spec.stdev * spec.k_mean / spec.n_mean;
      int k = clamp_round(spec.k_mean + noise, 1, avail);

      std::vector<int> drawn;
      std::unordered_set<int> seen;
      while (static_cast<int>(drawn.size()) < k) {
        if (cursor[j] >= pool[j].size()) {
          CounterRng prng(spec.seed, CounterRng::kPartition, 0,
                          1000 + j + 1000000ull * ++refill_round[j]);
          shuffle_indices(pool[j], prng);
          cursor[j] = 0;
        }
        int idx = pool[j][cursor[j]++];
        if (seen.insert(idx).second) drawn.push_back(idx);
      }

      // stratified 80/20: last floor(k/5) of the drawn order are test
      int test_n = k / 5;
      for (int t = 0; t < k; ++t)
        (t < k - test_n ? sp.train_idx : sp.test_idx).push_back(drawn[t]);
    }
    splits.push_back(std::move(sp));
  }
  return splits;
}

std::map<int, int> client_class_counts(const ClientSplit& split, const Dataset& ds) {
  std::map<int, int> counts;
  for (int i : split.train_idx) ++counts[ds.labels[i]];
  return counts;
}

std::string partition_to_json(const std::vector<ClientSplit>& splits) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& sp : splits) {
    out.push_back({{"client", sp.id},
                   {"classes", sp.classes},
                   {"train_idx", sp.train_idx},
                   {"test_idx", sp.test_idx}});
  }
  return out.dump(2);
}

}  // namespace pfedpm
