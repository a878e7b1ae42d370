#include "pfedpm/tensor.hpp"

#include <cmath>
#include <utility>

namespace pfedpm {

Tensor::Tensor(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), v_(std::move(data)) {
  if (rows < 0 || cols < 0) throw DimensionError("negative tensor dimension");
  if (v_.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("data length " + std::to_string(v_.size()) + " does not match shape " +
                         shape_str());
}

Tensor Tensor::row(std::vector<double> data) {
  int n = static_cast<int>(data.size());
  return Tensor(1, n, std::move(data));
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void check_finite(const Tensor& t, const char* op) {
  for (double x : t.raw())
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value produced");
}

void check_finite(double x, const char* op) {
  if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value produced");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() + " vs " +
                         b.shape_str());
  Tensor out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0.0;  // left-to-right over k, fixed order
      for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  check_finite(out, "matmul");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("add: shape mismatch, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] += b.raw()[i];
  check_finite(out, "add");
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    throw DimensionError("add_bias: bias " + b.shape_str() + " does not match input " +
                         x.shape_str());
  Tensor out = x;
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) out.at(i, j) += b.at(0, j);
  check_finite(out, "add_bias");
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.raw())
    if (v < 0.0) v = 0.0;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.raw()) v = 1.0 / (1.0 + std::exp(-v));
  check_finite(out, "sigmoid");
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw DimensionError("concat_rows: row counts differ, " + a.shape_str() + " vs " +
                         b.shape_str());
  Tensor out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  if (x.rows() == 0) throw ContractError("mean_rows: empty input");
  Tensor out(1, x.cols());
  for (int j = 0; j < x.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < x.rows(); ++i) s += x.at(i, j);
    out.at(0, j) = s / x.rows();
  }
  check_finite(out, "mean_rows");
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows())
      throw ContractError("gather_rows: row index " + std::to_string(idx[i]) + " out of range");
    for (int j = 0; j < x.cols(); ++j) out.at(static_cast<int>(i), j) = x.at(idx[i], j);
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (int i = 0; i < logits.rows(); ++i) {
    double mx = logits.at(i, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) {
      out.at(i, j) = std::exp(logits.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (int j = 0; j < logits.cols(); ++j) out.at(i, j) /= z;
  }
  check_finite(out, "softmax_rows");
  return out;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows())
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + logits.shape_str() + " logits");
  if (logits.rows() == 0) throw ContractError("softmax_cross_entropy: empty batch");
  double total = 0.0;
  for (int i = 0; i < logits.rows(); ++i) {
    int y = labels[i];
    if (y < 0 || y >= logits.cols())
      throw ContractError("softmax_cross_entropy: label " + std::to_string(y) +
                          " out of range [0, " + std::to_string(logits.cols()) + ")");
    double mx = logits.at(i, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) z += std::exp(logits.at(i, j) - mx);
    total += (mx + std::log(z)) - logits.at(i, y);
  }
  double loss = total / logits.rows();
  check_finite(loss, "softmax_cross_entropy");
  return loss;
}

double mse(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw DimensionError("mse: shape mismatch, " + pred.shape_str() + " vs " +
                         target.shape_str());
  if (pred.size() == 0) throw ContractError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred.raw()[i] - target.raw()[i];
    s += d * d;
  }
  double loss = s / static_cast<double>(pred.size());
  check_finite(loss, "mse");
  return loss;
}

double l2_distance(const Tensor& u, const Tensor& v) {
  if (!u.same_shape(v))
    throw DimensionError("l2_distance: shape mismatch, " + u.shape_str() + " vs " +
                         v.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double d = u.raw()[i] - v.raw()[i];
    s += d * d;
  }
  double dist = std::sqrt(s);
  check_finite(dist, "l2_distance");
  return dist;
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.raw()) s += v;
  check_finite(s, "sum");
  return s;
}

}  // namespace pfedpm
