#pragma once

#include <string>
#include <vector>

#include "pfedpm/errors.hpp"

namespace pfedpm {

// Dense row-major rank-<=2 array of doubles. Vectors are 1xN.
// Reductions run left-to-right so results are bitwise reproducible.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw DimensionError("negative tensor dimension");
  }
  Tensor(int rows, int cols, std::vector<double> data);

  static Tensor row(std::vector<double> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  bool operator==(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// Throws NumericError if any entry is NaN or Inf.
void check_finite(const Tensor& t, const char* op);
void check_finite(double x, const char* op);

// Plain (non-recording) kernels. The autodiff tape reuses these for its
// forward values, so eval-mode and recorded forwards are bitwise identical.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor mean_rows(const Tensor& x);
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);
Tensor softmax_rows(const Tensor& logits);
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);
double mse(const Tensor& pred, const Tensor& target);
double l2_distance(const Tensor& u, const Tensor& v);
double sum(const Tensor& x);

}  // namespace pfedpm
