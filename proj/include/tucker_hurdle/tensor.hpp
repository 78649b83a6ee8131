#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tucker_hurdle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-major dense tensor (last index varies fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  /// Zero-filled tensor of the given mode sizes.
  explicit DenseTensor(std::vector<std::size_t> dims);
  DenseTensor(std::vector<std::size_t> dims, std::vector<double> data);

  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  std::size_t order() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  double operator()(std::span<const std::size_t> index) const { return data_[offset(index)]; }
  double& operator()(std::span<const std::size_t> index) { return data_[offset(index)]; }
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  /// Same data viewed with different mode sizes (product must match).
  DenseTensor reshaped(std::vector<std::size_t> dims) const;

 private:
  void init_strides();

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

/// Core tensor plus one d_j x r_j factor matrix per mode.
struct TuckerFactor {
  DenseTensor core;
  std::vector<Matrix> factors;

  /// Throws ShapeError unless 1 <= r_j <= d_j and factor columns match the core.
  void validate() const;
  std::vector<std::size_t> output_dims() const;
};

/// Rank-r CP decomposition: weights eta_z and p factor matrices of shape d_j x r.
struct CpFactor {
  std::vector<double> weights;
  std::vector<Matrix> factors;

  void validate() const;
  std::size_t rank() const { return weights.size(); }
};

/// Contract mode `mode` of `t` with `m` (m.cols() == dims[mode]); that mode becomes m.rows().
DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::size_t mode);

/// Full tensor of a Tucker factorization, computed as a chain of mode products.
DenseTensor tucker_reconstruct(const TuckerFactor& f);

/// Full tensor of a CP factorization, summed directly over rank-1 terms.
DenseTensor cp_reconstruct(const CpFactor& f);

/// Diagonal-core Tucker embedding of a CP factorization.
TuckerFactor cp_to_tucker(const CpFactor& f);

/// prod(ranks) + sum_j ranks[j] * dims[j].
std::size_t tucker_param_count(std::span<const std::size_t> dims, std::span<const std::size_t> ranks);

}  // namespace tucker_hurdle
