#include "tucker_hurdle/tensor.hpp"

#include <functional>
#include <numeric>
#include <string>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

std::size_t product(std::span<const std::size_t> v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_string(std::span<const std::size_t> dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  init_strides();
  data_.assign(product(dims_), 0.0);
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  init_strides();
  if (data_.size() != product(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_string(dims_));
  }
}

void DenseTensor::init_strides() {
  if (dims_.empty()) throw ShapeError("tensor must have at least one mode");
  for (std::size_t d : dims_) {
    if (d == 0) throw ShapeError("tensor mode sizes must be positive, got " + dims_string(dims_));
  }
  strides_.assign(dims_.size(), 1);
  for (std::size_t j = dims_.size() - 1; j > 0; --j) strides_[j - 1] = strides_[j] * dims_[j];
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw ShapeError("index order does not match tensor order");
  std::size_t off = 0;
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] >= dims_[j]) throw ShapeError("tensor index out of range");
    off += index[j] * strides_[j];
  }
  return off;
}

double DenseTensor::at(std::initializer_list<std::size_t> index) const {
  return (*this)(std::span<const std::size_t>(index.begin(), index.size()));
}

double& DenseTensor::at(std::initializer_list<std::size_t> index) {
  return (*this)(std::span<const std::size_t>(index.begin(), index.size()));
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> dims) const {
  return DenseTensor(std::move(dims), data_);
}

void TuckerFactor::validate() const {
  const auto& r = core.dims();
  if (factors.size() != r.size()) {
    throw ShapeError("Tucker factor count " + std::to_string(factors.size()) +
                     " does not match core order " + std::to_string(r.size()));
  }
  for (std::size_t j = 0; j < r.size(); ++j) {
    const auto cols = static_cast<std::size_t>(factors[j].cols());
    const auto rows = static_cast<std::size_t>(factors[j].rows());
    if (cols != r[j]) {
      throw ShapeError("factor " + std::to_string(j) + " has " + std::to_string(cols) +
                       " columns but core mode size is " + std::to_string(r[j]));
    }
    if (rows < r[j]) {
      throw ShapeError("mode " + std::to_string(j) + " rank " + std::to_string(r[j]) +
                       " exceeds dimension " + std::to_string(rows));
    }
  }
}

std::vector<std::size_t> TuckerFactor::output_dims() const {
  std::vector<std::size_t> d;
  d.reserve(factors.size());
  for (const auto& m : factors) d.push_back(static_cast<std::size_t>(m.rows()));
  return d;
}

void CpFactor::validate() const {
  if (weights.empty()) throw ShapeError("CP rank must be at least 1");
  if (factors.empty()) throw ShapeError("CP factorization needs at least one mode");
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (static_cast<std::size_t>(factors[j].cols()) != weights.size()) {
      throw ShapeError("CP factor " + std::to_string(j) + " has " +
                       std::to_string(factors[j].cols()) + " columns, expected rank " +
                       std::to_string(weights.size()));
    }
    if (factors[j].rows() < 1) throw ShapeError("CP factor with zero rows");
  }
}

DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::size_t mode) {
  const auto& dims = t.dims();
  if (mode >= dims.size()) {
    throw ShapeError("mode " + std::to_string(mode) + " out of range for order " +
                     std::to_string(dims.size()));
  }
  if (static_cast<std::size_t>(m.cols()) != dims[mode]) {
    throw ShapeError("mode product inner dimension mismatch: matrix has " +
                     std::to_string(m.cols()) + " columns, tensor mode " + std::to_string(mode) +
                     " has size " + std::to_string(dims[mode]));
  }
  const std::size_t left = product(std::span(dims).first(mode));
  const std::size_t inner = dims[mode];
  const std::size_t right = product(std::span(dims).subspan(mode + 1));
  const auto rows = static_cast<std::size_t>(m.rows());

  std::vector<std::size_t> out_dims = dims;
  out_dims[mode] = rows;
  DenseTensor out(out_dims);
  auto in = t.data();
  auto o = out.data();
  for (std::size_t l = 0; l < left; ++l) {
    const double* src = in.data() + l * inner * right;
    double* dst = o.data() + l * rows * right;
    for (std::size_t a = 0; a < rows; ++a) {
      double* drow = dst + a * right;
      for (std::size_t b = 0; b < inner; ++b) {
        const double w = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (w == 0.0) continue;
        const double* srow = src + b * right;
        for (std::size_t r = 0; r < right; ++r) drow[r] += w * srow[r];
      }
    }
  }
  return out;
}

DenseTensor tucker_reconstruct(const TuckerFactor& f) {
  f.validate();
  DenseTensor out = f.core;
  for (std::size_t j = 0; j < f.factors.size(); ++j) out = mode_product(out, f.factors[j], j);
  return out;
}

DenseTensor cp_reconstruct(const CpFactor& f) {
  f.validate();
  std::vector<std::size_t> dims;
  for (const auto& m : f.factors) dims.push_back(static_cast<std::size_t>(m.rows()));
  DenseTensor out(dims);
  auto data = out.data();
  const std::size_t p = dims.size();
  std::vector<std::size_t> idx(p, 0);
  for (std::size_t flat = 0; flat < data.size(); ++flat) {
    double sum = 0.0;
    for (std::size_t z = 0; z < f.rank(); ++z) {
      double term = f.weights[z];
      for (std::size_t j = 0; j < p; ++j) {
        term *= f.factors[j](static_cast<Eigen::Index>(idx[j]), static_cast<Eigen::Index>(z));
      }
      sum += term;
    }
    data[flat] = sum;
    for (std::size_t j = p; j-- > 0;) {
      if (++idx[j] < dims[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

TuckerFactor cp_to_tucker(const CpFactor& f) {
  f.validate();
  const std::size_t r = f.rank();
  const std::size_t p = f.factors.size();
  TuckerFactor t{DenseTensor(std::vector<std::size_t>(p, r)), f.factors};
  std::vector<std::size_t> idx(p);
  for (std::size_t z = 0; z < r; ++z) {
    std::fill(idx.begin(), idx.end(), z);
    t.core(idx) = f.weights[z];
  }
  return t;
}

std::size_t tucker_param_count(std::span<const std::size_t> dims,
                               std::span<const std::size_t> ranks) {
  if (dims.size() != ranks.size()) {
    throw ShapeError("dims and ranks have different lengths");
  }
  std::size_t count = product(ranks);
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (ranks[j] > dims[j]) throw ShapeError("rank exceeds dimension in mode " + std::to_string(j));
    count += ranks[j] * dims[j];
  }
  return count;
}

}  // namespace tucker_hurdle
