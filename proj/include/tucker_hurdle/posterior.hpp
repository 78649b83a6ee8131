#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/sampler.hpp"

namespace tucker_hurdle {

enum class GlobalScaleMode { per_tensor, shared };

struct Hyperparameters {
  double sigma_a = 1.0;  // caries-side and subject factors
  double sigma_b = 1.0;  // fluorosis-side factors
  double cutpoint_sd = 2.0;
  GlobalScaleMode global_scale = GlobalScaleMode::per_tensor;
};

enum class SliceKind {
  subject_factor,
  spatial_factor,
  predictor_factor,
  time_factor,
  core,
  cutpoint_raw,
  log_local_scale,
  log_global_scale,
};

/// Contiguous range of the flat parameter vector holding one named block.
/// Matrices are stored row-major with shape rows x cols.
struct Slice {
  std::string name;
  SliceKind kind;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// All model quantities in natural (structured) form.
struct ModelParams {
  LinkedCoefficients coefficients;
  CutpointRaw raw_caries;
  CutpointRaw raw_fluorosis;
  std::array<std::vector<double>, 4> log_local;  // one per core element, block_index order
  std::vector<double> log_global;                // 4 entries, or 1 when shared
};

class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(const ModelDims& dims, GlobalScaleMode mode);

  std::size_t dimension() const { return dimension_; }
  const std::vector<Slice>& slices() const { return slices_; }
  const Slice& slice(const std::string& name) const;
  const ModelDims& dims() const { return dims_; }
  GlobalScaleMode global_scale() const { return mode_; }
  /// Slice name plus element index, e.g. "caries.occurrence.core[3]".
  std::string coordinate_name(std::size_t i) const;

  ModelParams unpack(std::span<const double> v) const;
  void pack(const ModelParams& p, std::span<double> out) const;
  std::vector<double> pack(const ModelParams& p) const;

  nlohmann::json to_json() const;
  static ParamLayout from_json(const nlohmann::json& j);

 private:
  void add(std::string name, SliceKind kind, std::size_t rows, std::size_t cols);

  ModelDims dims_;
  GlobalScaleMode mode_ = GlobalScaleMode::per_tensor;
  std::vector<Slice> slices_;
  std::size_t dimension_ = 0;
};

double log_prior(std::span<const double> v, const ParamLayout& layout, const Hyperparameters& hyper);
double log_posterior(std::span<const double> v, const ParamLayout& layout,
                     const PairedDataset& data, const Hyperparameters& hyper);

struct LogDensityResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Exact gradient by reverse accumulation through likelihood, Tucker contractions and priors.
LogDensityResult grad_log_posterior(std::span<const double> v, const ParamLayout& layout,
                                    const PairedDataset& data, const Hyperparameters& hyper);

/// Largest |analytic - central difference| / max(1, |analytic|, |fd|) over all coordinates,
/// with step 1e-5 * (1 + |v_i|).
double max_gradient_error(std::span<const double> v, const ParamLayout& layout,
                          const PairedDataset& data, const Hyperparameters& hyper);

/// How the sampler sees core entries. Non-centered replaces each g_k by
/// z_k = g_k / (tau * lambda_k); the density is the same posterior with the Jacobian included.
enum class CoreParameterization { centered, non_centered };

/// The log posterior as a sampler target. Holds references; data must outlive it.
/// Draws are always reported in the layout's coordinates.
class PosteriorTarget final : public LogDensity {
 public:
  PosteriorTarget(const ParamLayout& layout, const PairedDataset& data, const Hyperparameters& hyper,
                  CoreParameterization cores = CoreParameterization::non_centered)
      : layout_(layout), data_(data), hyper_(hyper), cores_(cores) {}

  std::size_t dimension() const override { return layout_.dimension(); }
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::string coordinate_name(std::size_t i) const override { return layout_.coordinate_name(i); }
  void output_coordinates(std::span<const double> x, std::span<double> out) const override;

 private:
  const ParamLayout& layout_;
  const PairedDataset& data_;
  Hyperparameters hyper_;
  CoreParameterization cores_;
};

}  // namespace tucker_hurdle
