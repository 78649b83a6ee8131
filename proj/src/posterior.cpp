#include "tucker_hurdle/posterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;
const double kLogTwoOverPi = std::log(2.0 / std::numbers::pi);

std::string block_name(std::size_t b) {
  const Outcome o = b < 2 ? Outcome::caries : Outcome::fluorosis;
  const Component c = b % 2 == 0 ? Component::occurrence : Component::severity;
  return std::string(to_string(o)) + "." + to_string(c);
}

Outcome block_outcome(std::size_t b) { return b < 2 ? Outcome::caries : Outcome::fluorosis; }

// log(1 + exp(x))
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void copy_in(const Matrix& m, std::span<double> out) {
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
  }
}

Matrix copy_out(std::span<const double> in, std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in[k++];
  }
  return m;
}

const char* kind_name(SliceKind k) {
  switch (k) {
    case SliceKind::subject_factor: return "subject_factor";
    case SliceKind::spatial_factor: return "spatial_factor";
    case SliceKind::predictor_factor: return "predictor_factor";
    case SliceKind::time_factor: return "time_factor";
    case SliceKind::core: return "core";
    case SliceKind::cutpoint_raw: return "cutpoint_raw";
    case SliceKind::log_local_scale: return "log_local_scale";
    case SliceKind::log_global_scale: return "log_global_scale";
  }
  return "unknown";
}

// Adds the Gaussian log density N(0, sd^2) of every entry and its gradient.
double gaussian_block(std::span<const double> x, double sd, std::span<double> grad) {
  const double inv_var = 1.0 / (sd * sd);
  const double norm = -0.5 * kLogTwoPi - std::log(sd);
  double lp = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    lp += norm - 0.5 * x[k] * x[k] * inv_var;
    if (!grad.empty()) grad[k] -= x[k] * inv_var;
  }
  return lp;
}

// Half-Cauchy(0, 1) on s = exp(l) plus the log-Jacobian l.
double half_cauchy_log(double l, double* d_l) {
  if (d_l) *d_l += 1.0 - 2.0 * (1.0 / (1.0 + std::exp(-2.0 * l)));
  return kLogTwoOverPi - softplus(2.0 * l) + l;
}

double prior_impl(std::span<const double> v, const ParamLayout& layout,
                  const Hyperparameters& hyper, std::span<double> grad) {
  if (v.size() != layout.dimension()) throw ShapeError("parameter vector has wrong length");
  auto sub = [&](const Slice& s) { return v.subspan(s.offset, s.size); };
  auto gsub = [&](const Slice& s) {
    return grad.empty() ? std::span<double>() : grad.subspan(s.offset, s.size);
  };

  double lp = 0.0;
  for (const auto& s : layout.slices()) {
    switch (s.kind) {
      case SliceKind::subject_factor:
        lp += gaussian_block(sub(s), hyper.sigma_a, gsub(s));
        break;
      case SliceKind::spatial_factor:
      case SliceKind::predictor_factor:
      case SliceKind::time_factor: {
        const bool fluorosis = s.name.rfind("fluorosis", 0) == 0;
        lp += gaussian_block(sub(s), fluorosis ? hyper.sigma_b : hyper.sigma_a, gsub(s));
        break;
      }
      case SliceKind::cutpoint_raw:
        lp += gaussian_block(sub(s), hyper.cutpoint_sd, gsub(s));
        break;
      default:
        break;
    }
  }

  // Horseshoe: g_k ~ N(0, tau^2 lambda_k^2), lambda_k, tau ~ C+(0, 1), sampled on the log scale.
  const bool shared = layout.global_scale() == GlobalScaleMode::shared;
  const Slice* shared_tau = shared ? &layout.slice("log_global_scale.shared") : nullptr;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    const Slice& core = layout.slice(name + ".core");
    const Slice& local = layout.slice("log_local_scale." + name);
    const Slice& global = shared ? *shared_tau : layout.slice("log_global_scale." + name);
    const double lt = v[global.offset];
    double d_lt = 0.0;
    for (std::size_t k = 0; k < core.size; ++k) {
      const double g = v[core.offset + k];
      const double l = v[local.offset + k];
      const double inv_var = std::exp(-2.0 * (l + lt));
      const double z2 = g * g * inv_var;
      lp += -0.5 * kLogTwoPi - lt - l - 0.5 * z2;
      double d_l = 0.0;
      lp += half_cauchy_log(l, grad.empty() ? nullptr : &d_l);
      if (!grad.empty()) {
        grad[core.offset + k] -= g * inv_var;
        grad[local.offset + k] += d_l - 1.0 + z2;
        d_lt += -1.0 + z2;
      }
    }
    if (!grad.empty()) grad[global.offset] += d_lt;
  }
  std::vector<const Slice*> globals;
  for (const auto& s : layout.slices()) {
    if (s.kind == SliceKind::log_global_scale) globals.push_back(&s);
  }
  for (const Slice* s : globals) {
    double d = 0.0;
    lp += half_cauchy_log(v[s->offset], grad.empty() ? nullptr : &d);
    if (!grad.empty()) grad[s->offset] += d;
  }
  return lp;
}

}  // namespace

ParamLayout::ParamLayout(const ModelDims& dims, GlobalScaleMode mode) : dims_(dims), mode_(mode) {
  dims_.validate();
  const auto& r = dims_.ranks;
  add("subject.occurrence", SliceKind::subject_factor, dims_.n_subjects, r.subject_occurrence);
  add("subject.severity", SliceKind::subject_factor, dims_.n_subjects, r.subject_severity);
  for (std::size_t b = 0; b < 4; ++b) {
    const Outcome o = block_outcome(b);
    const Component c = b % 2 == 0 ? Component::occurrence : Component::severity;
    const auto& br = r.blocks[b];
    const std::string name = block_name(b);
    add(name + ".spatial", SliceKind::spatial_factor, dims_.n_locations(o), br.spatial);
    add(name + ".predictor", SliceKind::predictor_factor, dims_.n_predictors(c), br.predictor);
    std::size_t core_size = r.subject(c) * br.spatial * br.predictor;
    if (dims_.longitudinal) {
      add(name + ".time", SliceKind::time_factor, dims_.n_times, br.time);
      core_size *= br.time;
    }
    add(name + ".core", SliceKind::core, 1, core_size);
  }
  add("cutpoint_raw.caries", SliceKind::cutpoint_raw, 1,
      static_cast<std::size_t>(dims_.n_caries_categories - 1));
  add("cutpoint_raw.fluorosis", SliceKind::cutpoint_raw, 1,
      static_cast<std::size_t>(dims_.n_fluorosis_categories - 1));
  for (std::size_t b = 0; b < 4; ++b) {
    add("log_local_scale." + block_name(b), SliceKind::log_local_scale, 1,
        slice(block_name(b) + ".core").size);
  }
  if (mode_ == GlobalScaleMode::shared) {
    add("log_global_scale.shared", SliceKind::log_global_scale, 1, 1);
  } else {
    for (std::size_t b = 0; b < 4; ++b) {
      add("log_global_scale." + block_name(b), SliceKind::log_global_scale, 1, 1);
    }
  }
}

void ParamLayout::add(std::string name, SliceKind kind, std::size_t rows, std::size_t cols) {
  slices_.push_back(Slice{std::move(name), kind, dimension_, rows * cols, rows, cols});
  dimension_ += rows * cols;
}

const Slice& ParamLayout::slice(const std::string& name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  throw ContractError("no parameter slice named '" + name + "'");
}

std::string ParamLayout::coordinate_name(std::size_t i) const {
  for (const auto& s : slices_) {
    if (i >= s.offset && i < s.offset + s.size) {
      return s.name + "[" + std::to_string(i - s.offset) + "]";
    }
  }
  throw ContractError("coordinate " + std::to_string(i) + " outside the parameter layout");
}

ModelParams ParamLayout::unpack(std::span<const double> v) const {
  if (v.size() != dimension_) throw ShapeError("parameter vector has wrong length");
  ModelParams p;
  p.coefficients = LinkedCoefficients::zeros(dims_);
  auto& lc = p.coefficients;
  auto sub = [&](const std::string& name) {
    const auto& s = slice(name);
    return std::pair{v.subspan(s.offset, s.size), &s};
  };
  for (Component c : kComponents) {
    auto [x, s] = sub(std::string("subject.") + to_string(c));
    lc.subject(c) = copy_out(x, s->rows, s->cols);
  }
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    auto& blk = lc.blocks[b];
    {
      auto [x, s] = sub(name + ".spatial");
      blk.spatial = copy_out(x, s->rows, s->cols);
    }
    {
      auto [x, s] = sub(name + ".predictor");
      blk.predictor = copy_out(x, s->rows, s->cols);
    }
    if (dims_.longitudinal) {
      auto [x, s] = sub(name + ".time");
      blk.time = copy_out(x, s->rows, s->cols);
    }
    auto [x, s] = sub(name + ".core");
    std::copy(x.begin(), x.end(), blk.core.data().begin());
    auto [l, ls] = sub("log_local_scale." + name);
    p.log_local[b].assign(l.begin(), l.end());
  }
  {
    auto [x, s] = sub("cutpoint_raw.caries");
    p.raw_caries.values.assign(x.begin(), x.end());
  }
  {
    auto [x, s] = sub("cutpoint_raw.fluorosis");
    p.raw_fluorosis.values.assign(x.begin(), x.end());
  }
  for (const auto& s : slices_) {
    if (s.kind == SliceKind::log_global_scale) p.log_global.push_back(v[s.offset]);
  }
  return p;
}

void ParamLayout::pack(const ModelParams& p, std::span<double> out) const {
  if (out.size() != dimension_) throw ShapeError("output vector has wrong length");
  p.coefficients.validate(dims_);
  auto dst = [&](const std::string& name) {
    const auto& s = slice(name);
    return out.subspan(s.offset, s.size);
  };
  auto put = [&](const std::string& name, std::span<const double> src) {
    auto d = dst(name);
    if (src.size() != d.size()) throw ShapeError("slice '" + name + "' has wrong length");
    std::copy(src.begin(), src.end(), d.begin());
  };
  const auto& lc = p.coefficients;
  for (Component c : kComponents) copy_in(lc.subject(c), dst(std::string("subject.") + to_string(c)));
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    const auto& blk = lc.blocks[b];
    copy_in(blk.spatial, dst(name + ".spatial"));
    copy_in(blk.predictor, dst(name + ".predictor"));
    if (dims_.longitudinal) copy_in(blk.time, dst(name + ".time"));
    put(name + ".core", blk.core.data());
    put("log_local_scale." + name, p.log_local[b]);
  }
  put("cutpoint_raw.caries", p.raw_caries.values);
  put("cutpoint_raw.fluorosis", p.raw_fluorosis.values);
  std::size_t g = 0;
  for (const auto& s : slices_) {
    if (s.kind != SliceKind::log_global_scale) continue;
    if (g >= p.log_global.size()) throw ShapeError("too few global scales");
    out[s.offset] = p.log_global[g++];
  }
  if (g != p.log_global.size()) throw ShapeError("too many global scales");
}

std::vector<double> ParamLayout::pack(const ModelParams& p) const {
  std::vector<double> v(dimension_);
  pack(p, v);
  return v;
}

nlohmann::json ParamLayout::to_json() const {
  nlohmann::json j;
  const auto& d = dims_;
  j["dims"] = {{"n_subjects", d.n_subjects},
               {"n_times", d.n_times},
               {"longitudinal", d.longitudinal},
               {"n_caries_locations", d.n_caries_locations},
               {"n_fluorosis_locations", d.n_fluorosis_locations},
               {"p_occurrence", d.p_occurrence},
               {"p_severity", d.p_severity},
               {"n_caries_categories", d.n_caries_categories},
               {"n_fluorosis_categories", d.n_fluorosis_categories}};
  nlohmann::json ranks;
  ranks["subject_occurrence"] = d.ranks.subject_occurrence;
  ranks["subject_severity"] = d.ranks.subject_severity;
  for (std::size_t b = 0; b < 4; ++b) {
    const auto& br = d.ranks.blocks[b];
    ranks[block_name(b)] = {{"spatial", br.spatial}, {"predictor", br.predictor}, {"time", br.time}};
  }
  j["ranks"] = ranks;
  j["global_scale"] = mode_ == GlobalScaleMode::shared ? "shared" : "per_tensor";
  j["dimension"] = dimension_;
  auto& sl = j["slices"] = nlohmann::json::array();
  for (const auto& s : slices_) {
    sl.push_back({{"name", s.name},
                  {"kind", kind_name(s.kind)},
                  {"offset", s.offset},
                  {"size", s.size},
                  {"rows", s.rows},
                  {"cols", s.cols}});
  }
  return j;
}

ParamLayout ParamLayout::from_json(const nlohmann::json& j) {
  try {
    ModelDims d;
    const auto& jd = j.at("dims");
    d.n_subjects = jd.at("n_subjects").get<std::size_t>();
    d.n_times = jd.at("n_times").get<std::size_t>();
    d.longitudinal = jd.at("longitudinal").get<bool>();
    d.n_caries_locations = jd.at("n_caries_locations").get<std::size_t>();
    d.n_fluorosis_locations = jd.at("n_fluorosis_locations").get<std::size_t>();
    d.p_occurrence = jd.at("p_occurrence").get<std::size_t>();
    d.p_severity = jd.at("p_severity").get<std::size_t>();
    d.n_caries_categories = jd.at("n_caries_categories").get<int>();
    d.n_fluorosis_categories = jd.at("n_fluorosis_categories").get<int>();
    const auto& jr = j.at("ranks");
    d.ranks.subject_occurrence = jr.at("subject_occurrence").get<std::size_t>();
    d.ranks.subject_severity = jr.at("subject_severity").get<std::size_t>();
    for (std::size_t b = 0; b < 4; ++b) {
      const auto& x = jr.at(block_name(b));
      d.ranks.blocks[b] = BlockRanks{x.at("spatial").get<std::size_t>(),
                                     x.at("predictor").get<std::size_t>(),
                                     x.at("time").get<std::size_t>()};
    }
    const auto mode = j.at("global_scale").get<std::string>() == "shared" ? GlobalScaleMode::shared
                                                                          : GlobalScaleMode::per_tensor;
    ParamLayout layout(d, mode);
    if (layout.dimension() != j.at("dimension").get<std::size_t>()) {
      throw DataError("layout header dimension does not match the rebuilt layout");
    }
    return layout;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed layout header: ") + e.what());
  }
}

double log_prior(std::span<const double> v, const ParamLayout& layout, const Hyperparameters& hyper) {
  return prior_impl(v, layout, hyper, {});
}

double log_posterior(std::span<const double> v, const ParamLayout& layout,
                     const PairedDataset& data, const Hyperparameters& hyper) {
  const auto p = layout.unpack(v);
  return log_prior(v, layout, hyper) +
         log_likelihood(data, p.coefficients, p.raw_caries, p.raw_fluorosis);
}

LogDensityResult grad_log_posterior(std::span<const double> v, const ParamLayout& layout,
                                    const PairedDataset& data, const Hyperparameters& hyper) {
  LogDensityResult out;
  const auto p = layout.unpack(v);
  const auto lik = log_likelihood_gradient(data, p.coefficients, p.raw_caries, p.raw_fluorosis);

  ModelParams g;
  g.coefficients = lik.coefficients;
  g.raw_caries.values = lik.raw_caries;
  g.raw_fluorosis.values = lik.raw_fluorosis;
  for (std::size_t b = 0; b < 4; ++b) g.log_local[b].assign(p.log_local[b].size(), 0.0);
  g.log_global.assign(p.log_global.size(), 0.0);
  out.gradient = layout.pack(g);
  out.value = lik.value + prior_impl(v, layout, hyper, out.gradient);
  return out;
}

double max_gradient_error(std::span<const double> v, const ParamLayout& layout,
                          const PairedDataset& data, const Hyperparameters& hyper) {
  const auto analytic = grad_log_posterior(v, layout, data, hyper);
  std::vector<double> x(v.begin(), v.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(v[i]));
    x[i] = v[i] + h;
    const double up = log_posterior(x, layout, data, hyper);
    x[i] = v[i] - h;
    const double down = log_posterior(x, layout, data, hyper);
    x[i] = v[i];
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic.gradient[i];
    const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

namespace {

struct CoreScaleSlices {
  const Slice* core;
  const Slice* local;
  const Slice* global;
};

std::array<CoreScaleSlices, 4> core_scale_slices(const ParamLayout& layout) {
  const bool shared = layout.global_scale() == GlobalScaleMode::shared;
  std::array<CoreScaleSlices, 4> out{};
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string name = block_name(b);
    out[b] = {&layout.slice(name + ".core"), &layout.slice("log_local_scale." + name),
              &layout.slice(shared ? std::string("log_global_scale.shared") : "log_global_scale." + name)};
  }
  return out;
}

}  // namespace

void PosteriorTarget::output_coordinates(std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
  if (cores_ == CoreParameterization::centered) return;
  for (const auto& s : core_scale_slices(layout_)) {
    const double lt = x[s.global->offset];
    for (std::size_t k = 0; k < s.core->size; ++k) {
      out[s.core->offset + k] = x[s.core->offset + k] * std::exp(lt + x[s.local->offset + k]);
    }
  }
}

double PosteriorTarget::log_density_gradient(std::span<const double> x,
                                             std::span<double> grad) const {
  if (cores_ == CoreParameterization::centered) {
    auto r = grad_log_posterior(x, layout_, data_, hyper_);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.value;
  }
  std::vector<double> v(x.size());
  output_coordinates(x, v);
  auto r = grad_log_posterior(v, layout_, data_, hyper_);
  std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
  double log_jacobian = 0.0;
  for (const auto& s : core_scale_slices(layout_)) {
    const double lt = x[s.global->offset];
    for (std::size_t k = 0; k < s.core->size; ++k) {
      const std::size_t ci = s.core->offset + k;
      const std::size_t li = s.local->offset + k;
      const double dg = r.gradient[ci];
      log_jacobian += lt + x[li];
      grad[ci] = dg * std::exp(lt + x[li]);
      grad[li] += dg * v[ci] + 1.0;
      grad[s.global->offset] += dg * v[ci] + 1.0;
    }
  }
  return r.value + log_jacobian;
}

}  // namespace tucker_hurdle
