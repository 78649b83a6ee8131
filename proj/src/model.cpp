#include "tucker_hurdle/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

// log(1 - exp(d)) for d < 0.
double log1mexp(double d) {
  return d > -0.6931471805599453 ? std::log(-std::expm1(d)) : std::log1p(-std::exp(d));
}

void require_increasing(std::span<const double> alphas) {
  for (std::size_t u = 1; u < alphas.size(); ++u) {
    if (!(alphas[u] > alphas[u - 1])) {
      throw ContractError("cutpoints must be strictly increasing (alpha[" + std::to_string(u) +
                          "] <= alpha[" + std::to_string(u - 1) + "])");
    }
  }
}

}  // namespace

const char* to_string(Outcome o) { return o == Outcome::caries ? "caries" : "fluorosis"; }
const char* to_string(Component c) {
  return c == Component::occurrence ? "occurrence" : "severity";
}

std::vector<double> cutpoints(std::span<const double> raw) {
  if (raw.empty()) throw ContractError("cutpoint raw vector must hold at least delta_0");
  std::vector<double> alphas;
  alphas.reserve(raw.size() - 1);
  double sum = 0.0;
  for (std::size_t j = 1; j < raw.size(); ++j) {
    sum += std::exp(raw[j]);
    alphas.push_back(sum - raw[0]);
  }
  return alphas;
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x < 0) return x - std::log1p(std::exp(x));
  return -std::log1p(std::exp(-x));
}

double occurrence_prob(double eta) { return logistic(eta); }
double log_occurrence_prob(double eta) { return log_logistic(eta); }

std::vector<double> severity_pmf(double eta, std::span<const double> alphas) {
  require_increasing(alphas);
  std::vector<double> pmf(alphas.size() + 1);
  double prev = 0.0;
  for (std::size_t u = 0; u < alphas.size(); ++u) {
    const double cum = logistic(alphas[u] - eta);
    pmf[u] = cum - prev;
    prev = cum;
  }
  pmf.back() = alphas.empty() ? 1.0 : logistic(eta - alphas.back());
  return pmf;
}

double CellProbabilities::cdf(std::size_t u) const {
  if (u >= pmf.size()) throw ContractError("cdf category out of range");
  double s = 0.0;
  for (std::size_t k = 0; k <= u; ++k) s += pmf[k];
  return u + 1 == pmf.size() ? 1.0 : s;
}

CellProbabilities cell_pmf(double eta_occ, double eta_sev, std::span<const double> alphas) {
  const auto sev = severity_pmf(eta_sev, alphas);
  const double positive = logistic(eta_occ);
  CellProbabilities out;
  out.pmf.reserve(sev.size() + 1);
  out.pmf.push_back(logistic(-eta_occ));
  for (double s : sev) out.pmf.push_back(positive * s);
  return out;
}

CellLogProbGrad cell_log_prob_grad(int y, double eta_occ, double eta_sev,
                                   std::span<const double> alphas) {
  const int k = static_cast<int>(alphas.size()) + 2;
  if (y < 0 || y >= k) {
    throw ContractError("category " + std::to_string(y) + " outside 0.." + std::to_string(k - 1));
  }
  CellLogProbGrad g;
  if (y == 0) {
    g.value = log_logistic(-eta_occ);
    g.d_eta_occ = -logistic(eta_occ);
    return g;
  }
  g.value = log_logistic(eta_occ);
  g.d_eta_occ = logistic(-eta_occ);
  if (k == 2) return g;

  const bool has_lower = y >= 2;
  const bool has_upper = y <= k - 2;
  double dx1 = 0.0;
  double dx2 = 0.0;
  if (has_lower && has_upper) {
    const double x1 = alphas[static_cast<std::size_t>(y - 2)] - eta_sev;
    const double x2 = alphas[static_cast<std::size_t>(y - 1)] - eta_sev;
    g.value += log_logistic(x2) + log_logistic(-x1) + log1mexp(x1 - x2);
    const double gap = 1.0 / std::expm1(x2 - x1);
    dx2 = logistic(-x2) + gap;
    dx1 = -logistic(x1) - gap;
  } else if (has_upper) {
    const double x2 = alphas[static_cast<std::size_t>(y - 1)] - eta_sev;
    g.value += log_logistic(x2);
    dx2 = logistic(-x2);
  } else {
    const double x1 = alphas[static_cast<std::size_t>(y - 2)] - eta_sev;
    g.value += log_logistic(-x1);
    dx1 = -logistic(x1);
  }
  g.d_eta_sev = -(dx1 + dx2);
  g.d_alpha_lower = dx1;
  g.d_alpha_upper = dx2;
  return g;
}

double cell_log_prob(int y, double eta_occ, double eta_sev, std::span<const double> alphas) {
  return cell_log_prob_grad(y, eta_occ, eta_sev, alphas).value;
}

ModelRanks ModelRanks::uniform(std::size_t r) {
  ModelRanks m;
  m.subject_occurrence = r;
  m.subject_severity = r;
  for (auto& b : m.blocks) b = BlockRanks{r, r, r};
  return m;
}

void ModelDims::validate() const {
  auto check = [](std::size_t rank, std::size_t dim, const std::string& what) {
    if (rank < 1) throw ConfigError(what + " rank must be at least 1");
    if (rank > dim) {
      throw ConfigError(what + " rank " + std::to_string(rank) + " exceeds dimension " +
                        std::to_string(dim));
    }
  };
  if (n_caries_categories < 2 || n_fluorosis_categories < 2) {
    throw ConfigError("each outcome needs at least two categories");
  }
  if (n_times < 1) throw ConfigError("n_times must be positive");
  if (!longitudinal && n_times != 1) throw ConfigError("cross-sectional data must have one time");
  check(ranks.subject_occurrence, n_subjects, "subject (occurrence)");
  check(ranks.subject_severity, n_subjects, "subject (severity)");
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      const auto& r = ranks.blocks[block_index(o, c)];
      const std::string name = std::string(to_string(o)) + "." + to_string(c);
      check(r.spatial, n_locations(o), name + " spatial");
      check(r.predictor, n_predictors(c), name + " predictor");
      if (longitudinal) check(r.time, n_times, name + " time");
    }
  }
}

LinkedCoefficients LinkedCoefficients::zeros(const ModelDims& dims) {
  LinkedCoefficients lc;
  const auto& r = dims.ranks;
  lc.subject_occurrence = Matrix::Zero(static_cast<Eigen::Index>(dims.n_subjects),
                                       static_cast<Eigen::Index>(r.subject_occurrence));
  lc.subject_severity = Matrix::Zero(static_cast<Eigen::Index>(dims.n_subjects),
                                     static_cast<Eigen::Index>(r.subject_severity));
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      const auto& br = r.blocks[block_index(o, c)];
      auto& b = lc.block(o, c);
      b.spatial = Matrix::Zero(static_cast<Eigen::Index>(dims.n_locations(o)),
                               static_cast<Eigen::Index>(br.spatial));
      b.predictor = Matrix::Zero(static_cast<Eigen::Index>(dims.n_predictors(c)),
                                 static_cast<Eigen::Index>(br.predictor));
      std::vector<std::size_t> core_dims{r.subject(c), br.spatial, br.predictor};
      if (dims.longitudinal) {
        b.time = Matrix::Zero(static_cast<Eigen::Index>(dims.n_times),
                              static_cast<Eigen::Index>(br.time));
        core_dims.push_back(br.time);
      } else {
        b.time.resize(0, 0);
      }
      b.core = DenseTensor(core_dims);
    }
  }
  return lc;
}

void LinkedCoefficients::validate(const ModelDims& dims) const {
  auto expect = [](const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
      throw ShapeError(what + " has shape " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  };
  const auto& r = dims.ranks;
  expect(subject_occurrence, dims.n_subjects, r.subject_occurrence, "occurrence subject factor");
  expect(subject_severity, dims.n_subjects, r.subject_severity, "severity subject factor");
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      const auto& br = r.blocks[block_index(o, c)];
      const auto& b = block(o, c);
      const std::string name = std::string(to_string(o)) + "." + to_string(c);
      expect(b.spatial, dims.n_locations(o), br.spatial, name + " spatial factor");
      expect(b.predictor, dims.n_predictors(c), br.predictor, name + " predictor factor");
      std::vector<std::size_t> core_dims{r.subject(c), br.spatial, br.predictor};
      if (dims.longitudinal) {
        expect(b.time, dims.n_times, br.time, name + " time factor");
        core_dims.push_back(br.time);
      } else if (b.time.size() != 0) {
        throw ShapeError(name + " has a time factor but the model is cross-sectional");
      }
      if (b.core.dims() != core_dims) throw ShapeError(name + " core has wrong dimensions");
    }
  }
}

TuckerFactor LinkedCoefficients::tucker(Outcome o, Component c) const {
  const auto& b = block(o, c);
  TuckerFactor f{b.core, {subject(c), b.spatial, b.predictor}};
  if (b.time.size() > 0) f.factors.push_back(b.time);
  return f;
}

CoefficientTensors assemble_coefficients(const LinkedCoefficients& lc) {
  CoefficientTensors out;
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      out.tensors[block_index(o, c)] = tucker_reconstruct(lc.tucker(o, c));
    }
  }
  return out;
}

void PairedDataset::fill_default_labels() {
  auto fill = [](std::vector<std::string>& v, std::size_t n, const std::string& prefix) {
    if (!v.empty()) return;
    for (std::size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i + 1));
  };
  fill(subject_ids, n_subjects, "s");
  fill(caries_location_ids, n_caries_locations, "c");
  fill(fluorosis_location_ids, n_fluorosis_locations, "f");
  fill(time_labels, n_times, "t");
  fill(occurrence_names, static_cast<std::size_t>(x_occurrence.cols()), "xo");
  fill(severity_names, static_cast<std::size_t>(x_severity.cols()), "xs");
}

void PairedDataset::validate() const {
  if (n_subjects == 0) throw DataError("dataset has no subjects");
  if (n_times == 0) throw DataError("dataset has no time points");
  if (!longitudinal && n_times != 1) throw DataError("cross-sectional dataset with several times");
  if (n_caries_categories < 2 || n_fluorosis_categories < 2) {
    throw DataError("category counts must be at least 2");
  }
  for (Outcome o : kOutcomes) {
    const auto& r = responses(o);
    if (r.size() != n_subjects * n_locations(o) * n_times) {
      throw DataError(std::string(to_string(o)) + " response array has wrong length");
    }
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k] == kMissing) continue;
      if (r[k] < 0 || r[k] >= n_categories(o)) {
        throw DataError(std::string(to_string(o)) + " response " + std::to_string(r[k]) +
                        " out of range at cell " + std::to_string(k));
      }
    }
  }
  for (Component c : kComponents) {
    const auto& x = design(c);
    if (static_cast<std::size_t>(x.rows()) != n_subjects * n_times) {
      throw DataError(std::string(to_string(c)) + " design has " + std::to_string(x.rows()) +
                      " rows, expected " + std::to_string(n_subjects * n_times));
    }
    if (x.cols() < 1) throw DataError(std::string(to_string(c)) + " design has no columns");
    if (!x.allFinite()) throw DataError(std::string(to_string(c)) + " design has non-finite values");
  }
}

ModelDims PairedDataset::dims(const ModelRanks& ranks) const {
  ModelDims d;
  d.n_subjects = n_subjects;
  d.n_times = n_times;
  d.longitudinal = longitudinal;
  d.n_caries_locations = n_caries_locations;
  d.n_fluorosis_locations = n_fluorosis_locations;
  d.p_occurrence = static_cast<std::size_t>(x_occurrence.cols());
  d.p_severity = static_cast<std::size_t>(x_severity.cols());
  d.n_caries_categories = n_caries_categories;
  d.n_fluorosis_categories = n_fluorosis_categories;
  d.ranks = ranks;
  return d;
}

}  // namespace tucker_hurdle
