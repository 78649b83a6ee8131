#include <cmath>
#include <string>

#include "tucker_hurdle/errors.hpp"
#include "tucker_hurdle/model.hpp"

namespace tucker_hurdle {

namespace {

// Fused contraction for one coefficient block:
//   eta[i,q,t] = sum_r G[r1,r2,r3,r4] S[i,r1] A2[q,r2] W[(i,t),r3] A4[t,r4],  W = X A3.
// Cross-sectional blocks run with R4 = 1 and a unit time factor.
class BlockKernel {
 public:
  BlockKernel(const Matrix& subject, const FactorBlock& block, const Matrix& design,
              std::size_t n_times)
      : subject_(subject), block_(block), design_(design), n_times_(n_times) {
    n_ = static_cast<std::size_t>(subject.rows());
    r1_ = static_cast<std::size_t>(subject.cols());
    q_ = static_cast<std::size_t>(block.spatial.rows());
    r2_ = static_cast<std::size_t>(block.spatial.cols());
    r3_ = static_cast<std::size_t>(block.predictor.cols());
    longitudinal_ = block.time.size() > 0;
    r4_ = longitudinal_ ? static_cast<std::size_t>(block.time.cols()) : 1;
    if (static_cast<std::size_t>(design.rows()) != n_ * n_times_ ||
        design.cols() != block.predictor.rows()) {
      throw ShapeError("design matrix " + std::to_string(design.rows()) + "x" +
                       std::to_string(design.cols()) + " does not match coefficient block");
    }
    if (longitudinal_ && static_cast<std::size_t>(block.time.rows()) != n_times_) {
      throw ShapeError("time factor rows do not match number of times");
    }
    if (block.core.size() != r1_ * r2_ * r3_ * r4_) {
      throw ShapeError("core size does not match factor ranks");
    }
  }

  std::size_t cells() const { return n_ * q_ * n_times_; }

  void forward(std::vector<double>& eta) {
    w_ = design_ * block_.predictor;  // (n*T) x R3
    u_.assign(n_ * n_times_ * r2_, 0.0);
    c_.assign(r1_ * r3_ * r4_, 0.0);
    eta.assign(cells(), 0.0);
    const auto core = block_.core.data();
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t t = 0; t < n_times_; ++t) {
        const std::size_t it = i * n_times_ + t;
        fill_c(i, t);
        double* u = &u_[it * r2_];
        for (std::size_t a = 0; a < r1_; ++a) {
          for (std::size_t b = 0; b < r2_; ++b) {
            const double* g = &core[((a * r2_ + b) * r3_) * r4_];
            const double* c = &c_[a * r3_ * r4_];
            double s = 0.0;
            for (std::size_t k = 0; k < r3_ * r4_; ++k) s += g[k] * c[k];
            u[b] += s;
          }
        }
        for (std::size_t q = 0; q < q_; ++q) {
          double s = 0.0;
          for (std::size_t b = 0; b < r2_; ++b) s += at(block_.spatial, q, b) * u[b];
          eta[(i * q_ + q) * n_times_ + t] = s;
        }
      }
    }
  }

  // Requires a prior forward(). Accumulates into grad_block and grad_subject.
  void backward(const std::vector<double>& d_eta, FactorBlock& grad_block, Matrix& grad_subject) {
    const auto core = block_.core.data();
    auto d_core = grad_block.core.data();
    Matrix d_w = Matrix::Zero(w_.rows(), w_.cols());
    std::vector<double> du(r2_);
    std::vector<double> dc(r1_ * r3_ * r4_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t t = 0; t < n_times_; ++t) {
        const std::size_t it = i * n_times_ + t;
        const double* u = &u_[it * r2_];
        std::fill(du.begin(), du.end(), 0.0);
        bool any = false;
        for (std::size_t q = 0; q < q_; ++q) {
          const double e = d_eta[(i * q_ + q) * n_times_ + t];
          if (e == 0.0) continue;
          any = true;
          for (std::size_t b = 0; b < r2_; ++b) {
            du[b] += e * at(block_.spatial, q, b);
            grad_block.spatial(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(b)) +=
                e * u[b];
          }
        }
        if (!any) continue;
        fill_c(i, t);
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t a = 0; a < r1_; ++a) {
          for (std::size_t b = 0; b < r2_; ++b) {
            const std::size_t base = ((a * r2_ + b) * r3_) * r4_;
            const double* c = &c_[a * r3_ * r4_];
            double* dca = &dc[a * r3_ * r4_];
            for (std::size_t k = 0; k < r3_ * r4_; ++k) {
              d_core[base + k] += du[b] * c[k];
              dca[k] += core[base + k] * du[b];
            }
          }
        }
        for (std::size_t a = 0; a < r1_; ++a) {
          const double s = at(subject_, i, a);
          double ds = 0.0;
          for (std::size_t k3 = 0; k3 < r3_; ++k3) {
            const double w = w_(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(k3));
            for (std::size_t k4 = 0; k4 < r4_; ++k4) {
              const double g = dc[(a * r3_ + k3) * r4_ + k4];
              const double tf = time_value(t, k4);
              ds += g * w * tf;
              d_w(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(k3)) += g * s * tf;
              if (longitudinal_) {
                grad_block.time(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k4)) +=
                    g * s * w;
              }
            }
          }
          grad_subject(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) += ds;
        }
      }
    }
    grad_block.predictor.noalias() += design_.transpose() * d_w;
  }

 private:
  static double at(const Matrix& m, std::size_t r, std::size_t c) {
    return m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  double time_value(std::size_t t, std::size_t k) const {
    return longitudinal_ ? at(block_.time, t, k) : 1.0;
  }
  void fill_c(std::size_t i, std::size_t t) {
    const std::size_t it = i * n_times_ + t;
    for (std::size_t a = 0; a < r1_; ++a) {
      const double s = at(subject_, i, a);
      for (std::size_t k3 = 0; k3 < r3_; ++k3) {
        const double sw = s * w_(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(k3));
        for (std::size_t k4 = 0; k4 < r4_; ++k4) {
          c_[(a * r3_ + k3) * r4_ + k4] = sw * time_value(t, k4);
        }
      }
    }
  }

  const Matrix& subject_;
  const FactorBlock& block_;
  const Matrix& design_;
  std::size_t n_times_;
  std::size_t n_ = 0, q_ = 0, r1_ = 0, r2_ = 0, r3_ = 0, r4_ = 1;
  bool longitudinal_ = false;
  Matrix w_;
  std::vector<double> u_;
  std::vector<double> c_;
};

void check_data_shapes(const PairedDataset& data, const LinkedCoefficients& lc,
                       const CutpointRaw& raw_caries, const CutpointRaw& raw_fluorosis) {
  if (raw_caries.values.size() != static_cast<std::size_t>(data.n_caries_categories - 1) ||
      raw_fluorosis.values.size() != static_cast<std::size_t>(data.n_fluorosis_categories - 1)) {
    throw ShapeError("cutpoint raw length must equal category count minus one");
  }
  if (static_cast<std::size_t>(lc.subject_occurrence.rows()) != data.n_subjects ||
      static_cast<std::size_t>(lc.subject_severity.rows()) != data.n_subjects) {
    throw ShapeError("subject factor rows do not match dataset subjects");
  }
  if (lc.longitudinal() != data.longitudinal) {
    throw ShapeError("coefficients and dataset disagree on longitudinal mode");
  }
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      if (static_cast<std::size_t>(lc.block(o, c).spatial.rows()) != data.n_locations(o)) {
        throw ShapeError(std::string(to_string(o)) + " spatial factor rows do not match locations");
      }
    }
  }
}

}  // namespace

std::vector<double> linear_predictor(const LinkedCoefficients& lc, Outcome o, Component c,
                                     const Matrix& design, std::size_t n_times) {
  BlockKernel k(lc.subject(c), lc.block(o, c), design, n_times);
  std::vector<double> eta;
  k.forward(eta);
  return eta;
}

double log_likelihood(const PairedDataset& data, const LinkedCoefficients& lc,
                      const CutpointRaw& raw_caries, const CutpointRaw& raw_fluorosis) {
  check_data_shapes(data, lc, raw_caries, raw_fluorosis);
  double total = 0.0;
  for (Outcome o : kOutcomes) {
    const auto& resp = data.responses(o);
    const auto alphas = cutpoints(o == Outcome::caries ? raw_caries.values : raw_fluorosis.values);
    const auto eta_occ =
        linear_predictor(lc, o, Component::occurrence, data.x_occurrence, data.n_times);
    const auto eta_sev =
        linear_predictor(lc, o, Component::severity, data.x_severity, data.n_times);
    for (std::size_t k = 0; k < resp.size(); ++k) {
      if (resp[k] == kMissing) continue;
      total += cell_log_prob(resp[k], eta_occ[k], eta_sev[k], alphas);
    }
  }
  return total;
}

LikelihoodGradient log_likelihood_gradient(const PairedDataset& data,
                                           const LinkedCoefficients& lc,
                                           const CutpointRaw& raw_caries,
                                           const CutpointRaw& raw_fluorosis) {
  check_data_shapes(data, lc, raw_caries, raw_fluorosis);
  LikelihoodGradient out;
  out.coefficients = lc;
  out.coefficients.subject_occurrence.setZero();
  out.coefficients.subject_severity.setZero();
  for (auto& b : out.coefficients.blocks) {
    b.spatial.setZero();
    b.predictor.setZero();
    b.time.setZero();
    std::fill(b.core.data().begin(), b.core.data().end(), 0.0);
  }

  for (Outcome o : kOutcomes) {
    const auto& raw = o == Outcome::caries ? raw_caries.values : raw_fluorosis.values;
    const auto alphas = cutpoints(raw);
    const auto& resp = data.responses(o);

    BlockKernel occ(lc.subject_occurrence, lc.block(o, Component::occurrence), data.x_occurrence,
                    data.n_times);
    BlockKernel sev(lc.subject_severity, lc.block(o, Component::severity), data.x_severity,
                    data.n_times);
    std::vector<double> eta_occ;
    std::vector<double> eta_sev;
    occ.forward(eta_occ);
    sev.forward(eta_sev);

    std::vector<double> d_occ(resp.size(), 0.0);
    std::vector<double> d_sev(resp.size(), 0.0);
    std::vector<double> d_alpha(alphas.size(), 0.0);
    for (std::size_t k = 0; k < resp.size(); ++k) {
      const int y = resp[k];
      if (y == kMissing) continue;
      const auto g = cell_log_prob_grad(y, eta_occ[k], eta_sev[k], alphas);
      out.value += g.value;
      d_occ[k] = g.d_eta_occ;
      d_sev[k] = g.d_eta_sev;
      if (y >= 2) d_alpha[static_cast<std::size_t>(y - 2)] += g.d_alpha_lower;
      if (y >= 1 && static_cast<std::size_t>(y) <= alphas.size()) {
        d_alpha[static_cast<std::size_t>(y - 1)] += g.d_alpha_upper;
      }
    }
    occ.backward(d_occ, out.coefficients.block(o, Component::occurrence),
                 out.coefficients.subject_occurrence);
    sev.backward(d_sev, out.coefficients.block(o, Component::severity),
                 out.coefficients.subject_severity);

    // alpha_u = sum_{j=1..u} exp(raw_j) - raw_0
    std::vector<double> d_raw(raw.size(), 0.0);
    double tail = 0.0;
    for (std::size_t u = alphas.size(); u-- > 0;) {
      tail += d_alpha[u];
      d_raw[u + 1] = std::exp(raw[u + 1]) * tail;
    }
    d_raw[0] = -tail;
    (o == Outcome::caries ? out.raw_caries : out.raw_fluorosis) = std::move(d_raw);
  }
  return out;
}

}  // namespace tucker_hurdle
