#include "tucker_hurdle/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

// Quantile function of an equal-weight empirical distribution (left-continuous inverse cdf).
double empirical_inverse_cdf(std::span<const double> sorted, double u) {
  const auto m = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(u * m));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

template <typename T>
std::size_t index_of(std::vector<T>& v, const T& x) {
  auto it = std::find(v.begin(), v.end(), x);
  if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
  v.push_back(x);
  return v.size() - 1;
}

}  // namespace

std::vector<Eigen::Index> non_intercept_columns(const Matrix& design) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (!(design.col(j).array() == 1.0).all()) cols.push_back(j);
  }
  return cols;
}

std::vector<double> ProjectedDraws::coordinate(std::size_t k) const {
  std::vector<double> out(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d) out[d] = at(d, k);
  return out;
}

Matrix projection_matrix(const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index width = x.cols() + 1;
  Matrix x1(n, width);
  x1.col(0).setOnes();
  x1.rightCols(x.cols()) = x;
  if (!x1.allFinite()) throw ContractError("design matrix has non-finite entries");
  Eigen::ColPivHouseholderQR<Matrix> qr(x1);
  if (qr.rank() < width) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < width; ++k) {
      if (!cols.empty()) cols += ", ";
      const auto c = perm[k];
      cols += c == 0 ? std::string("intercept") : "column " + std::to_string(c);
    }
    throw RankError("augmented design (" + std::to_string(n) + " rows, " + std::to_string(width) +
                    " columns) is rank deficient; dependent: " + cols);
  }
  return qr.solve(Matrix::Identity(n, n));
}

ProjectedDraws project_draws(const Matrix& linpred_draws, const Matrix& projection) {
  if (linpred_draws.cols() != projection.cols()) {
    throw ShapeError("linear predictor draws have " + std::to_string(linpred_draws.cols()) +
                     " subjects, projection expects " + std::to_string(projection.cols()));
  }
  const Matrix b = linpred_draws * projection.transpose();  // draws x (p+1)
  ProjectedDraws out;
  out.n_draws = static_cast<std::size_t>(b.rows());
  out.width = static_cast<std::size_t>(b.cols());
  out.values.resize(out.n_draws * out.width);
  for (std::size_t d = 0; d < out.n_draws; ++d) {
    for (std::size_t k = 0; k < out.width; ++k) {
      out.values[d * out.width + k] = b(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

std::vector<ProjectedDraws> average_within_tooth(std::span<const ProjectedDraws> projected,
                                                 std::span<const std::size_t> tooth_of_location,
                                                 std::size_t n_teeth) {
  if (projected.size() != tooth_of_location.size()) {
    throw ShapeError("grouping must map every location");
  }
  std::vector<std::size_t> counts(n_teeth, 0);
  for (std::size_t t : tooth_of_location) {
    if (t >= n_teeth) throw ContractError("tooth index out of range");
    ++counts[t];
  }
  for (std::size_t t = 0; t < n_teeth; ++t) {
    if (counts[t] == 0) throw ContractError("tooth " + std::to_string(t) + " has no locations");
  }
  const std::size_t draws = projected.front().n_draws;
  const std::size_t width = projected.front().width;
  std::vector<ProjectedDraws> out(n_teeth, ProjectedDraws{draws, width, std::vector<double>(draws * width, 0.0)});
  for (std::size_t q = 0; q < projected.size(); ++q) {
    if (projected[q].n_draws != draws || projected[q].width != width) {
      throw ShapeError("projected draws have inconsistent shapes");
    }
    auto& dst = out[tooth_of_location[q]].values;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += projected[q].values[k];
  }
  for (std::size_t t = 0; t < n_teeth; ++t) {
    for (double& v : out[t].values) v /= static_cast<double>(counts[t]);
  }
  return out;
}

std::vector<double> wasserstein_barycenter_1d(std::span<const std::vector<double>> samples,
                                              std::size_t m_out) {
  if (samples.empty()) throw ContractError("barycenter needs at least one input distribution");
  if (m_out == 0) throw ContractError("barycenter output size must be positive");
  std::vector<double> out(m_out, 0.0);
  // Running mean of the quantile functions; identical inputs come back unchanged.
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    if (s.empty()) throw ContractError("barycenter input sample set is empty");
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < m_out; ++k) {
      const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(m_out);
      out[k] += (empirical_inverse_cdf(sorted, u) - out[k]) / static_cast<double>(j + 1);
    }
  }
  return out;
}

ProjectedDraws barycenter(std::span<const ProjectedDraws> inputs, std::size_t m_out) {
  if (inputs.empty()) throw ContractError("barycenter needs at least one input");
  const std::size_t width = inputs.front().width;
  ProjectedDraws out{m_out, width, std::vector<double>(m_out * width)};
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<std::vector<double>> sets;
    for (const auto& in : inputs) {
      if (in.width != width) throw ShapeError("barycenter inputs have different widths");
      sets.push_back(in.coordinate(k));
    }
    const auto bary = wasserstein_barycenter_1d(sets, m_out);
    for (std::size_t d = 0; d < m_out; ++d) out.values[d * width + k] = bary[d];
  }
  return out;
}

double empirical_quantile(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw ContractError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval credible_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2) throw ContractError("credible interval needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw ContractError("credible level must lie in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - level) / 2.0;
  return Interval{empirical_quantile(sorted, tail), empirical_quantile(sorted, 1.0 - tail)};
}

void SummaryTable::write_csv(std::ostream& os) const {
  os << "outcome,component,unit,age";
  for (const auto& p : predictors) os << ',' << p << "_lower," << p << "_upper," << p << "_excludes_zero";
  os << '\n';
  for (const auto& r : rows) {
    os << r.outcome << ',' << r.component << ',' << r.unit << ',' << r.age;
    for (const auto& iv : r.intervals) {
      if (iv) {
        os << ',' << format_number(iv->lower) << ',' << format_number(iv->upper) << ','
           << (iv->excludes_zero() ? 1 : 0);
      } else {
        os << ",,,";
      }
    }
    os << '\n';
  }
}

void SummaryTable::write_text(std::ostream& os) const {
  std::size_t unit_w = 4;
  std::size_t age_w = 3;
  for (const auto& r : rows) {
    unit_w = std::max(unit_w, r.unit.size());
    age_w = std::max(age_w, r.age.size());
  }
  auto cell = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  constexpr std::size_t kIntervalWidth = 24;
  os << cell("outcome", 10) << ' ' << cell("component", 10) << ' ' << cell("unit", unit_w) << ' '
     << cell("age", age_w);
  for (const auto& p : predictors) os << ' ' << cell(p, kIntervalWidth);
  os << '\n';
  for (const auto& r : rows) {
    os << cell(r.outcome, 10) << ' ' << cell(r.component, 10) << ' ' << cell(r.unit, unit_w) << ' '
       << cell(r.age, age_w);
    for (const auto& iv : r.intervals) {
      std::string s = "-";
      if (iv) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "[%.3f, %.3f]%s", iv->lower, iv->upper,
                      iv->excludes_zero() ? "*" : "");
        s = buf;
      }
      os << ' ' << cell(s, kIntervalWidth);
    }
    os << '\n';
  }
}

AggregationMap AggregationMap::identity(const PairedDataset& data) {
  AggregationMap m;
  for (Outcome o : kOutcomes) {
    for (const auto& id : data.location_ids(o)) {
      m.outcomes[static_cast<std::size_t>(o)].push_back(LocationGroup{id, id, "all"});
    }
  }
  return m;
}

void AggregationMap::validate(const PairedDataset& data) const {
  for (Outcome o : kOutcomes) {
    const auto& groups = outcomes[static_cast<std::size_t>(o)];
    if (groups.size() != data.n_locations(o)) {
      throw ConfigError(std::string("aggregation map does not cover every ") + to_string(o) +
                        " location");
    }
    // A tooth must belong to exactly one class.
    std::map<std::string, std::string> tooth_class;
    for (const auto& g : groups) {
      auto [it, inserted] = tooth_class.emplace(g.tooth, g.tooth_class);
      if (!inserted && it->second != g.tooth_class) {
        throw ConfigError("tooth '" + g.tooth + "' is assigned to two classes");
      }
    }
  }
}

std::array<std::vector<double>, 4> draw_linear_predictors(const ParamLayout& layout,
                                                          std::span<const double> draw,
                                                          const PairedDataset& data) {
  const auto p = layout.unpack(draw);
  std::array<std::vector<double>, 4> out;
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      out[block_index(o, c)] =
          linear_predictor(p.coefficients, o, c, data.design(c), data.n_times);
    }
  }
  return out;
}

std::vector<SummaryTable> summarize(const PosteriorDraws& draws, const ParamLayout& layout,
                                    const PairedDataset& data, const SummaryOptions& options,
                                    std::span<const std::size_t> subjects) {
  std::vector<std::size_t> members(subjects.begin(), subjects.end());
  if (members.empty()) {
    for (std::size_t i = 0; i < data.n_subjects; ++i) members.push_back(i);
  }
  for (std::size_t i : members) {
    if (i >= data.n_subjects) throw ContractError("subject index out of range");
  }
  if (draws.dimension != layout.dimension()) throw ShapeError("draws do not match the layout");
  if (draws.total_draws() < 2) throw ContractError("summaries need at least two draws");
  options.map.validate(data);
  const std::size_t m = members.size();
  const std::size_t n_times = data.n_times;
  const std::size_t n_draws = draws.total_draws();

  // Projection matrices per (component, time) and predictor names.
  std::array<std::vector<Matrix>, 2> proj;
  std::array<std::vector<std::string>, 2> names;
  std::vector<std::string> table_predictors;
  for (Component c : kComponents) {
    const auto ci = static_cast<std::size_t>(c);
    const Matrix& design = data.design(c);
    const auto cols = non_intercept_columns(design);
    const auto& labels = c == Component::occurrence ? data.occurrence_names : data.severity_names;
    names[ci].push_back("(Intercept)");
    for (auto j : cols) names[ci].push_back(labels.at(static_cast<std::size_t>(j)));
    for (const auto& nm : names[ci]) index_of(table_predictors, nm);
    for (std::size_t t = 0; t < n_times; ++t) {
      Matrix x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
          x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
              design(static_cast<Eigen::Index>(members[r] * n_times + t), cols[k]);
        }
      }
      proj[ci].push_back(projection_matrix(x));
    }
  }

  // projected[block][q * T + t]
  std::array<std::vector<ProjectedDraws>, 4> projected;
  for (Outcome o : kOutcomes) {
    for (Component c : kComponents) {
      const std::size_t width = names[static_cast<std::size_t>(c)].size();
      projected[block_index(o, c)].assign(
          data.n_locations(o) * n_times,
          ProjectedDraws{n_draws, width, std::vector<double>(n_draws * width)});
    }
  }
  const std::size_t batch = std::max<std::size_t>(1, options.batch);
  for (std::size_t start = 0; start < n_draws; start += batch) {
    const std::size_t len = std::min(batch, n_draws - start);
    std::array<std::vector<Matrix>, 4> lin;
    for (Outcome o : kOutcomes) {
      for (Component c : kComponents) {
        lin[block_index(o, c)].assign(data.n_locations(o) * n_times,
                                      Matrix(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(m)));
      }
    }
    for (std::size_t d = 0; d < len; ++d) {
      const std::size_t g = start + d;
      const auto lp = draw_linear_predictors(layout, draws.draw(g / draws.n_samples, g % draws.n_samples), data);
      for (Outcome o : kOutcomes) {
        const std::size_t nq = data.n_locations(o);
        for (Component c : kComponents) {
          const std::size_t b = block_index(o, c);
          for (std::size_t q = 0; q < nq; ++q) {
            for (std::size_t t = 0; t < n_times; ++t) {
              auto& mat = lin[b][q * n_times + t];
              for (std::size_t r = 0; r < m; ++r) {
                mat(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r)) =
                    lp[b][(members[r] * nq + q) * n_times + t];
              }
            }
          }
        }
      }
    }
    for (Outcome o : kOutcomes) {
      for (Component c : kComponents) {
        const std::size_t b = block_index(o, c);
        for (std::size_t qt = 0; qt < lin[b].size(); ++qt) {
          const auto chunk = project_draws(lin[b][qt], proj[static_cast<std::size_t>(c)][qt % n_times]);
          std::copy(chunk.values.begin(), chunk.values.end(),
                    projected[b][qt].values.begin() +
                        static_cast<std::ptrdiff_t>(start * chunk.width));
        }
      }
    }
  }

  std::vector<SummaryTable> tables(4);
  const char* levels[] = {"location", "tooth", "surface", "class"};
  for (std::size_t l = 0; l < 4; ++l) {
    tables[l].level = levels[l];
    tables[l].predictors = table_predictors;
  }

  for (Outcome o : kOutcomes) {
    const auto oi = static_cast<std::size_t>(o);
    const std::size_t nq = data.n_locations(o);
    const auto& groups = options.map.outcomes[oi];
    const auto& resp = data.responses(o);

    // present[q][t]: at least one observed response among the members.
    std::vector<std::vector<bool>> present(nq, std::vector<bool>(n_times, false));
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t t = 0; t < n_times; ++t) {
        for (std::size_t i : members) {
          if (resp[data.cell(i, q, t, o)] != kMissing) {
            present[q][t] = true;
            break;
          }
        }
      }
    }
    std::vector<std::string> teeth, surfaces, classes;
    for (const auto& g : groups) {
      index_of(teeth, g.tooth);
      index_of(surfaces, g.surface);
      index_of(classes, g.tooth_class);
    }

    for (Component c : kComponents) {
      const std::size_t b = block_index(o, c);
      const auto& pnames = names[static_cast<std::size_t>(c)];
      auto make_row = [&](const std::string& unit, std::size_t t, const ProjectedDraws& pd) {
        SummaryRow row{to_string(o), to_string(c), unit, data.time_labels.at(t), {}};
        row.intervals.assign(table_predictors.size(), std::nullopt);
        for (std::size_t k = 0; k < pd.width; ++k) {
          const auto col = static_cast<std::size_t>(
              std::find(table_predictors.begin(), table_predictors.end(), pnames[k]) -
              table_predictors.begin());
          row.intervals[col] = credible_interval(pd.coordinate(k), options.level);
        }
        return row;
      };

      // Tooth averages per time over present locations.
      std::vector<std::vector<std::optional<ProjectedDraws>>> tooth_draws(
          n_times, std::vector<std::optional<ProjectedDraws>>(teeth.size()));
      for (std::size_t t = 0; t < n_times; ++t) {
        for (std::size_t k = 0; k < teeth.size(); ++k) {
          std::vector<ProjectedDraws> locs;
          for (std::size_t q = 0; q < nq; ++q) {
            if (groups[q].tooth == teeth[k] && present[q][t]) locs.push_back(projected[b][q * n_times + t]);
          }
          if (locs.empty()) continue;
          std::vector<std::size_t> to(locs.size(), 0);
          tooth_draws[t][k] = std::move(average_within_tooth(locs, to, 1).front());
        }
      }

      for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t t = 0; t < n_times; ++t) {
          if (present[q][t]) {
            tables[0].rows.push_back(make_row(data.location_ids(o)[q], t, projected[b][q * n_times + t]));
          }
        }
      }
      for (std::size_t k = 0; k < teeth.size(); ++k) {
        for (std::size_t t = 0; t < n_times; ++t) {
          if (tooth_draws[t][k]) tables[1].rows.push_back(make_row(teeth[k], t, *tooth_draws[t][k]));
        }
      }
      for (const auto& s : surfaces) {
        for (std::size_t t = 0; t < n_times; ++t) {
          std::vector<ProjectedDraws> inputs;
          for (std::size_t q = 0; q < nq; ++q) {
            if (groups[q].surface == s && present[q][t]) inputs.push_back(projected[b][q * n_times + t]);
          }
          if (!inputs.empty()) tables[2].rows.push_back(make_row(s, t, barycenter(inputs, n_draws)));
        }
      }
      for (const auto& cls : classes) {
        for (std::size_t t = 0; t < n_times; ++t) {
          std::vector<ProjectedDraws> inputs;
          for (std::size_t k = 0; k < teeth.size(); ++k) {
            const auto it = std::find_if(groups.begin(), groups.end(),
                                         [&](const LocationGroup& g) { return g.tooth == teeth[k]; });
            if (it->tooth_class == cls && tooth_draws[t][k]) inputs.push_back(*tooth_draws[t][k]);
          }
          if (!inputs.empty()) tables[3].rows.push_back(make_row(cls, t, barycenter(inputs, n_draws)));
        }
      }
    }
  }
  return tables;
}

std::array<std::vector<SummaryTable>, 2> stratified_summary(const PosteriorDraws& draws,
                                                            const ParamLayout& layout,
                                                            const PairedDataset& data,
                                                            std::span<const int> indicator,
                                                            const SummaryOptions& options) {
  if (indicator.size() != data.n_subjects) {
    throw ContractError("stratification indicator must cover every subject");
  }
  std::array<std::vector<std::size_t>, 2> strata;
  for (std::size_t i = 0; i < indicator.size(); ++i) {
    if (indicator[i] != 0 && indicator[i] != 1) throw ContractError("indicator values must be 0 or 1");
    strata[static_cast<std::size_t>(indicator[i])].push_back(i);
  }
  for (std::size_t s = 0; s < 2; ++s) {
    if (strata[s].empty()) throw ContractError("stratum " + std::to_string(s) + " has no subjects");
  }
  return {summarize(draws, layout, data, options, strata[0]),
          summarize(draws, layout, data, options, strata[1])};
}

}  // namespace tucker_hurdle
