#include "tucker_hurdle/io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Csv {
  fs::path path;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  [[noreturn]] void fail(std::size_t line, const std::string& what) const {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
  }
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    fail(1, "missing column '" + name + "'");
  }
  bool has_column(const std::string& name) const {
    for (const auto& h : header) {
      if (h == name) return true;
    }
    return false;
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Csv csv;
  csv.path = path;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (csv.header.empty()) {
      csv.header = std::move(fields);
      continue;
    }
    if (fields.size() != csv.header.size()) {
      csv.fail(n, "expected " + std::to_string(csv.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    csv.rows.push_back(CsvRow{n, std::move(fields)});
  }
  if (csv.header.empty()) throw DataError(path.string() + ": empty file");
  return csv;
}

double parse_double(const Csv& csv, const CsvRow& row, std::size_t col) {
  const std::string& s = row.fields[col];
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    csv.fail(row.line, "'" + s + "' is not a finite number");
  }
  return v;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <typename T>
std::size_t intern(std::map<std::string, std::size_t>& index, std::vector<std::string>& order,
                   const T& key) {
  auto [it, inserted] = index.emplace(key, order.size());
  if (inserted) order.push_back(key);
  return it->second;
}

struct CovariateTable {
  Matrix x;
  std::vector<std::string> names;
};

// Reads a covariate file. When `subjects`/`ages` are empty they are defined by this file;
// otherwise every id must already be known.
CovariateTable read_covariates(const fs::path& path, std::vector<std::string>& subjects,
                               std::vector<std::string>& ages, bool& longitudinal, bool define) {
  const Csv csv = read_csv(path);
  if (csv.header.empty() || csv.header[0] != "subject_id") {
    csv.fail(1, "first column must be subject_id");
  }
  const bool has_age = csv.header.size() > 1 && csv.header[1] == "age";
  if (define) {
    longitudinal = has_age;
  } else if (has_age != longitudinal) {
    csv.fail(1, "age column presence differs from the occurrence covariate file");
  }
  const std::size_t first = has_age ? 2 : 1;
  if (csv.header.size() <= first) csv.fail(1, "no covariate columns");
  CovariateTable table;
  table.names.assign(csv.header.begin() + static_cast<std::ptrdiff_t>(first), csv.header.end());

  std::map<std::string, std::size_t> subj_index, age_index;
  for (std::size_t i = 0; i < subjects.size(); ++i) subj_index[subjects[i]] = i;
  for (std::size_t t = 0; t < ages.size(); ++t) age_index[ages[t]] = t;
  if (define && !has_age) {
    ages = {"-"};
    age_index["-"] = 0;
  }

  std::map<std::pair<std::size_t, std::size_t>, const CsvRow*> cells;
  for (const auto& row : csv.rows) {
    const std::string& sid = row.fields[0];
    const std::string age = has_age ? row.fields[1] : "-";
    if (sid.empty()) csv.fail(row.line, "empty subject_id");
    std::size_t s = 0;
    std::size_t t = 0;
    if (define) {
      s = intern(subj_index, subjects, sid);
      t = intern(age_index, ages, age);
    } else {
      auto si = subj_index.find(sid);
      if (si == subj_index.end()) csv.fail(row.line, "unknown subject_id '" + sid + "'");
      auto ti = age_index.find(age);
      if (ti == age_index.end()) csv.fail(row.line, "unknown age '" + age + "'");
      s = si->second;
      t = ti->second;
    }
    if (!cells.emplace(std::pair{s, t}, &row).second) {
      csv.fail(row.line, "duplicate covariate row for subject '" + sid + "'" +
                             (has_age ? " at age " + age : ""));
    }
  }
  const std::size_t n = subjects.size();
  const std::size_t T = ages.size();
  table.x.resize(static_cast<Eigen::Index>(n * T), static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      auto it = cells.find({s, t});
      if (it == cells.end()) {
        csv.fail(csv.rows.empty() ? 1 : csv.rows.back().line,
                 "missing covariate row for subject '" + subjects[s] + "'" +
                     (has_age ? " at age " + ages[t] : ""));
      }
      for (std::size_t j = 0; j < table.names.size(); ++j) {
        table.x(static_cast<Eigen::Index>(s * T + t), static_cast<Eigen::Index>(j)) =
            parse_double(csv, *it->second, first + j);
      }
    }
  }
  return table;
}

void read_responses(const fs::path& path, PairedDataset& data, Outcome o) {
  const Csv csv = read_csv(path);
  const std::size_t sc = csv.column("subject_id");
  const std::size_t lc = csv.column("location_id");
  const std::size_t vc = csv.column("value");
  const bool has_age = csv.has_column("age");
  if (has_age != data.longitudinal) {
    csv.fail(1, has_age ? "age column in a cross-sectional dataset"
                        : "age column required for longitudinal data");
  }
  const std::size_t ac = has_age ? csv.column("age") : 0;
  std::map<std::string, std::size_t> subj, age, loc;
  for (std::size_t i = 0; i < data.subject_ids.size(); ++i) subj[data.subject_ids[i]] = i;
  for (std::size_t t = 0; t < data.time_labels.size(); ++t) age[data.time_labels[t]] = t;
  std::vector<std::string> locations;

  struct Entry {
    std::size_t s, q, t;
    int value;
  };
  std::vector<Entry> entries;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> seen;
  const int k = data.n_categories(o);
  for (const auto& row : csv.rows) {
    auto si = subj.find(row.fields[sc]);
    if (si == subj.end()) csv.fail(row.line, "unknown subject_id '" + row.fields[sc] + "'");
    std::size_t t = 0;
    if (has_age) {
      auto ti = age.find(row.fields[ac]);
      if (ti == age.end()) csv.fail(row.line, "unknown age '" + row.fields[ac] + "'");
      t = ti->second;
    }
    if (row.fields[lc].empty()) csv.fail(row.line, "empty location_id");
    const std::size_t q = intern(loc, locations, row.fields[lc]);
    auto [it, inserted] = seen.emplace(std::tuple{si->second, q, t}, row.line);
    if (!inserted) {
      csv.fail(row.line, "duplicate cell (first seen on line " + std::to_string(it->second) + ")");
    }
    const std::string& v = row.fields[vc];
    int value = kMissing;
    if (v != "NA" && !v.empty()) {
      char* end = nullptr;
      const long parsed = std::strtol(v.c_str(), &end, 10);
      if (end != v.c_str() + v.size()) csv.fail(row.line, "'" + v + "' is not an integer category");
      if (parsed < 0 || parsed >= k) {
        csv.fail(row.line, "category " + v + " outside 0.." + std::to_string(k - 1));
      }
      value = static_cast<int>(parsed);
    }
    entries.push_back(Entry{si->second, q, t, value});
  }
  if (o == Outcome::caries) {
    data.n_caries_locations = locations.size();
    data.caries_location_ids = locations;
  } else {
    data.n_fluorosis_locations = locations.size();
    data.fluorosis_location_ids = locations;
  }
  if (locations.empty()) throw DataError(path.string() + ": no response rows");
  auto& resp = data.responses(o);
  resp.assign(data.n_subjects * locations.size() * data.n_times, kMissing);
  for (const auto& e : entries) resp[data.cell(e.s, e.q, e.t, o)] = e.value;
}

void write_le_doubles(std::ostream& os, std::span<const double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double d : v) {
      auto bits = std::bit_cast<std::uint64_t>(d);
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      os.write(b, 8);
    }
  }
}

void read_le_doubles(std::istream& is, std::span<double> v) {
  std::vector<unsigned char> buf(v.size() * 8);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw DataError("draws file is truncated");
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[k * 8 + static_cast<std::size_t>(i)]) << (8 * i);
    v[k] = std::bit_cast<double>(bits);
  }
}

template <typename T>
void write_le(std::ostream& os, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T read_le(std::istream& is) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw DataError("draws file is truncated");
    value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

const std::vector<std::string> kStatColumns = {"accept_prob", "tree_depth", "n_leapfrog",
                                               "divergent",   "energy",     "step_size"};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

}  // namespace

PairedDataset load_dataset(const DatasetPaths& paths, int n_caries_categories,
                           int n_fluorosis_categories) {
  PairedDataset data;
  data.n_caries_categories = n_caries_categories;
  data.n_fluorosis_categories = n_fluorosis_categories;
  if (n_caries_categories < 2 || n_fluorosis_categories < 2) {
    throw DataError("category counts must be at least 2");
  }
  auto occ = read_covariates(paths.covariates_occurrence, data.subject_ids, data.time_labels,
                             data.longitudinal, true);
  bool longitudinal = data.longitudinal;
  auto sev = read_covariates(paths.covariates_severity, data.subject_ids, data.time_labels,
                             longitudinal, false);
  data.n_subjects = data.subject_ids.size();
  data.n_times = data.time_labels.size();
  data.x_occurrence = std::move(occ.x);
  data.occurrence_names = std::move(occ.names);
  data.x_severity = std::move(sev.x);
  data.severity_names = std::move(sev.names);
  read_responses(paths.caries, data, Outcome::caries);
  read_responses(paths.fluorosis, data, Outcome::fluorosis);
  data.validate();
  return data;
}

void save_dataset(const PairedDataset& data, const DatasetPaths& paths) {
  data.validate();
  for (Component c : kComponents) {
    auto os = open_out(c == Component::occurrence ? paths.covariates_occurrence : paths.covariates_severity);
    const auto& names = c == Component::occurrence ? data.occurrence_names : data.severity_names;
    const Matrix& x = data.design(c);
    os << "subject_id" << (data.longitudinal ? ",age" : "");
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < data.n_subjects; ++i) {
      for (std::size_t t = 0; t < data.n_times; ++t) {
        os << data.subject_ids[i];
        if (data.longitudinal) os << ',' << data.time_labels[t];
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          os << ',' << format_double(x(static_cast<Eigen::Index>(i * data.n_times + t), j));
        }
        os << '\n';
      }
    }
  }
  for (Outcome o : kOutcomes) {
    auto os = open_out(o == Outcome::caries ? paths.caries : paths.fluorosis);
    os << "subject_id,location_id" << (data.longitudinal ? ",age" : "") << ",value\n";
    const auto& resp = data.responses(o);
    // Location-major so that first appearance reproduces the location order.
    for (std::size_t q = 0; q < data.n_locations(o); ++q) {
      for (std::size_t i = 0; i < data.n_subjects; ++i) {
        for (std::size_t t = 0; t < data.n_times; ++t) {
          os << data.subject_ids[i] << ',' << data.location_ids(o)[q];
          if (data.longitudinal) os << ',' << data.time_labels[t];
          const int v = resp[data.cell(i, q, t, o)];
          os << ',' << (v == kMissing ? std::string("NA") : std::to_string(v)) << '\n';
        }
      }
    }
  }
}

AggregationMap load_aggregation_map(const fs::path& path, const PairedDataset& data) {
  const Csv csv = read_csv(path);
  const std::size_t oc = csv.column("outcome");
  const std::size_t lc = csv.column("location_id");
  const std::size_t tc = csv.column("tooth");
  const std::size_t sc = csv.column("surface");
  const std::size_t cc = csv.column("class");
  AggregationMap map;
  std::array<std::vector<bool>, 2> seen;
  for (Outcome o : kOutcomes) {
    map.outcomes[static_cast<std::size_t>(o)].resize(data.n_locations(o));
    seen[static_cast<std::size_t>(o)].assign(data.n_locations(o), false);
  }
  for (const auto& row : csv.rows) {
    Outcome o;
    if (row.fields[oc] == "caries") {
      o = Outcome::caries;
    } else if (row.fields[oc] == "fluorosis") {
      o = Outcome::fluorosis;
    } else {
      csv.fail(row.line, "outcome must be caries or fluorosis");
    }
    const auto& ids = data.location_ids(o);
    auto it = std::find(ids.begin(), ids.end(), row.fields[lc]);
    if (it == ids.end()) csv.fail(row.line, "unknown location_id '" + row.fields[lc] + "'");
    const auto q = static_cast<std::size_t>(it - ids.begin());
    const auto oi = static_cast<std::size_t>(o);
    if (seen[oi][q]) csv.fail(row.line, "location listed twice");
    seen[oi][q] = true;
    map.outcomes[oi][q] = LocationGroup{row.fields[tc], row.fields[sc], row.fields[cc]};
  }
  for (Outcome o : kOutcomes) {
    const auto oi = static_cast<std::size_t>(o);
    for (std::size_t q = 0; q < seen[oi].size(); ++q) {
      if (!seen[oi][q]) {
        throw DataError(path.string() + ": no entry for " + to_string(o) + " location '" +
                        data.location_ids(o)[q] + "'");
      }
    }
  }
  return map;
}

void save_aggregation_map(const AggregationMap& map, const PairedDataset& data, const fs::path& path) {
  auto os = open_out(path);
  os << "outcome,location_id,tooth,surface,class\n";
  for (Outcome o : kOutcomes) {
    const auto& g = map.outcomes[static_cast<std::size_t>(o)];
    for (std::size_t q = 0; q < g.size(); ++q) {
      os << to_string(o) << ',' << data.location_ids(o)[q] << ',' << g[q].tooth << ','
         << g[q].surface << ',' << g[q].tooth_class << '\n';
    }
  }
}

std::vector<int> load_indicator(const fs::path& path, const std::string& column,
                                const PairedDataset& data) {
  const Csv csv = read_csv(path);
  const std::size_t sc = csv.column("subject_id");
  if (!csv.has_column(column)) {
    throw DataError(path.string() + ": indicator column '" + column + "' not found");
  }
  const std::size_t vc = csv.column(column);
  std::vector<int> out(data.n_subjects, -1);
  for (const auto& row : csv.rows) {
    auto it = std::find(data.subject_ids.begin(), data.subject_ids.end(), row.fields[sc]);
    if (it == data.subject_ids.end()) csv.fail(row.line, "unknown subject_id '" + row.fields[sc] + "'");
    const auto i = static_cast<std::size_t>(it - data.subject_ids.begin());
    if (out[i] != -1) csv.fail(row.line, "duplicate subject");
    const std::string& v = row.fields[vc];
    if (v != "0" && v != "1") csv.fail(row.line, "indicator must be 0 or 1");
    out[i] = v == "1" ? 1 : 0;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == -1) {
      throw DataError(path.string() + ": no indicator for subject '" + data.subject_ids[i] + "'");
    }
  }
  return out;
}

void save_indicator(const std::vector<int>& indicator, const std::string& column,
                    const PairedDataset& data, const fs::path& path) {
  auto os = open_out(path);
  os << "subject_id," << column << '\n';
  for (std::size_t i = 0; i < indicator.size(); ++i) os << data.subject_ids.at(i) << ',' << indicator[i] << '\n';
}

void save_draws(const fs::path& path, const PosteriorDraws& draws, const ParamLayout& layout,
                const nlohmann::json& extra) {
  if (draws.dimension != layout.dimension()) throw ShapeError("draws do not match the layout");
  nlohmann::json header;
  header["layout"] = layout.to_json();
  header["n_chains"] = draws.n_chains;
  header["n_samples"] = draws.n_samples;
  header["dimension"] = draws.dimension;
  header["stat_columns"] = kStatColumns;
  header["byte_order"] = "little";
  header["extra"] = extra;
  const std::string text = header.dump();

  auto os = open_out(path);
  os.write(kDrawsMagic, sizeof(kDrawsMagic));
  write_le<std::uint32_t>(os, kDrawsVersion);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t rows = draws.total_draws();
  std::vector<double> column(rows);
  for (std::size_t i = 0; i < draws.dimension; ++i) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = draws.values[r * draws.dimension + i];
    write_le_doubles(os, column);
  }
  for (std::size_t s = 0; s < kStatColumns.size(); ++s) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& st = draws.stats[r];
      switch (s) {
        case 0: column[r] = st.accept_prob; break;
        case 1: column[r] = st.tree_depth; break;
        case 2: column[r] = st.n_leapfrog; break;
        case 3: column[r] = st.divergent ? 1.0 : 0.0; break;
        case 4: column[r] = st.energy; break;
        default: column[r] = st.step_size; break;
      }
    }
    write_le_doubles(os, column);
  }
  if (!os) throw DataError("failed writing " + path.string());
}

DrawsFile load_draws(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kDrawsMagic, 8) != 0) {
    throw DataError(path.string() + ": not a draws file (bad magic)");
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kDrawsVersion) {
    throw DataError(path.string() + ": unsupported draws format version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw DataError(path.string() + ": truncated header");
  DrawsFile f;
  try {
    f.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  f.layout = ParamLayout::from_json(f.header.at("layout"));
  auto& d = f.draws;
  d.n_chains = f.header.at("n_chains").get<std::size_t>();
  d.n_samples = f.header.at("n_samples").get<std::size_t>();
  d.dimension = f.header.at("dimension").get<std::size_t>();
  if (d.dimension != f.layout.dimension()) throw DataError(path.string() + ": dimension mismatch");
  const std::size_t rows = d.total_draws();
  d.values.resize(rows * d.dimension);
  d.stats.resize(rows);
  std::vector<double> column(rows);
  for (std::size_t i = 0; i < d.dimension; ++i) {
    read_le_doubles(is, column);
    for (std::size_t r = 0; r < rows; ++r) d.values[r * d.dimension + i] = column[r];
  }
  for (std::size_t s = 0; s < kStatColumns.size(); ++s) {
    read_le_doubles(is, column);
    for (std::size_t r = 0; r < rows; ++r) {
      auto& st = d.stats[r];
      switch (s) {
        case 0: st.accept_prob = column[r]; break;
        case 1: st.tree_depth = static_cast<int>(column[r]); break;
        case 2: st.n_leapfrog = static_cast<int>(column[r]); break;
        case 3: st.divergent = column[r] != 0.0; break;
        case 4: st.energy = column[r]; break;
        default: st.step_size = column[r]; break;
      }
    }
  }
  for (std::size_t i = 0; i < d.dimension; ++i) d.names.push_back(f.layout.coordinate_name(i));
  return f;
}

void write_diagnostics_csv(const fs::path& path, const std::vector<DiagnosticRow>& rows,
                           std::size_t n_divergent) {
  auto os = open_out(path);
  os << "quantity,kind,split_rhat,ess_bulk,zero_variance,divergences\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.quantity << ',' << r.kind << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.split_rhat);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.2f", r.ess_bulk);
    os << buf << ',' << (r.zero_variance ? 1 : 0) << ",\n";
  }
  os << "sampler,sampler,,,," << n_divergent << '\n';
}

std::vector<DiagnosticRow> read_diagnostics_csv(const fs::path& path, std::size_t* n_divergent) {
  const Csv csv = read_csv(path);
  std::vector<DiagnosticRow> rows;
  const std::size_t qc = csv.column("quantity");
  const std::size_t kc = csv.column("kind");
  const std::size_t rc = csv.column("split_rhat");
  const std::size_t ec = csv.column("ess_bulk");
  const std::size_t zc = csv.column("zero_variance");
  const std::size_t dc = csv.column("divergences");
  for (const auto& row : csv.rows) {
    if (row.fields[kc] == "sampler") {
      if (n_divergent) *n_divergent = static_cast<std::size_t>(parse_double(csv, row, dc));
      continue;
    }
    rows.push_back(DiagnosticRow{row.fields[qc], row.fields[kc], parse_double(csv, row, rc),
                                 parse_double(csv, row, ec), row.fields[zc] == "1"});
  }
  return rows;
}

void write_summary_tables(const fs::path& dir, const std::string& prefix,
                          const std::vector<SummaryTable>& tables) {
  for (const auto& t : tables) {
    auto csv = open_out(dir / (prefix + t.level + ".csv"));
    t.write_csv(csv);
    auto txt = open_out(dir / (prefix + t.level + ".txt"));
    t.write_text(txt);
  }
}

}  // namespace tucker_hurdle
