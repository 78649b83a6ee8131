#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "tucker_hurdle/diagnostics.hpp"
#include "tucker_hurdle/inference.hpp"
#include "tucker_hurdle/model.hpp"
#include "tucker_hurdle/posterior.hpp"
#include "tucker_hurdle/sampler.hpp"

namespace tucker_hurdle {

namespace fs = std::filesystem;

/// Long-format response files and wide covariate files.
///   responses:  subject_id,location_id[,age],value   (value NA = missing)
///   covariates: subject_id[,age],x1,...,xp
struct DatasetPaths {
  fs::path caries;
  fs::path fluorosis;
  fs::path covariates_occurrence;
  fs::path covariates_severity;
};

/// Pivots the long-format files to dense masked arrays. Subjects and ages follow the order of
/// the occurrence covariate file; locations follow first appearance in each response file.
/// Throws DataError naming file and line on unknown ids, duplicates, bad categories or ragged rows.
PairedDataset load_dataset(const DatasetPaths& paths, int n_caries_categories,
                           int n_fluorosis_categories);
/// Writes every cell (missing cells as NA) so that load_dataset reproduces `data` exactly.
void save_dataset(const PairedDataset& data, const DatasetPaths& paths);

/// CSV: outcome,location_id,tooth,surface,class
AggregationMap load_aggregation_map(const fs::path& path, const PairedDataset& data);
void save_aggregation_map(const AggregationMap& map, const PairedDataset& data, const fs::path& path);

/// CSV with a subject_id column and a 0/1 indicator column named `column`.
std::vector<int> load_indicator(const fs::path& path, const std::string& column,
                                const PairedDataset& data);
void save_indicator(const std::vector<int>& indicator, const std::string& column,
                    const PairedDataset& data, const fs::path& path);

inline constexpr char kDrawsMagic[8] = {'T', 'H', 'D', 'R', 'A', 'W', 'S', '\0'};
inline constexpr std::uint32_t kDrawsVersion = 1;

struct DrawsFile {
  PosteriorDraws draws;
  ParamLayout layout;
  nlohmann::json header;
};

/// Binary columnar draws: magic, u32 version, u64 header length, JSON header, then one
/// column of little-endian f64 per parameter and per sampler statistic (chain-major rows).
void save_draws(const fs::path& path, const PosteriorDraws& draws, const ParamLayout& layout,
                const nlohmann::json& extra = nlohmann::json::object());
DrawsFile load_draws(const fs::path& path);

struct DiagnosticRow {
  std::string quantity;
  std::string kind;  // parameter or identified
  double split_rhat = 0.0;
  double ess_bulk = 0.0;
  bool zero_variance = false;
};

void write_diagnostics_csv(const fs::path& path, const std::vector<DiagnosticRow>& rows,
                           std::size_t n_divergent);
/// Parses a file written by write_diagnostics_csv.
std::vector<DiagnosticRow> read_diagnostics_csv(const fs::path& path, std::size_t* n_divergent = nullptr);

void write_summary_tables(const fs::path& dir, const std::string& prefix,
                          const std::vector<SummaryTable>& tables);

}  // namespace tucker_hurdle
