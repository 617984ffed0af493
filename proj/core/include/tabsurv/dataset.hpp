#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabsurv/matrix.hpp"

namespace tabsurv {

enum class ColumnKind { Numeric, Categorical };

/// One raw column before preprocessing. Numeric cells live in `numeric`,
/// categorical ones in `labels`; `missing` flags apply to either.
struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> numeric;
  std::vector<std::string> labels;
  std::vector<bool> missing;
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::vector<double> times;
  std::vector<int> events;
  std::size_t n_rows = 0;

  RawTable subset(const std::vector<std::size_t>& idx) const;
};

/// Column roles for load_csv. Parsed from a small JSON schema file mapping
/// column names to {numeric, categorical, time, event}.
struct TableSchema {
  std::string time_column;
  std::string event_column;
  std::vector<std::string> numeric_columns;
  std::vector<std::string> categorical_columns;
  std::vector<std::string> missing_sentinels = {""};

  static TableSchema from_json_file(const std::string& path);
  static TableSchema from_json_text(const std::string& text);
};

/// Fitted preprocessing statistics, reusable on held-out data.
struct PreprocessingRecord {
  struct NumericStats {
    std::string name;
    double mean = 0.0;
    double std = 0.0;  // population std over observed cells; 0 marks a constant column
  };
  struct CategoricalStats {
    std::string name;
    std::vector<std::string> categories;  // sorted, fitted on observed cells
    bool has_missing = false;             // adds one extra one-hot column
  };
  struct ColumnEntry {
    ColumnKind kind;
    std::size_t index;  // into numeric_stats or categorical_stats
  };
  std::vector<ColumnEntry> layout;  // original column order
  std::vector<NumericStats> numeric_stats;
  std::vector<CategoricalStats> categorical_stats;

  std::size_t output_dim() const;
  /// Column indices (in the output feature matrix) that hold numeric features.
  std::vector<std::size_t> numeric_output_columns() const;
};

struct SurvivalDataset {
  Matrix features;
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::string> feature_names;
  PreprocessingRecord record;

  std::size_t n() const { return times.size(); }
  SurvivalDataset take(const std::vector<std::size_t>& idx) const;
};

struct SplitSpec {
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

RawTable load_csv(const std::string& path, const TableSchema& schema);

PreprocessingRecord fit_preprocessing(const RawTable& raw);
SurvivalDataset apply_preprocessing(const RawTable& raw, const PreprocessingRecord& record);
SurvivalDataset preprocess(const RawTable& raw);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

/// Stratified by the event indicator; deterministic given spec.seed.
SplitIndices stratified_split_indices(const std::vector<double>& times,
                                      const std::vector<int>& events,
                                      const SplitSpec& spec);

struct SplitResult {
  SurvivalDataset train, validation, test;
  SplitIndices indices;
};

SplitResult stratified_split(const SurvivalDataset& data, const SplitSpec& spec);

}  // namespace tabsurv
