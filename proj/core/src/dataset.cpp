#include "tabsurv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tabsurv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool in_quotes = false;
  for (char c : line) {
    if (c == '"') {
      in_quotes = !in_quotes;
    } else if (c == ',' && !in_quotes) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) return false;
    *out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

RawTable RawTable::subset(const std::vector<std::size_t>& idx) const {
  RawTable out;
  out.n_rows = idx.size();
  out.times.reserve(idx.size());
  out.events.reserve(idx.size());
  for (std::size_t i : idx) {
    out.times.push_back(times[i]);
    out.events.push_back(events[i]);
  }
  for (const RawColumn& col : columns) {
    RawColumn c;
    c.name = col.name;
    c.kind = col.kind;
    for (std::size_t i : idx) {
      c.missing.push_back(col.missing[i]);
      if (col.kind == ColumnKind::Numeric)
        c.numeric.push_back(col.numeric[i]);
      else
        c.labels.push_back(col.labels[i]);
    }
    out.columns.push_back(std::move(c));
  }
  return out;
}

TableSchema TableSchema::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: invalid JSON: ") + e.what());
  }
  TableSchema s;
  if (!j.contains("time") || !j.contains("event"))
    throw ValidationError("schema: 'time' and 'event' column names are required");
  s.time_column = j.at("time").get<std::string>();
  s.event_column = j.at("event").get<std::string>();
  if (j.contains("numeric")) s.numeric_columns = j.at("numeric").get<std::vector<std::string>>();
  if (j.contains("categorical"))
    s.categorical_columns = j.at("categorical").get<std::vector<std::string>>();
  if (j.contains("missing")) s.missing_sentinels = j.at("missing").get<std::vector<std::string>>();
  if (std::find(s.missing_sentinels.begin(), s.missing_sentinels.end(), "") ==
      s.missing_sentinels.end())
    s.missing_sentinels.push_back("");
  return s;
}

TableSchema TableSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("schema: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

RawTable load_csv(const std::string& path, const TableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("load_csv: empty file " + path);
  std::vector<std::string> header = split_csv_line(line);

  auto col_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("load_csv: column '" + name + "' not found in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  std::size_t time_col = col_of(schema.time_column);
  std::size_t event_col = col_of(schema.event_column);

  RawTable table;
  struct Sel {
    std::size_t csv_col;
    std::size_t out_col;
  };
  std::vector<Sel> selected;
  for (const std::string& name : schema.numeric_columns) {
    RawColumn c;
    c.name = name;
    c.kind = ColumnKind::Numeric;
    selected.push_back({col_of(name), table.columns.size()});
    table.columns.push_back(std::move(c));
  }
  for (const std::string& name : schema.categorical_columns) {
    RawColumn c;
    c.name = name;
    c.kind = ColumnKind::Categorical;
    selected.push_back({col_of(name), table.columns.size()});
    table.columns.push_back(std::move(c));
  }

  auto is_missing = [&](const std::string& cell) {
    return std::find(schema.missing_sentinels.begin(), schema.missing_sentinels.end(), cell) !=
           schema.missing_sentinels.end();
  };

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("load_csv: row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));

    const std::string& tcell = cells[time_col];
    const std::string& ecell = cells[event_col];
    if (is_missing(tcell))
      throw ValidationError("load_csv: row " + std::to_string(row) + ": missing time value");
    if (is_missing(ecell))
      throw ValidationError("load_csv: row " + std::to_string(row) + ": missing event value");
    double t = 0.0, e = 0.0;
    if (!parse_double(tcell, &t) || !std::isfinite(t))
      throw ParseError("load_csv: row " + std::to_string(row) + " column '" +
                       schema.time_column + "': bad number '" + tcell + "'");
    if (!(t > 0.0))
      throw ValidationError("load_csv: row " + std::to_string(row) + ": nonpositive time " +
                            tcell);
    if (!parse_double(ecell, &e) || (e != 0.0 && e != 1.0))
      throw ValidationError("load_csv: row " + std::to_string(row) + ": event value '" + ecell +
                            "' is not in {0,1}");
    table.times.push_back(t);
    table.events.push_back(static_cast<int>(e));

    for (const Sel& sel : selected) {
      RawColumn& col = table.columns[sel.out_col];
      const std::string& cell = cells[sel.csv_col];
      bool miss = is_missing(cell);
      col.missing.push_back(miss);
      if (col.kind == ColumnKind::Numeric) {
        double v = 0.0;
        if (!miss) {
          if (!parse_double(cell, &v))
            throw ParseError("load_csv: row " + std::to_string(row) + " column '" + col.name +
                             "': bad number '" + cell + "'");
        }
        col.numeric.push_back(v);
      } else {
        col.labels.push_back(miss ? std::string() : cell);
      }
    }
    ++table.n_rows;
  }
  return table;
}

std::size_t PreprocessingRecord::output_dim() const {
  std::size_t d = 0;
  for (const ColumnEntry& e : layout) {
    if (e.kind == ColumnKind::Numeric) {
      d += 1;
    } else {
      const CategoricalStats& cs = categorical_stats[e.index];
      d += cs.categories.size() + (cs.has_missing ? 1 : 0);
    }
  }
  return d;
}

std::vector<std::size_t> PreprocessingRecord::numeric_output_columns() const {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  for (const ColumnEntry& e : layout) {
    if (e.kind == ColumnKind::Numeric) {
      out.push_back(pos);
      pos += 1;
    } else {
      const CategoricalStats& cs = categorical_stats[e.index];
      pos += cs.categories.size() + (cs.has_missing ? 1 : 0);
    }
  }
  return out;
}

PreprocessingRecord fit_preprocessing(const RawTable& raw) {
  if (raw.n_rows == 0) throw ValidationError("preprocess: empty table");
  if (std::find(raw.events.begin(), raw.events.end(), 1) == raw.events.end())
    throw ValidationError("preprocess: dataset is fully censored");
  PreprocessingRecord rec;
  for (const RawColumn& col : raw.columns) {
    if (col.kind == ColumnKind::Numeric) {
      double sum = 0.0;
      std::size_t n_obs = 0;
      for (std::size_t i = 0; i < raw.n_rows; ++i) {
        if (!col.missing[i]) {
          sum += col.numeric[i];
          ++n_obs;
        }
      }
      if (n_obs == 0) continue;  // fully missing column dropped
      double mean = sum / static_cast<double>(n_obs);
      double ss = 0.0;
      for (std::size_t i = 0; i < raw.n_rows; ++i)
        if (!col.missing[i]) ss += (col.numeric[i] - mean) * (col.numeric[i] - mean);
      double std = std::sqrt(ss / static_cast<double>(n_obs));  // population convention
      if (std < 1e-12) std = 0.0;
      rec.layout.push_back({ColumnKind::Numeric, rec.numeric_stats.size()});
      rec.numeric_stats.push_back({col.name, mean, std});
    } else {
      std::set<std::string> cats;
      bool has_missing = false;
      for (std::size_t i = 0; i < raw.n_rows; ++i) {
        if (col.missing[i])
          has_missing = true;
        else
          cats.insert(col.labels[i]);
      }
      if (cats.empty()) continue;  // fully missing column dropped
      PreprocessingRecord::CategoricalStats cs;
      cs.name = col.name;
      cs.categories.assign(cats.begin(), cats.end());
      cs.has_missing = has_missing;
      rec.layout.push_back({ColumnKind::Categorical, rec.categorical_stats.size()});
      rec.categorical_stats.push_back(std::move(cs));
    }
  }
  if (rec.layout.empty()) throw ValidationError("preprocess: no feature columns survive");
  return rec;
}

SurvivalDataset apply_preprocessing(const RawTable& raw, const PreprocessingRecord& record) {
  // The record's columns must be a subsequence of raw's (fully-missing fit
  // columns may be absent from the record but present in raw).
  std::map<std::string, const RawColumn*> by_name;
  for (const RawColumn& col : raw.columns) by_name[col.name] = &col;

  SurvivalDataset out;
  out.times = raw.times;
  out.events = raw.events;
  out.record = record;
  out.features = Matrix(raw.n_rows, record.output_dim());

  std::size_t pos = 0;
  for (const PreprocessingRecord::ColumnEntry& entry : record.layout) {
    if (entry.kind == ColumnKind::Numeric) {
      const auto& st = record.numeric_stats[entry.index];
      auto it = by_name.find(st.name);
      if (it == by_name.end() || it->second->kind != ColumnKind::Numeric)
        throw ValidationError("apply_preprocessing: numeric column '" + st.name + "' missing");
      const RawColumn& col = *it->second;
      for (std::size_t i = 0; i < raw.n_rows; ++i) {
        double v;
        if (col.missing[i] || st.std == 0.0)
          v = 0.0;  // mean-imputed cells standardize to 0; constant columns map to 0
        else
          v = (col.numeric[i] - st.mean) / st.std;
        out.features(i, pos) = v;
      }
      out.feature_names.push_back(st.name);
      pos += 1;
    } else {
      const auto& st = record.categorical_stats[entry.index];
      auto it = by_name.find(st.name);
      if (it == by_name.end() || it->second->kind != ColumnKind::Categorical)
        throw ValidationError("apply_preprocessing: categorical column '" + st.name + "' missing");
      const RawColumn& col = *it->second;
      std::size_t width = st.categories.size() + (st.has_missing ? 1 : 0);
      for (std::size_t i = 0; i < raw.n_rows; ++i) {
        if (col.missing[i]) {
          if (st.has_missing) out.features(i, pos + st.categories.size()) = 1.0;
          continue;
        }
        auto cit = std::lower_bound(st.categories.begin(), st.categories.end(), col.labels[i]);
        if (cit != st.categories.end() && *cit == col.labels[i])
          out.features(i, pos + static_cast<std::size_t>(cit - st.categories.begin())) = 1.0;
        // unseen category: all-zero block
      }
      for (const std::string& c : st.categories) out.feature_names.push_back(st.name + "=" + c);
      if (st.has_missing) out.feature_names.push_back(st.name + "=<missing>");
      pos += width;
    }
  }
  return out;
}

SurvivalDataset preprocess(const RawTable& raw) {
  return apply_preprocessing(raw, fit_preprocessing(raw));
}

SurvivalDataset SurvivalDataset::take(const std::vector<std::size_t>& idx) const {
  SurvivalDataset out;
  out.features = features.take_rows(idx);
  out.feature_names = feature_names;
  out.record = record;
  out.times.reserve(idx.size());
  out.events.reserve(idx.size());
  for (std::size_t i : idx) {
    out.times.push_back(times[i]);
    out.events.push_back(events[i]);
  }
  return out;
}

SplitIndices stratified_split_indices(const std::vector<double>& times,
                                      const std::vector<int>& events, const SplitSpec& spec) {
  (void)times;
  double fsum = spec.train_fraction + spec.validation_fraction + spec.test_fraction;
  if (std::fabs(fsum - 1.0) > 1e-12)
    throw ValidationError("stratified_split: fractions sum to " + std::to_string(fsum));
  if (spec.train_fraction <= 0 || spec.validation_fraction <= 0 || spec.test_fraction <= 0)
    throw ValidationError("stratified_split: all fractions must be positive");

  SplitIndices out;
  for (int stratum : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < events.size(); ++i)
      if (events[i] == stratum) idx.push_back(i);
    if (idx.size() < 3)
      throw ValidationError("stratified_split: stratum delta=" + std::to_string(stratum) +
                            " has only " + std::to_string(idx.size()) + " rows");
    std::mt19937_64 rng(spec.seed * 2654435761ULL + static_cast<std::uint64_t>(stratum));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t s = idx.size();
    std::size_t n_val = static_cast<std::size_t>(spec.validation_fraction * s);
    std::size_t n_test = static_cast<std::size_t>(spec.test_fraction * s);
    std::size_t n_train = s - n_val - n_test;  // rounding remainder goes to train
    for (std::size_t i = 0; i < n_train; ++i) out.train.push_back(idx[i]);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) out.validation.push_back(idx[i]);
    for (std::size_t i = n_train + n_val; i < s; ++i) out.test.push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitResult stratified_split(const SurvivalDataset& data, const SplitSpec& spec) {
  SplitResult res;
  res.indices = stratified_split_indices(data.times, data.events, spec);
  res.train = data.take(res.indices.train);
  res.validation = data.take(res.indices.validation);
  res.test = data.take(res.indices.test);
  return res;
}

}  // namespace tabsurv
