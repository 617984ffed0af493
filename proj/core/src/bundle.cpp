#include <cstring>
#include <fstream>

#include "tabsurv/train.hpp"

namespace tabsurv {

namespace {

const char* kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int v = static_cast<unsigned int>(data[i]) << 16;
    if (i + 1 < len) v |= static_cast<unsigned int>(data[i + 1]) << 8;
    if (i + 2 < len) v |= data[i + 2];
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64Alphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kB64Alphabet[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
  if (s.size() % 4 != 0) throw ParseError("bundle: base64 payload length not a multiple of 4");
  int lut[256];
  std::fill(std::begin(lut), std::end(lut), -1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64Alphabet[i])] = i;
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    unsigned int v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      char c = s[i + j];
      if (c == '=') {
        ++pad;
        v <<= 6;
      } else {
        int d = lut[static_cast<unsigned char>(c)];
        if (d < 0 || pad > 0) throw ParseError("bundle: invalid base64 payload");
        v = (v << 6) | static_cast<unsigned int>(d);
      }
    }
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xff));
  }
  return out;
}

// Doubles are stored as base64 over little-endian IEEE-754 bytes so that
// round trips are bit-exact.
std::string encode_doubles(const double* data, std::size_t n) {
  static_assert(sizeof(double) == 8);
  std::vector<unsigned char> bytes(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] =
        static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> decode_doubles(const std::string& s) {
  std::vector<unsigned char> bytes = base64_decode(s);
  if (bytes.size() % 8 != 0) throw ParseError("bundle: float payload is not a multiple of 8 bytes");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b)
      bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

nlohmann::json vector_to_json(const std::vector<double>& v) {
  return encode_doubles(v.data(), v.size());
}

std::vector<double> vector_from_json(const nlohmann::json& j) {
  if (!j.is_string()) throw ParseError("bundle: expected base64 string for float array");
  return decode_doubles(j.get<std::string>());
}

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_doubles(m.data().data(), m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  std::size_t rows = j.at("rows").get<std::size_t>();
  std::size_t cols = j.at("cols").get<std::size_t>();
  std::vector<double> data = vector_from_json(j.at("data"));
  if (data.size() != rows * cols)
    throw ParseError("bundle: matrix payload size mismatch (" + std::to_string(data.size()) +
                     " vs " + std::to_string(rows) + "x" + std::to_string(cols) + ")");
  Matrix m(rows, cols);
  m.data() = std::move(data);
  return m;
}

nlohmann::json step_function_to_json(const StepFunction& sf) {
  return {{"times", vector_to_json(sf.times)},
          {"values", vector_to_json(sf.values)},
          {"initial", sf.initial}};
}

StepFunction step_function_from_json(const nlohmann::json& j) {
  StepFunction sf;
  sf.times = vector_from_json(j.at("times"));
  sf.values = vector_from_json(j.at("values"));
  sf.initial = j.at("initial").get<double>();
  if (sf.times.size() != sf.values.size())
    throw ParseError("bundle: step function times/values length mismatch");
  return sf;
}

nlohmann::json schema_to_json(const TableSchema& s) {
  return {{"time", s.time_column},
          {"event", s.event_column},
          {"numeric", s.numeric_columns},
          {"categorical", s.categorical_columns},
          {"missing", s.missing_sentinels}};
}

TableSchema schema_from_json(const nlohmann::json& j) {
  TableSchema s;
  s.time_column = j.at("time").get<std::string>();
  s.event_column = j.at("event").get<std::string>();
  s.numeric_columns = j.at("numeric").get<std::vector<std::string>>();
  s.categorical_columns = j.at("categorical").get<std::vector<std::string>>();
  s.missing_sentinels = j.at("missing").get<std::vector<std::string>>();
  return s;
}

nlohmann::json record_to_json(const PreprocessingRecord& rec) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& entry : rec.layout)
    layout.push_back({{"kind", entry.kind == ColumnKind::Numeric ? "numeric" : "categorical"},
                      {"index", entry.index}});
  nlohmann::json numeric = nlohmann::json::array();
  for (const auto& s : rec.numeric_stats)
    numeric.push_back({{"name", s.name}, {"mean", s.mean}, {"std", s.std}});
  nlohmann::json categorical = nlohmann::json::array();
  for (const auto& s : rec.categorical_stats)
    categorical.push_back(
        {{"name", s.name}, {"categories", s.categories}, {"has_missing", s.has_missing}});
  return {{"layout", layout}, {"numeric", numeric}, {"categorical", categorical}};
}

PreprocessingRecord record_from_json(const nlohmann::json& j) {
  PreprocessingRecord rec;
  for (const auto& e : j.at("layout")) {
    std::string kind = e.at("kind").get<std::string>();
    if (kind != "numeric" && kind != "categorical")
      throw ParseError("bundle: unknown column kind '" + kind + "'");
    rec.layout.push_back({kind == "numeric" ? ColumnKind::Numeric : ColumnKind::Categorical,
                          e.at("index").get<std::size_t>()});
  }
  for (const auto& e : j.at("numeric"))
    rec.numeric_stats.push_back({e.at("name").get<std::string>(), e.at("mean").get<double>(),
                                 e.at("std").get<double>()});
  for (const auto& e : j.at("categorical"))
    rec.categorical_stats.push_back({e.at("name").get<std::string>(),
                                     e.at("categories").get<std::vector<std::string>>(),
                                     e.at("has_missing").get<bool>()});
  return rec;
}

nlohmann::json embedding_to_json(const PiecewiseLinearEmbedding& emb, std::size_t n_features) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : emb.edges()) edges.push_back(vector_to_json(e));
  return {{"edges", edges},
          {"numeric_cols", emb.numeric_cols()},
          {"n_features", n_features},
          {"emb_dim", emb.emb_dim()},
          {"use_activation", emb.use_activation()}};
}

PiecewiseLinearEmbedding embedding_from_json(const nlohmann::json& j) {
  std::vector<std::vector<double>> edges;
  for (const auto& e : j.at("edges")) edges.push_back(vector_from_json(e));
  return PiecewiseLinearEmbedding::from_parts(
      std::move(edges), j.at("numeric_cols").get<std::vector<std::size_t>>(),
      j.at("n_features").get<std::size_t>(), j.at("emb_dim").get<int>(),
      j.at("use_activation").get<bool>());
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  nlohmann::json params;
  for (const auto& [name, p] : bundle.model.params().entries())
    params[name] = matrix_to_json(p.value);

  nlohmann::json doc = {
      {"format", "tabsurv-bundle"},
      {"version", bundle.version},
      {"config", bundle.cfg.to_json()},
      {"schema", schema_to_json(bundle.schema)},
      {"preprocessing", record_to_json(bundle.record)},
      {"grid", vector_to_json(bundle.grid.taus)},
      {"embedding", embedding_to_json(bundle.model.embedding(), bundle.record.output_dim())},
      {"params", params},
      {"censoring_km", step_function_to_json(bundle.censoring_km)},
  };

  std::ofstream out(path);
  if (!out) throw ValidationError("save_bundle: cannot open '" + path + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw ValidationError("save_bundle: write to '" + path + "' failed");
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_bundle: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_bundle: '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (doc.value("format", "") != "tabsurv-bundle")
      throw ParseError("load_bundle: '" + path + "' is not a model bundle");
    int version = doc.at("version").get<int>();
    if (version != 1)
      throw ParseError("load_bundle: unsupported bundle version " + std::to_string(version));

    ModelBundle bundle;
    bundle.version = version;
    bundle.cfg = TrainConfig::from_json(doc.at("config"));
    bundle.schema = schema_from_json(doc.at("schema"));
    bundle.record = record_from_json(doc.at("preprocessing"));
    bundle.grid.taus = vector_from_json(doc.at("grid"));
    if (bundle.grid.taus.empty()) throw ParseError("load_bundle: empty time grid");
    bundle.censoring_km = step_function_from_json(doc.at("censoring_km"));

    PiecewiseLinearEmbedding emb = embedding_from_json(doc.at("embedding"));
    bundle.model = EnsembleModel::from_structure(bundle.cfg.model, std::move(emb), bundle.grid.m());

    const nlohmann::json& params = doc.at("params");
    auto& entries = bundle.model.params().entries();
    if (params.size() != entries.size())
      throw ParseError("load_bundle: bundle has " + std::to_string(params.size()) +
                       " parameter arrays, model expects " + std::to_string(entries.size()));
    for (auto& [name, p] : entries) {
      if (!params.contains(name)) throw ParseError("load_bundle: missing parameter '" + name + "'");
      Matrix value = matrix_from_json(params.at(name));
      if (value.rows() != p.value.rows() || value.cols() != p.value.cols())
        throw ParseError("load_bundle: parameter '" + name + "' has wrong shape");
      p.value = std::move(value);
    }
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_bundle: malformed bundle '" + path + "': " + e.what());
  }
}

}  // namespace tabsurv
