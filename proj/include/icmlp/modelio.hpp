#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "icmlp/activation.hpp"
#include "icmlp/approximate.hpp"
#include "icmlp/errors.hpp"
#include "icmlp/net.hpp"
#include "icmlp/train.hpp"

// On-disk model format (JSON, format_version 1):
//
//   { "format_version": 1, "kind": "scalar" | "vector", "input_dim": n,
//     "activation": { "name": "tanh", "params": [] },
//     "layers": [ { "w": ..., "a": ..., "b": [...] }, ... ],
//     "output": { "v": [...], "c": ..., "d": number } }
//
// Scalar files store a and c as plain numbers per neuron; vector files store
// a as one array of n numbers per neuron and c as an array. w is [] for the
// first layer, otherwise either a dense array of rows or, when fewer than a
// third of the entries are nonzero,
//   { "rows": R, "cols": C, "entries": [[row, col, value], ...] }
// with 0-based indices in row-major order. Load errors name the offending
// field with 0-based indices, e.g. "layers[1].a[0]".

namespace icmlp {

using json = nlohmann::ordered_json;

inline constexpr int model_format_version = 1;

namespace detail {

inline json encode_weights(const WeightMatrix& w) {
  if (w.empty()) return json::array();
  if (3 * w.nonzeros() >= w.rows() * w.cols()) return json(w.to_dense());
  json entries = json::array();
  for (std::size_t j = 0; j < w.rows(); ++j) {
    const auto idx = w.row_indices(j);
    const auto val = w.row_values(j);
    for (std::size_t k = 0; k < idx.size(); ++k) entries.push_back(json::array({j, idx[k], val[k]}));
  }
  return json{{"rows", w.rows()}, {"cols", w.cols()}, {"entries", std::move(entries)}};
}

class Reader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) { throw LoadError(path, what); }

  static const json& field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(join(path, key), "missing field");
    return *it;
  }

  static std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
  }
  static std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

  static double number(const json& value, const std::string& path) {
    if (!value.is_number()) fail(path, "expected a finite number");
    const double x = value.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
  }

  static std::size_t count(const json& value, const std::string& path) {
    if (!value.is_number_unsigned()) fail(path, "expected a nonnegative integer");
    return value.get<std::size_t>();
  }

  static const json& array(const json& value, const std::string& path) {
    if (!value.is_array()) fail(path, "expected an array");
    return value;
  }

  static std::vector<double> numbers(const json& value, const std::string& path, std::size_t expected) {
    array(value, path);
    if (value.size() != expected) {
      fail(path, "has " + std::to_string(value.size()) + " entries, expected " + std::to_string(expected));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < value.size(); ++i) out.push_back(number(value[i], index(path, i)));
    return out;
  }
};

inline WeightMatrix decode_weights(const json& value, const std::string& path, std::size_t rows, std::size_t cols) {
  if (value.is_object()) {
    const std::size_t r = Reader::count(Reader::field(value, path, "rows"), Reader::join(path, "rows"));
    const std::size_t c = Reader::count(Reader::field(value, path, "cols"), Reader::join(path, "cols"));
    if (r != rows || c != cols) {
      Reader::fail(path, "is " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    const std::string epath = Reader::join(path, "entries");
    const json& entries = Reader::array(Reader::field(value, path, "entries"), epath);
    WeightMatrix w = WeightMatrix::builder(cols);
    std::size_t row = 0;
    long last_col = -1;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const std::string at = Reader::index(epath, k);
      const json& e = Reader::array(entries[k], at);
      if (e.size() != 3) Reader::fail(at, "expected [row, col, value]");
      const std::size_t j = Reader::count(e[0], Reader::index(at, 0));
      const std::size_t i = Reader::count(e[1], Reader::index(at, 1));
      const double x = Reader::number(e[2], Reader::index(at, 2));
      if (j >= rows || i >= cols) Reader::fail(at, "index out of range");
      if (j < row || (j == row && static_cast<long>(i) <= last_col)) Reader::fail(at, "entries must be in row-major order");
      while (row < j) {
        w.end_row();
        ++row;
        last_col = -1;
      }
      w.push(static_cast<WeightMatrix::index_type>(i), x);
      last_col = static_cast<long>(i);
    }
    while (row < rows) {
      w.end_row();
      ++row;
    }
    return w;
  }
  Reader::array(value, path);
  if (value.size() != rows) {
    Reader::fail(path, "has " + std::to_string(value.size()) + " rows, expected " + std::to_string(rows));
  }
  WeightMatrix w = WeightMatrix::builder(cols);
  for (std::size_t j = 0; j < rows; ++j) {
    const auto row = Reader::numbers(value[j], Reader::index(path, j), cols);
    for (std::size_t i = 0; i < cols; ++i) w.push(static_cast<WeightMatrix::index_type>(i), row[i]);
    w.end_row();
  }
  return w;
}

}  // namespace detail

template <class Tag>
json model_to_json(const BasicNet<Tag>& net) {
  const NetParams& p = net.params();
  const std::size_t n = p.input_dim;
  const bool scalar = BasicNet<Tag>::is_scalar;
  json out;
  out["format_version"] = model_format_version;
  out["kind"] = scalar ? "scalar" : "vector";
  out["input_dim"] = n;
  out["activation"] = {{"name", net.activation().name()}, {"params", net.activation().params()}};
  json layers = json::array();
  for (const auto& layer : p.layers) {
    json a = json::array();
    for (std::size_t j = 0; j < layer.width(); ++j) {
      const auto row = layer.input_weights(j, n);
      if (scalar) {
        a.push_back(row[0]);
      } else {
        a.push_back(std::vector<double>(row.begin(), row.end()));
      }
    }
    layers.push_back({{"w", detail::encode_weights(layer.w)}, {"a", std::move(a)}, {"b", layer.b}});
  }
  out["layers"] = std::move(layers);
  json c = scalar ? json(p.c[0]) : json(p.c);
  out["output"] = {{"v", p.v}, {"c", std::move(c)}, {"d", p.d}};
  return out;
}

/// Parses a model document. A scalar file loads as a VectorNet with n = 1.
inline VectorNet model_from_json(const json& doc) {
  using detail::Reader;
  if (!doc.is_object()) Reader::fail("", "model document must be a JSON object");
  const json& version = Reader::field(doc, "", "format_version");
  if (!version.is_number_integer() || version.get<long>() != model_format_version) {
    Reader::fail("format_version", "unsupported version " + version.dump() + ", expected " +
                                       std::to_string(model_format_version));
  }
  const json& kind = Reader::field(doc, "", "kind");
  if (!kind.is_string() || (kind != "scalar" && kind != "vector")) Reader::fail("kind", "expected \"scalar\" or \"vector\"");
  const bool scalar = kind == "scalar";
  const std::size_t n = Reader::count(Reader::field(doc, "", "input_dim"), "input_dim");
  if (n == 0) Reader::fail("input_dim", "must be positive");
  if (scalar && n != 1) Reader::fail("input_dim", "scalar models have input_dim 1");

  const json& act = Reader::field(doc, "", "activation");
  const json& name = Reader::field(act, "activation", "name");
  if (!name.is_string()) Reader::fail("activation.name", "expected a string");
  std::vector<double> act_params;
  if (act.contains("params")) {
    const json& raw = Reader::array(act["params"], "activation.params");
    act_params = Reader::numbers(raw, "activation.params", raw.size());
  }
  Activation activation = Activation::identity();
  try {
    activation = Activation::from_name(name.get<std::string>(), act_params);
  } catch (const Error& e) {
    Reader::fail("activation", e.what());
  }

  NetParams p;
  p.input_dim = n;
  const json& layers = Reader::array(Reader::field(doc, "", "layers"), "layers");
  std::size_t prev = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string path = Reader::index("layers", l);
    const json& rec = layers[l];
    const std::string bpath = Reader::join(path, "b");
    const json& braw = Reader::array(Reader::field(rec, path, "b"), bpath);
    Layer layer;
    layer.b = Reader::numbers(braw, bpath, braw.size());
    const std::size_t width = layer.b.size();
    if (width == 0) Reader::fail(bpath, "hidden layers need at least one neuron");

    const std::string apath = Reader::join(path, "a");
    const json& araw = Reader::array(Reader::field(rec, path, "a"), apath);
    if (araw.size() != width) {
      Reader::fail(apath, "has " + std::to_string(araw.size()) + " entries, expected " + std::to_string(width));
    }
    for (std::size_t j = 0; j < width; ++j) {
      const std::string at = Reader::index(apath, j);
      if (scalar) {
        layer.a.push_back(Reader::number(araw[j], at));
      } else {
        const auto row = Reader::numbers(araw[j], at, n);
        layer.a.insert(layer.a.end(), row.begin(), row.end());
      }
    }

    const std::string wpath = Reader::join(path, "w");
    const json& wraw = Reader::field(rec, path, "w");
    if (l == 0) {
      if (!wraw.is_array() || !wraw.empty()) Reader::fail(wpath, "the first layer has no inter-layer weights; use []");
    } else {
      layer.w = detail::decode_weights(wraw, wpath, width, prev);
    }
    p.layers.push_back(std::move(layer));
    prev = width;
  }

  const json& output = Reader::field(doc, "", "output");
  const json& vraw = Reader::field(output, "output", "v");
  p.v = Reader::numbers(vraw, "output.v", prev);
  const json& craw = Reader::field(output, "output", "c");
  if (scalar) {
    p.c = {Reader::number(craw, "output.c")};
  } else {
    p.c = Reader::numbers(craw, "output.c", n);
  }
  p.d = Reader::number(Reader::field(output, "output", "d"), "output.d");
  try {
    return VectorNet(std::move(activation), std::move(p));
  } catch (const StructuralError& e) {
    Reader::fail("", e.what());
  }
}

/// Indented for small networks, single-line once the file would run to many megabytes.
template <class Tag>
std::string model_to_string(const BasicNet<Tag>& net) {
  const bool small = net.stored_weight_count() + net.neuron_count() * (net.input_dim() + 2) <= 100000;
  return model_to_json(net).dump(small ? 1 : -1) + "\n";
}

inline VectorNet model_from_string(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError("", std::string("invalid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(path, "cannot open file for writing");
  out << text;
  if (!out.flush()) throw LoadError(path, "write failed");
}

template <class Tag>
void save_model(const BasicNet<Tag>& net, const std::string& path) {
  write_file(path, model_to_string(net));
}

inline VectorNet load_model(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return model_from_string(text);
  } catch (const LoadError& e) {
    throw LoadError(path + (e.where().empty() ? "" : ": " + e.where()),
                    std::string(e.what()).substr(e.where().empty() ? 0 : e.where().size() + 2));
  }
}

inline json certificate_to_json(const Certificate& cert) {
  auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json out;
  out["tolerance"] = cert.tolerance;
  out["achieved_sup_error"] = finite_or_null(cert.achieved_sup_error);
  out["met"] = cert.met();
  out["grid_points"] = cert.grid_points;
  out["ledger"] = {{"quadrature", cert.ledger.quadrature},
                   {"second_difference", cert.ledger.second_difference},
                   {"composition", cert.ledger.composition},
                   {"polynomial_truncation", cert.ledger.polynomial_truncation}};
  out["claimed_bound"] = finite_or_null(cert.claimed_bound);
  out["chebyshev_degrees"] = cert.degrees;
  out["polynomial_terms"] = cert.polynomial_terms;
  out["network_terms"] = cert.network_terms;
  out["activation"] = cert.activation;
  return out;
}

/// Shortest decimal that reads back to the same double.
inline std::string format_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// CSV with a header row and LF line endings.
inline std::string table_to_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + columns[k];
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) {
      throw StructuralError("table row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                            " values for " + std::to_string(columns.size()) + " columns");
    }
    for (std::size_t k = 0; k < rows[r].size(); ++k) {
      if (k) out += ',';
      out += format_number(rows[r][k]);
    }
    out += '\n';
  }
  return out;
}

inline void export_table(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& columns,
                         const std::string& path) {
  write_file(path, table_to_csv(columns, rows));
}

/// Numeric CSV. A first line that does not parse as numbers is taken as a
/// header. Every row must have the same number of fields. Errors report
/// 1-based line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline bool parse_csv_numbers(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    std::string_view field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double x = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), x);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(x)) {
      return false;
    }
    out.push_back(x);
    if (comma == std::string_view::npos) return true;
    pos = comma + 1;
  }
}

}  // namespace detail

inline CsvTable parse_csv(std::string_view text, const std::string& source = "") {
  CsvTable table;
  std::size_t width = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<double> values;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = (source.empty() ? "line " : source + ": line ") + std::to_string(line_no);
    if (!detail::parse_csv_numbers(line, values)) {
      if (table.rows.empty() && table.header.empty()) {
        std::string cell;
        std::istringstream in{std::string(line)};
        while (std::getline(in, cell, ',')) table.header.push_back(cell);
        width = table.header.size();
        continue;
      }
      throw LoadError(where, "malformed row '" + std::string(line) + "'");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw LoadError(where, "expected " + std::to_string(width) + " fields, found " + std::to_string(values.size()));
    }
    table.rows.push_back(values);
  }
  return table;
}

/// Dataset from a CSV whose last column is the target and the others the inputs.
inline Dataset load_dataset(const std::string& path) {
  const CsvTable table = parse_csv(read_file(path), path);
  if (table.rows.empty()) throw LoadError(path, "no data rows");
  const std::size_t width = table.rows.front().size();
  if (width < 2) throw LoadError(path, "need at least one input column and a target column");
  Dataset data;
  data.input_dim = width - 1;
  for (const auto& row : table.rows) {
    data.x.insert(data.x.end(), row.begin(), row.end() - 1);
    data.y.push_back(row.back());
  }
  return data;
}

}  // namespace icmlp
