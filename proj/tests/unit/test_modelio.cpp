#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "icmlp/modelio.hpp"
#include "icmlp/verify.hpp"

using namespace icmlp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "icmlp_modelio_test";
  fs::create_directories(dir);
  return dir / name;
}

VectorNet sparse_net() {
  NetParams p;
  p.input_dim = 2;
  p.layers.push_back(dense_layer({}, {{1, 0}, {0, 1}, {1, 1}, {0.5, -0.5}, {2, 0}, {0, 0}}, {0, 0.1, 0.2, 0.3, 0.4, 0.5}));
  Layer second;
  second.w = WeightMatrix::builder(6);
  for (std::size_t j = 0; j < 6; ++j) {
    second.w.push(static_cast<WeightMatrix::index_type>(j), 1.0 + 0.25 * static_cast<double>(j));
    second.w.end_row();
  }
  second.a.assign(12, 0.0);
  second.a[3] = -0.75;
  second.b.assign(6, -0.125);
  p.layers.push_back(second);
  p.v = {1, -1, 1, -1, 1, -1};
  p.c = {0.3, 0.0};
  p.d = 1.0 / 3.0;
  return VectorNet(Activation::softplus(), p);
}

}  // namespace

TEST(ModelIo, RoundTripIsExact) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(3);
    const VectorNet net = random_net(rng, Activation::tanh(), n, random_widths(rng, 4, 6));
    const std::string text = model_to_string(net);
    const VectorNet back = model_from_string(text);
    EXPECT_EQ(back, net);
    EXPECT_EQ(model_to_string(back), text);
    const auto x = random_point(rng, n);
    EXPECT_EQ(back(x), net(x));
  }
}

TEST(ModelIo, ScalarFilesUsePlainNumbers) {
  SplitMix64 rng(2);
  const ScalarNet net = random_net<ScalarNet>(rng, Activation::sigmoid(), 1, {3, 2});
  const json doc = model_to_json(net);
  EXPECT_EQ(doc["kind"], "scalar");
  EXPECT_TRUE(doc["layers"][0]["a"][0].is_number());
  EXPECT_TRUE(doc["output"]["c"].is_number());
  const VectorNet back = model_from_json(doc);
  EXPECT_EQ(back, to_vector(net));
}

TEST(ModelIo, SparseWeightsRoundTrip) {
  const VectorNet net = sparse_net();
  const json doc = model_to_json(net);
  const json& w = doc["layers"][1]["w"];
  ASSERT_TRUE(w.is_object());
  EXPECT_EQ(w["rows"], 6);
  EXPECT_EQ(w["cols"], 6);
  EXPECT_EQ(w["entries"].size(), 6u);
  EXPECT_EQ(w["entries"][2], json::parse("[2, 2, 1.5]"));
  const VectorNet back = model_from_json(doc);
  EXPECT_EQ(back, net);
  EXPECT_EQ(model_to_string(back), model_to_string(net));
}

TEST(ModelIo, AffineActivationKeepsParameters) {
  const VectorNet net = affine_net<VectorNet>(Activation::affine(2.0, -0.5), {1.0}, 0.0);
  const json doc = model_to_json(net);
  EXPECT_EQ(doc["activation"]["name"], "affine");
  EXPECT_EQ(model_from_json(doc).activation(), Activation::affine(2.0, -0.5));
}

TEST(ModelIo, HandWrittenDepthZeroModel) {
  const std::string text = R"({"format_version": 1, "kind": "scalar", "input_dim": 1,
    "activation": {"name": "tanh"}, "layers": [], "output": {"v": [], "c": 2, "d": -1}})";
  const VectorNet net = model_from_string(text);
  const std::vector<double> x{3.0};
  EXPECT_EQ(net(x), 5.0);
}

TEST(ModelIo, ErrorsNameTheField) {
  json doc = model_to_json(sparse_net());
  doc["layers"][1]["a"][0] = "oops";
  try {
    model_from_json(doc);
    FAIL() << "bad entry accepted";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("layers[1].a[0]"), std::string::npos) << e.what();
  }

  json version = model_to_json(sparse_net());
  version["format_version"] = 2;
  EXPECT_THROW(model_from_json(version), LoadError);

  json short_b = model_to_json(sparse_net());
  short_b["layers"][1]["b"].erase(0);
  EXPECT_THROW(model_from_json(short_b), LoadError);

  json out_of_range = model_to_json(sparse_net());
  out_of_range["layers"][1]["w"]["entries"][0][1] = 9;
  EXPECT_THROW(model_from_json(out_of_range), LoadError);

  EXPECT_THROW(model_from_string("{not json"), LoadError);
}

TEST(ModelIo, FilesAndMissingPath) {
  const fs::path path = scratch("net.json");
  const VectorNet net = sparse_net();
  save_model(net, path.string());
  EXPECT_EQ(load_model(path.string()), net);
  try {
    load_model((fs::temp_directory_path() / "icmlp_no_such_dir" / "x.json").string());
    FAIL() << "missing file loaded";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("x.json"), std::string::npos);
  }
}

TEST(Csv, SingleRowExport) {
  const std::string csv = table_to_csv({"x", "y"}, {{0.5, -2.0}});
  EXPECT_EQ(csv, "x,y\n0.5,-2\n");
}

TEST(Csv, ExportReparsesIdentically) {
  SplitMix64 rng(3);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10000; ++i) rows.push_back({rng.uniform(-1, 1), rng.uniform(-1e6, 1e6), 1e-300 * rng.uniform01()});
  const std::string csv = table_to_csv({"a", "b", "c"}, rows);
  const CsvTable table = parse_csv(csv);
  EXPECT_EQ(table.header, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(table.rows, rows);
  EXPECT_EQ(table_to_csv(table.header, table.rows), csv);

  const fs::path path = scratch("table.csv");
  export_table(rows, {"a", "b", "c"}, path.string());
  EXPECT_EQ(read_file(path.string()), csv);
}

TEST(Csv, RowWidthMismatchIsStructural) {
  EXPECT_THROW(table_to_csv({"a", "b"}, {{1.0}}), StructuralError);
}

TEST(Csv, MalformedRowsCiteLineNumbers) {
  try {
    parse_csv("x,y\n1,2\n3,abc\n", "data.csv");
    FAIL() << "malformed row accepted";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv: line 3"), std::string::npos) << e.what();
  }
  try {
    parse_csv("1,2\n\n3,4,5\n");
    FAIL() << "ragged row accepted";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Csv, HeaderlessAndCrlf) {
  const CsvTable table = parse_csv("1, 2\r\n+3,-4e-1\r\n");
  EXPECT_TRUE(table.header.empty());
  EXPECT_EQ(table.rows, (std::vector<std::vector<double>>{{1, 2}, {3, -0.4}}));
}

TEST(Dataset, LastColumnIsTarget) {
  const fs::path path = scratch("data.csv");
  write_file(path.string(), "x1,x2,y\n0,1,2\n3,4,5\n");
  const Dataset data = load_dataset(path.string());
  EXPECT_EQ(data.input_dim, 2u);
  EXPECT_EQ(data.x, (std::vector<double>{0, 1, 3, 4}));
  EXPECT_EQ(data.y, (std::vector<double>{2, 5}));

  write_file(path.string(), "y\n1\n");
  EXPECT_THROW(load_dataset(path.string()), LoadError);
  write_file(path.string(), "x,y\n");
  EXPECT_THROW(load_dataset(path.string()), LoadError);
}

TEST(Certificate, JsonFields) {
  Certificate cert;
  cert.tolerance = 0.05;
  cert.achieved_sup_error = 0.01;
  cert.claimed_bound = 0.02;
  cert.grid_points = {2000};
  cert.degrees = {7};
  cert.activation = "tanh";
  cert.ledger.quadrature = 1e-4;
  const json doc = certificate_to_json(cert);
  EXPECT_EQ(doc["met"], true);
  EXPECT_EQ(doc["grid_points"], json::parse("[2000]"));
  EXPECT_EQ(doc["ledger"]["quadrature"], 1e-4);
  EXPECT_EQ(doc["activation"], "tanh");
  cert.achieved_sup_error = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(certificate_to_json(cert)["achieved_sup_error"].is_null());
}
