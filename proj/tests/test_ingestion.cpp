#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "cmag/error.hpp"
#include "cmag/harness/dataset.hpp"
#include "cmag/ingestion.hpp"
#include "support.hpp"

using namespace cmag;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "cmag-ingestion-tests";
  fs::create_directories(d);
  return d / name;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("embedding header layout") {
  const Matrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto bytes = io::encode_embeddings(m);
  CHECK(bytes.size() == 28 + 24 + 4);
  CHECK(std::memcmp(bytes.data(), "CMAGEMB1", 8) == 0);
  CHECK(bytes[8] == 2);
  CHECK(bytes[16] == 3);
  CHECK(bytes[24] == 1);
  const Matrix back = io::decode_embeddings(bytes);
  CHECK(back == m);
}

TEST_CASE("embedding errors") {
  const Matrix m(2, 3, 0.5);
  auto bytes = io::encode_embeddings(m);
  auto truncated = bytes;
  truncated.resize(28 + 20);
  CHECK(code_of([&] { io::decode_embeddings(truncated); }) == ErrorCode::Truncated);
  auto corrupt = bytes;
  corrupt[30] ^= 0x40;
  CHECK(code_of([&] { io::decode_embeddings(corrupt); }) == ErrorCode::ChecksumMismatch);
  CHECK(code_of([&] { io::encode_embeddings(Matrix(0, 3)); }) == ErrorCode::BadFormat);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { io::decode_embeddings(bad_magic); }) == ErrorCode::BadFormat);
}

TEST_CASE("embedding round trip is bitwise on float32 values") {
  Matrix m = testing::random_matrix(100, 768, 42);
  for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  const fs::path p = scratch("emb.bin");
  io::write_embeddings(p, m);
  const Matrix back = io::load_embeddings(p);
  REQUIRE(back.rows() == 100);
  REQUIRE(back.cols() == 768);
  CHECK(std::memcmp(back.data(), m.data(), m.size() * sizeof(double)) == 0);
  CHECK(fs::file_size(p) == 28 + 100 * 768 * 4 + 4);
}

TEST_CASE("csv parsing and escaping") {
  const auto rows = io::parse_csv("a,b,c\n1,\"x, y\",\"he said \"\"hi\"\"\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == "x, y");
  CHECK(rows[1][2] == "he said \"hi\"");
  CHECK(io::csv_escape("plain") == "plain");
  CHECK(io::parse_csv(io::csv_escape("a,\"b\"\nc") + "\n")[0][0] == "a,\"b\"\nc");
}

TEST_CASE("node and edge tables round trip") {
  NodeTable nt{NodeType::Product, {{0, "Widget, large", "text=steel widget;category=tools"}, {1, "Bolt", ""}}};
  const fs::path np = scratch("products.csv");
  io::write_node_table(np, nt);
  CHECK(io::read_text_file(np).rfind("id,name,payload\n", 0) == 0);
  const NodeTable back = io::read_node_table(np, NodeType::Product);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].name == "Widget, large");
  CHECK(back.rows[0].payload == nt.rows[0].payload);

  EdgeTable et{relations::makes(), {{0, 1}, {2, 0}}};
  const fs::path ep = scratch("makes.csv");
  io::write_edge_table(ep, et);
  CHECK(io::read_text_file(ep).rfind("src,dst\n", 0) == 0);
  CHECK(io::read_edge_table(ep, relations::makes()).rows == et.rows);

  io::write_text_file(ep, "src,dst\n0,x\n");
  CHECK(code_of([&] { io::read_edge_table(ep, relations::makes()); }) == ErrorCode::BadFormat);
}

TEST_CASE("manifest parse, resolve and save") {
  const std::string text = R"({"nodes": {"manufacturer": 2, "product": 3},
    "edges": {"makes": 3}, "files": {"manufacturer_text": "emb/m_text.bin"}})";
  const io::DatasetManifest m = io::parse_manifest(text, "/data/set");
  CHECK(m.nodes.at("manufacturer") == 2);
  CHECK(m.edges.at("makes") == 3);
  CHECK(m.resolve("manufacturer_text") == fs::path("/data/set/emb/m_text.bin"));
  CHECK(code_of([] { io::parse_manifest(R"({"nodes": {"manufacturer": -1}})", "."); }) == ErrorCode::BadFormat);
  const fs::path p = scratch("manifest.json");
  io::save_manifest(p, m);
  const io::DatasetManifest back = io::load_manifest(p);
  CHECK(back.nodes == m.nodes);
  CHECK(back.files == m.files);
}

TEST_CASE("validate_dataset findings") {
  const HeteroGraph g = HeteroGraph::create({8887, 3, 0, 0}, {{relations::makes(), {{0, 0}, {1, 2}}}});
  io::DatasetManifest man;
  man.nodes = {{"manufacturer", 8888}, {"product", 3}};
  man.edges = {{"makes", 2}};
  std::map<std::string, FeatureMatrix> feats;
  feats["product_text"] = {NodeType::Product, Matrix(4, 2)};
  const io::ValidationReport r = io::validate_dataset(man, g, feats);
  CHECK_FALSE(r.pass());
  const auto bad = r.failures();
  REQUIRE(bad.size() == 2);
  CHECK(bad[0].check == "node-count");
  CHECK(bad[0].subject == "manufacturer");
  CHECK(bad[0].expected == "8888");
  CHECK(bad[0].actual == "8887");
  CHECK(bad[1].check == "feature-rows");
  CHECK(bad[1].subject == "product_text");
  CHECK(r.to_text().find("manufacturer") != std::string::npos);

  man.nodes["manufacturer"] = 8887;
  feats["product_text"] = {NodeType::Product, Matrix(3, 2)};
  CHECK(io::validate_dataset(man, g, feats).pass());
}

TEST_CASE("url filter verdicts") {
  const auto cfg = io::UrlFilterConfig::standard();
  CHECK(io::url_lexical_filter("https://x.com/products/widget", cfg) == io::UrlVerdict::Keep);
  CHECK(io::url_lexical_filter("https://x.com/about", cfg) == io::UrlVerdict::Drop);
  CHECK(io::url_lexical_filter("https://x.com/home", cfg) == io::UrlVerdict::Neutral);
  CHECK(io::url_lexical_filter("HTTPS://X.COM/CATALOG", cfg) == io::UrlVerdict::Keep);
  CHECK(code_of([&] { io::url_lexical_filter("", cfg); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("url filter drop precedence holds for every keyword pair") {
  const auto cfg = io::UrlFilterConfig::standard();
  for (const auto& k : cfg.keep_keywords) {
    for (const auto& d : cfg.drop_keywords) {
      CHECK(io::url_lexical_filter("https://a.b/" + k + "/" + d, cfg) == io::UrlVerdict::Drop);
      CHECK(io::url_lexical_filter("https://a.b/" + d + "-" + k, cfg) == io::UrlVerdict::Drop);
    }
  }
}

TEST_CASE("url filter config validation") {
  auto cfg = io::UrlFilterConfig::standard();
  CHECK_NOTHROW(cfg.validate());
  cfg.drop_keywords.push_back("item");
  CHECK_THROWS(cfg.validate());
  io::UrlFilterConfig empty;
  CHECK_THROWS(empty.validate());
  auto trig = io::UrlFilterConfig::standard();
  CHECK_FALSE(io::needs_supplementary_pages({io::UrlVerdict::Neutral}, trig));
  trig.supplementary_trigger = 2;
  CHECK(io::needs_supplementary_pages({io::UrlVerdict::Keep, io::UrlVerdict::Drop}, trig));
  CHECK_FALSE(io::needs_supplementary_pages({io::UrlVerdict::Keep, io::UrlVerdict::Keep}, trig));
}

TEST_CASE("url filter matches the labelled fixture") {
  const auto rows = io::parse_csv(io::read_text_file(fs::path(CMAG_FIXTURE_DIR) / "urls.csv"));
  REQUIRE(rows.size() == 31);
  const auto cfg = io::UrlFilterConfig::standard();
  std::map<std::string, int> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CAPTURE(rows[i][0]);
    CHECK(io::to_string(io::url_lexical_filter(rows[i][0], cfg)) == rows[i][1]);
    ++seen[rows[i][1]];
  }
  CHECK(seen["keep"] > 0);
  CHECK(seen["drop"] > 0);
  CHECK(seen["neutral"] > 0);
  // every keyword of both lists occurs somewhere in the fixture
  for (const auto* list : {&cfg.keep_keywords, &cfg.drop_keywords}) {
    for (const std::string& k : *list) {
      bool found = false;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        std::string u = rows[i][0];
        for (char& c : u) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        found = found || u.find(k) != std::string::npos;
      }
      CHECK_MESSAGE(found, k);
    }
  }
}

TEST_CASE("bundled miniature dataset validates") {
  const auto l = harness::load_dataset(fs::path(CMAG_FIXTURE_DIR) / "mini");
  CHECK(l.report.pass());
  for (NodeType t : kAllNodeTypes) CHECK(l.data.mag.num_nodes(t) > 0);
  for (const char* r : {"makes", "has_attribute", "has_image"}) CHECK(l.data.mag.num_edges(r) > 0);
}

TEST_CASE("bundled mutated datasets fail on the mutated item") {
  const std::map<std::string, std::pair<std::string, std::string>> expected{
      {"node_count", {"node-count", "manufacturer"}},
      {"feature_rows", {"feature-rows", "product_text"}},
      {"missing_file", {"file", "image_embedding"}},
      {"dangling_endpoint", {"graph", ""}},
      {"checksum", {"load", "manufacturer_text"}},
  };
  for (const auto& [name, want] : expected) {
    CAPTURE(name);
    const auto l = harness::load_dataset(fs::path(CMAG_FIXTURE_DIR) / "mutated" / name);
    const auto failures = l.report.failures();
    REQUIRE(failures.size() == 1);
    CHECK(failures[0].check == want.first);
    if (!want.second.empty()) CHECK(failures[0].subject == want.second);
  }
}
