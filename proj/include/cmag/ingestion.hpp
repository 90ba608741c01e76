#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/graph.hpp"
#include "cmag/matrix.hpp"

namespace cmag::io {

// ---- embedding matrices ----------------------------------------------------
//
// Layout (all integers little-endian):
//   offset  0: 8-byte magic "CMAGEMB1"
//   offset  8: u64 rows
//   offset 16: u64 cols
//   offset 24: u32 dtype tag (1 = IEEE-754 binary32)
//   offset 28: rows*cols float32 values, row-major
//   trailer  : u32 CRC-32 (zlib polynomial) of every preceding byte
inline constexpr char kEmbeddingMagic[8] = {'C', 'M', 'A', 'G', 'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 28;

void write_embeddings(const std::filesystem::path& path, const Matrix& m);
Matrix load_embeddings(const std::filesystem::path& path);
std::vector<unsigned char> encode_embeddings(const Matrix& m);
Matrix decode_embeddings(std::span<const unsigned char> bytes, std::string_view origin = "<memory>");

// ---- delimited tables ------------------------------------------------------

/// RFC-4180 style: comma separated, fields may be double-quoted.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

NodeTable read_node_table(const std::filesystem::path& path, NodeType type);
void write_node_table(const std::filesystem::path& path, const NodeTable& table);
EdgeTable read_edge_table(const std::filesystem::path& path, const Relation& relation);
void write_edge_table(const std::filesystem::path& path, const EdgeTable& table);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// ---- manifest --------------------------------------------------------------

/// JSON object with sections "nodes", "edges" and "files"; the flattened key
/// `nodes.manufacturer` addresses nodes["manufacturer"]. Relative file paths
/// resolve against the manifest's directory.
struct DatasetManifest {
  std::map<std::string, long long> nodes;
  std::map<std::string, long long> edges;
  std::map<std::string, std::string> files;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(std::string_view file_key) const;
  bool has_file(std::string_view file_key) const { return files.contains(std::string(file_key)); }
};

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// ---- validation ------------------------------------------------------------

struct Finding {
  std::string check;    // "node-count", "edge-count", "feature-rows", "file", "endpoint"
  std::string subject;  // node type, relation or matrix name
  std::string expected;
  std::string actual;
  bool pass = false;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool pass() const;
  std::vector<Finding> failures() const;
  std::string to_text() const;
};

/// Compares manifest counts against the graph, checks every matrix has one
/// row per node of its bound type, and re-checks edge endpoints.
ValidationReport validate_dataset(const DatasetManifest& manifest, const HeteroGraph& g,
                                  const std::map<std::string, FeatureMatrix>& features);

// ---- URL lexical filter ----------------------------------------------------

enum class UrlVerdict { Keep, Drop, Neutral };
std::string_view to_string(UrlVerdict v);

struct UrlFilterConfig {
  std::vector<std::string> keep_keywords;
  std::vector<std::string> drop_keywords;
  /// Callers explore extra internal pages when fewer than this many links
  /// are kept. No default is assumed.
  std::optional<std::size_t> supplementary_trigger;

  static UrlFilterConfig standard();
  void validate() const;
};

UrlVerdict url_lexical_filter(std::string_view url, const UrlFilterConfig& cfg);
bool needs_supplementary_pages(const std::vector<UrlVerdict>& verdicts, const UrlFilterConfig& cfg);

}  // namespace cmag::io
