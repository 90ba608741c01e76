#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmag/graph.hpp"
#include "cmag/ingestion.hpp"

namespace cmag::harness {

// ---- node payloads ---------------------------------------------------------
//
// `key=value;key=value`, with `|` separating the values of a multi-valued
// key. A backslash escapes the next character.

using Payload = std::map<std::string, std::vector<std::string>>;

Payload parse_payload(std::string_view text);
std::string format_payload(const Payload& p);

/// Keys read from node payloads when assembling tabular features.
struct PayloadSchema {
  std::string text_key = "description";
  std::vector<std::string> manufacturer_categorical{"industry", "certification", "country"};
  std::vector<std::string> manufacturer_numeric{"employees", "latitude", "longitude"};
  std::vector<std::string> product_categorical{"category"};
};

// ---- datasets --------------------------------------------------------------

/// Everything the variants are built from. `mag` holds makes, has_attribute
/// and has_image without reverses. Embeddings are the precomputed 768-D
/// text/image vectors, one row per node.
struct Dataset {
  HeteroGraph mag;
  std::array<std::vector<NodeRecord>, kNumNodeTypes> nodes;
  Matrix manufacturer_text, product_text, attribute_text, image_embedding;

  std::map<std::string, FeatureMatrix> embeddings() const;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

/// Manifest file keys: `<type>_nodes` node tables, one edge table per
/// relation name, and one embedding file per entry of Dataset::embeddings().
struct LoadedDataset {
  Dataset data;
  io::DatasetManifest manifest;
  io::ValidationReport report;
};

/// `path` is a manifest or a directory holding manifest.json. Structural
/// problems (bad tables, dangling ids, missing files) become report
/// findings where possible; `data` is only usable when report.pass().
LoadedDataset load_dataset(const std::filesystem::path& path);

/// load_dataset, throwing with the failed findings listed.
Dataset load_valid_dataset(const std::filesystem::path& path);

/// Writes tables, embeddings and a manifest whose counts match `d`.
void save_dataset(const std::filesystem::path& dir, const Dataset& d);

// ---- synthetic data --------------------------------------------------------

/// Planted-cluster generator. Manufacturers, products, attributes and
/// images each get a hidden cluster; `*_signal` in [0,1] mixes the cluster
/// centroid into a node's embedding (0 = pure noise). Manufacturer
/// payloads and product categories are cluster-free noise.
struct SynthConfig {
  std::size_t manufacturers = 120;
  std::size_t products = 240;
  std::size_t clusters = 4;
  std::size_t attributes_per_cluster = 10;
  std::size_t attributes_per_manufacturer = 4;
  std::size_t makers_per_product = 2;
  std::size_t images_per_manufacturer = 2;
  std::size_t embedding_dim = 768;
  /// Fraction of makes / has_attribute edges rewired to a random cluster.
  double makes_noise = 0.1;
  double attribute_noise = 0.0;
  double text_signal = 0.0;
  double product_signal = 0.0;
  double attribute_signal = 0.0;
  double image_signal = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  Dataset data;
  std::vector<std::uint32_t> manufacturer_cluster;
  std::vector<std::uint32_t> product_cluster;
};

SynthDataset synthesize(const SynthConfig& cfg);

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace cmag::harness
