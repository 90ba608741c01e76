#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/harness/dataset.hpp"
#include "cmag/trainers.hpp"

namespace cmag::harness {

enum class Hierarchy { Flat, Cascade };
enum class TextEmbedding { Tfidf, Clip };

std::string_view to_string(Hierarchy h);
std::string_view to_string(TextEmbedding t);

struct VariantSpec {
  std::string_view name;
  Hierarchy hierarchy = Hierarchy::Flat;
  TextEmbedding text = TextEmbedding::Clip;
  bool images = false;
  bool bipartite = true;
};

/// The six graph variants, in reporting order.
const std::array<VariantSpec, 6>& variant_table();
const VariantSpec& variant(std::string_view name);

struct BuildOptions {
  /// Stage-1 settings for cascade variants; the seed is taken from the
  /// build seed.
  train::PretrainConfig pretrain;
  /// Fraction of has_image edges kept (variants with images only).
  double image_ratio = 1.0;
  std::size_t tfidf_max_features = 2048;
  /// Stage-1 attribute/image inputs: raw embeddings, or SVD-compressed to 32.
  bool compress_stage1_inputs = false;
  PayloadSchema schema;
};

struct VariantData {
  VariantSpec spec;
  HeteroGraph graph;  // every relation paired with its reverse
  TypedMatrices features;
  EdgeSplit split;    // over makes
  /// Relations the scoring graph keeps; empty = the whole graph.
  std::vector<std::string> eval_relations;
  std::size_t images_kept = 0;
  std::optional<train::PretrainResult> pretrain;
};

/// [categorical | numeric] manufacturer block and the product categorical
/// block, read from node payloads.
Matrix manufacturer_tabular(const Dataset& d, const PayloadSchema& schema);
Matrix product_categorical(const Dataset& d, const PayloadSchema& schema);

/// Manufacturer and product text under the chosen embedding: the
/// precomputed vectors, or TF-IDF over the payload text fields.
std::pair<Matrix, Matrix> text_features(const Dataset& d, TextEmbedding t, const BuildOptions& opts);

/// The attribute (and, with `images`, sampled image) graph Stage 1 trains
/// on, with its raw or compressed input features.
struct Stage1Setup {
  HeteroGraph graph;
  TypedMatrices features;
  std::size_t images_kept = 0;
  Matrix images;  // sampled image embeddings, uncompressed
};

Stage1Setup stage1_setup(const Dataset& d, bool images, std::uint64_t seed, const BuildOptions& opts);

VariantData build_variant(const VariantSpec& spec, const Dataset& d, std::uint64_t seed,
                          const BuildOptions& opts = {});

}  // namespace cmag::harness
