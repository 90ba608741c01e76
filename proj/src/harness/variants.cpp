#include "cmag/harness/variants.hpp"

#include <charconv>

#include "cmag/error.hpp"
#include "cmag/features.hpp"
#include "cmag/rng.hpp"

namespace cmag::harness {

std::string_view to_string(Hierarchy h) { return h == Hierarchy::Flat ? "flat" : "cascade"; }
std::string_view to_string(TextEmbedding t) { return t == TextEmbedding::Tfidf ? "tfidf" : "clip"; }

const std::array<VariantSpec, 6>& variant_table() {
  static const std::array<VariantSpec, 6> table{{
      {"ag_tfidf", Hierarchy::Flat, TextEmbedding::Tfidf, false, true},
      {"ag_jina", Hierarchy::Flat, TextEmbedding::Clip, false, true},
      {"fag1", Hierarchy::Flat, TextEmbedding::Clip, false, false},
      {"fmag2", Hierarchy::Flat, TextEmbedding::Clip, true, false},
      {"cmag1", Hierarchy::Cascade, TextEmbedding::Clip, false, true},
      {"cmag2", Hierarchy::Cascade, TextEmbedding::Clip, true, true},
  }};
  return table;
}

const VariantSpec& variant(std::string_view name) {
  for (const VariantSpec& v : variant_table())
    if (v.name == name) return v;
  fail(ErrorCode::InvalidArgument, "unknown variant '" + std::string(name) +
                                       "' (expected ag_tfidf, ag_jina, fag1, fmag2, cmag1 or cmag2)");
}

namespace {

std::vector<Payload> payloads(const Dataset& d, NodeType t) {
  std::vector<Payload> out;
  for (const NodeRecord& r : d.nodes[index_of(t)]) out.push_back(parse_payload(r.payload));
  return out;
}

Matrix categorical_block(const std::vector<Payload>& ps, const std::vector<std::string>& keys) {
  Matrix out(ps.size(), 0);
  for (const std::string& key : keys) {
    std::vector<std::vector<std::string>> column;
    for (const Payload& p : ps) {
      auto it = p.find(key);
      column.push_back(it == p.end() ? std::vector<std::string>{} : it->second);
    }
    out = hconcat(out, features::one_hot(column, features::collect_categories(column)));
  }
  return out;
}

std::optional<double> parse_number(const std::vector<std::string>& vs, std::string_view key) {
  if (vs.empty()) return std::nullopt;
  if (vs.size() > 1) fail(ErrorCode::BadFormat, "numeric field '" + std::string(key) + "' has several values");
  double v = 0;
  const std::string& s = vs.front();
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::BadFormat, "numeric field '" + std::string(key) + "' holds '" + s + "'");
  }
  return v;
}

std::vector<std::string> documents(const std::vector<Payload>& ps, const std::vector<NodeRecord>& rows,
                                   const std::string& key) {
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::string doc = rows[i].name;
    if (auto it = ps[i].find(key); it != ps[i].end())
      for (const auto& v : it->second) doc += " " + v;
    docs.push_back(std::move(doc));
  }
  return docs;
}

Matrix select_rows_by(const Matrix& m, const std::vector<std::uint32_t>& rows) {
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return select_rows(m, idx);
}

}  // namespace

Matrix manufacturer_tabular(const Dataset& d, const PayloadSchema& schema) {
  const auto ps = payloads(d, NodeType::Manufacturer);
  Matrix numeric(ps.size(), schema.manufacturer_numeric.size());
  for (std::size_t c = 0; c < schema.manufacturer_numeric.size(); ++c) {
    const std::string& key = schema.manufacturer_numeric[c];
    std::vector<std::optional<double>> column;
    for (const Payload& p : ps) {
      auto it = p.find(key);
      column.push_back(it == p.end() ? std::nullopt : parse_number(it->second, key));
    }
    const std::vector<double> z = features::standardize(column);
    for (std::size_t i = 0; i < z.size(); ++i) numeric(i, c) = z[i];
  }
  return hconcat(categorical_block(ps, schema.manufacturer_categorical), numeric);
}

Matrix product_categorical(const Dataset& d, const PayloadSchema& schema) {
  return categorical_block(payloads(d, NodeType::Product), schema.product_categorical);
}

std::pair<Matrix, Matrix> text_features(const Dataset& d, TextEmbedding t, const BuildOptions& opts) {
  if (t == TextEmbedding::Clip) {
    if (d.manufacturer_text.rows() != d.mag.num_nodes(NodeType::Manufacturer) ||
        d.product_text.rows() != d.mag.num_nodes(NodeType::Product)) {
      fail(ErrorCode::MissingModality, "text embeddings are missing for manufacturers or products");
    }
    return {d.manufacturer_text, d.product_text};
  }
  const std::string& key = opts.schema.text_key;
  auto tfidf = [&](NodeType type) {
    const auto docs = documents(payloads(d, type), d.nodes[index_of(type)], key);
    return features::tfidf_fit_transform(docs, opts.tfidf_max_features).second;
  };
  return {tfidf(NodeType::Manufacturer), tfidf(NodeType::Product)};
}

Stage1Setup stage1_setup(const Dataset& d, bool images, std::uint64_t seed, const BuildOptions& opts) {
  std::vector<std::string> keep{std::string(relations::kHasAttribute)};
  if (images) keep.emplace_back(relations::kHasImage);
  for (const std::string& r : keep) {
    if (!d.mag.has_relation(r) || d.mag.num_edges(r) == 0) fail(ErrorCode::MissingModality, "no " + r + " edges");
  }
  if (d.attribute_text.rows() != d.mag.num_nodes(NodeType::Attribute)) {
    fail(ErrorCode::MissingModality, "attribute embeddings do not cover every attribute node");
  }
  Stage1Setup out;
  out.graph = strip_relations(d.mag, keep);
  if (images) {
    if (d.image_embedding.rows() != d.mag.num_nodes(NodeType::Image)) {
      fail(ErrorCode::MissingModality, "image embeddings do not cover every image node");
    }
    ImageSample s = sample_image_edges(out.graph, opts.image_ratio, rng::mix64(seed ^ rng::tag("images")));
    out.graph = std::move(s.graph);
    out.images = select_rows_by(d.image_embedding, s.kept_images);
    out.images_kept = s.kept_images.size();
  } else {
    auto counts = out.graph.node_counts();
    counts[index_of(NodeType::Image)] = 0;
    out.graph = out.graph.with_node_counts(counts);
  }
  const std::uint64_t fseed = rng::mix64(seed ^ rng::tag("features"));
  auto input = [&](const Matrix& m, const char* what) {
    return opts.compress_stage1_inputs ? features::compress(m, features::kStage1Dims, fseed, what) : m;
  };
  out.features[0] = d.manufacturer_text;
  out.features[2] = input(d.attribute_text, "stage-1 attribute inputs");
  if (images) out.features[3] = input(out.images, "stage-1 image inputs");
  return out;
}

VariantData build_variant(const VariantSpec& spec, const Dataset& d, std::uint64_t seed, const BuildOptions& opts) {
  if (!(opts.image_ratio > 0.0 && opts.image_ratio <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "image ratio must lie in (0, 1]");
  }
  if (!spec.images && opts.image_ratio != 1.0) {
    fail(ErrorCode::InvalidArgument, "variant " + std::string(spec.name) + " has no images to sample");
  }
  VariantData out;
  out.spec = spec;
  const std::uint64_t fseed = rng::mix64(seed ^ rng::tag("features"));

  const auto [mtext, ptext] = text_features(d, spec.text, opts);
  Matrix m64 = features::assemble_stage2_manufacturer(mtext, manufacturer_tabular(d, opts.schema),
                                                      Matrix(mtext.rows(), 0), fseed);
  const Matrix p64 = features::assemble_product(ptext, product_categorical(d, opts.schema), fseed);

  HeteroGraph g = HeteroGraph::create({d.mag.num_nodes(NodeType::Manufacturer), d.mag.num_nodes(NodeType::Product), 0, 0},
                                      {{relations::makes(), d.mag.edges("makes")}});
  g = add_reverse_edges(g, relations::kMakes);

  if (spec.hierarchy == Hierarchy::Cascade || !spec.bipartite) {
    Stage1Setup side;
    try {
      side = stage1_setup(d, spec.images, seed, opts);
    } catch (const Error& e) {
      fail(e.code(), "variant " + std::string(spec.name) + ": " + e.what());
    }
    out.images_kept = side.images_kept;
    if (spec.hierarchy == Hierarchy::Cascade) {
      train::PretrainConfig pc = opts.pretrain;
      pc.seed = seed;
      if (pc.input_dim != d.manufacturer_text.cols()) {
        fail(ErrorCode::ShapeMismatch, "stage-1 input width " + std::to_string(pc.input_dim) +
                                           " does not match the " + std::to_string(d.manufacturer_text.cols()) +
                                           "-D manufacturer embeddings");
      }
      out.pretrain = train::pretrain_stage1(side.graph, side.features, pc);
      m64 = features::fuse_final_manufacturer(out.pretrain->embeddings, m64, fseed);
    } else {
      g = g.with_node_counts(side.graph.node_counts());
      for (const Relation& r : side.graph.relations()) {
        g = g.with_relation(r, side.graph.edges(r.name));
        g = add_reverse_edges(g, r.name);
      }
      out.features[2] = features::compress(d.attribute_text, features::kNodeDims, fseed, "attribute features");
      if (spec.images) out.features[3] = features::compress(side.images, features::kNodeDims, fseed, "image features");
      out.eval_relations = {std::string(relations::kMakes), relations::reverse_name(relations::kMakes)};
    }
  }
  out.features[0] = m64;
  out.features[1] = p64;
  out.graph = std::move(g);
  out.split = split_edges(out.graph, relations::kMakes, {}, seed);
  return out;
}

}  // namespace cmag::harness
