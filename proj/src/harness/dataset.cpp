#include "cmag/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cmag/error.hpp"
#include "cmag/rng.hpp"

namespace fs = std::filesystem;

namespace cmag::harness {

// ---- payloads ----------------------------------------------------------------

Payload parse_payload(std::string_view text) {
  Payload out;
  std::string key, value;
  std::vector<std::string> values;
  bool in_value = false;
  auto finish_value = [&] {
    values.push_back(value);
    value.clear();
  };
  auto finish_pair = [&] {
    if (!in_value) {
      if (!key.empty()) fail(ErrorCode::BadFormat, "payload field '" + key + "' has no '='");
      return;
    }
    finish_value();
    if (key.empty()) fail(ErrorCode::BadFormat, "payload has an empty key");
    auto& slot = out[key];
    for (auto& v : values)
      if (!v.empty()) slot.push_back(std::move(v));
    key.clear();
    values.clear();
    in_value = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (++i == text.size()) fail(ErrorCode::BadFormat, "payload ends in a dangling escape");
      (in_value ? value : key) += text[i];
      continue;
    }
    if (c == ';') {
      finish_pair();
    } else if (!in_value && c == '=') {
      in_value = true;
    } else if (in_value && c == '|') {
      finish_value();
    } else {
      (in_value ? value : key) += c;
    }
  }
  finish_pair();
  return out;
}

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\' || c == ';' || c == '=' || c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string format_payload(const Payload& p) {
  std::string out;
  for (const auto& [k, vs] : p) {
    if (!out.empty()) out += ';';
    out += escape(k) + '=';
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (i) out += '|';
      out += escape(vs[i]);
    }
  }
  return out;
}

// ---- load / save -------------------------------------------------------------

std::map<std::string, FeatureMatrix> Dataset::embeddings() const {
  std::map<std::string, FeatureMatrix> out;
  out["manufacturer_text"] = {NodeType::Manufacturer, manufacturer_text};
  out["product_text"] = {NodeType::Product, product_text};
  if (mag.num_nodes(NodeType::Attribute) > 0) out["attribute_text"] = {NodeType::Attribute, attribute_text};
  if (mag.num_nodes(NodeType::Image) > 0) out["image_embedding"] = {NodeType::Image, image_embedding};
  return out;
}

namespace {

std::string node_key(NodeType t) { return std::string(to_string(t)) + "_nodes"; }

const std::array<Relation, 3>& base_relations() {
  static const std::array<Relation, 3> r{relations::makes(), relations::has_attribute(), relations::has_image()};
  return r;
}

io::Finding failed(std::string check, std::string subject, std::string expected, std::string actual) {
  return {std::move(check), std::move(subject), std::move(expected), std::move(actual), false};
}

}  // namespace

LoadedDataset load_dataset(const fs::path& path) {
  LoadedDataset out;
  const fs::path manifest_path = fs::is_directory(path) ? path / kManifestFile : path;
  out.manifest = io::load_manifest(manifest_path);
  const io::DatasetManifest& man = out.manifest;
  auto& findings = out.report.findings;

  auto require_key = [&](const std::string& key) {
    if (man.has_file(key)) return true;
    findings.push_back(failed("file", key, "listed", "absent"));
    return false;
  };
  auto readable = [&](const std::string& key) { return man.has_file(key) && fs::exists(man.resolve(key)); };

  std::vector<NodeTable> node_tables;
  for (NodeType t : kAllNodeTypes) {
    const std::string key = node_key(t);
    const bool required = t == NodeType::Manufacturer || t == NodeType::Product;
    if (!man.has_file(key)) {
      if (required) require_key(key);
      continue;
    }
    if (!readable(key)) continue;  // reported by validate_dataset
    try {
      node_tables.push_back(io::read_node_table(man.resolve(key), t));
    } catch (const Error& e) {
      findings.push_back(failed("load", key, "readable", e.what()));
    }
  }
  std::vector<EdgeTable> edge_tables;
  for (const Relation& r : base_relations()) {
    if (!man.has_file(r.name)) {
      if (r.name == relations::kMakes) require_key(r.name);
      continue;
    }
    if (!readable(r.name)) continue;
    try {
      edge_tables.push_back(io::read_edge_table(man.resolve(r.name), r));
    } catch (const Error& e) {
      findings.push_back(failed("load", r.name, "readable", e.what()));
    }
  }

  bool graph_ok = findings.empty();
  if (graph_ok) {
    try {
      BuildResult built = build_graph(node_tables, edge_tables);
      if (built.duplicates_removed > 0) {
        warn(std::to_string(built.duplicates_removed) + " duplicate edges removed while loading " +
             manifest_path.string());
      }
      out.data.mag = std::move(built.graph);
      for (NodeTable& t : node_tables) {
        std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        out.data.nodes[index_of(t.type)] = std::move(t.rows);
      }
    } catch (const Error& e) {
      findings.push_back(failed("graph", manifest_path.string(), "consistent tables", e.what()));
      graph_ok = false;
    }
  }

  std::map<std::string, FeatureMatrix> features;
  const std::array<std::pair<const char*, NodeType>, 4> emb_keys{{{"manufacturer_text", NodeType::Manufacturer},
                                                                  {"product_text", NodeType::Product},
                                                                  {"attribute_text", NodeType::Attribute},
                                                                  {"image_embedding", NodeType::Image}}};
  for (const auto& [key, type] : emb_keys) {
    const bool required = type == NodeType::Manufacturer || type == NodeType::Product ||
                          (graph_ok && out.data.mag.num_nodes(type) > 0);
    if (!man.has_file(key)) {
      if (required) require_key(key);
      continue;
    }
    if (!readable(key)) continue;
    try {
      features[key] = {type, io::load_embeddings(man.resolve(key))};
    } catch (const Error& e) {
      findings.push_back(failed("load", key, "readable", e.what()));
    }
  }

  if (graph_ok) {
    io::ValidationReport rest = io::validate_dataset(man, out.data.mag, features);
    findings.insert(findings.end(), rest.findings.begin(), rest.findings.end());
  } else {
    for (const auto& [key, p] : man.files) {
      if (!fs::exists(man.resolve(key))) findings.push_back(failed("file", key, "exists", "missing"));
    }
  }
  auto take = [&](const char* key) { return features.contains(key) ? features[key].values : Matrix(); };
  out.data.manufacturer_text = take("manufacturer_text");
  out.data.product_text = take("product_text");
  out.data.attribute_text = take("attribute_text");
  out.data.image_embedding = take("image_embedding");
  return out;
}

Dataset load_valid_dataset(const fs::path& path) {
  LoadedDataset l = load_dataset(path);
  if (!l.report.pass()) {
    std::string msg = "dataset " + path.string() + " failed validation:";
    for (const auto& f : l.report.failures()) {
      msg += "\n  " + f.check + " " + f.subject + ": expected " + f.expected + ", got " + f.actual;
    }
    fail(ErrorCode::ValidationFailed, msg);
  }
  return std::move(l.data);
}

void save_dataset(const fs::path& dir, const Dataset& d) {
  fs::create_directories(dir);
  io::DatasetManifest man;
  man.base_dir = dir;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t n = d.mag.num_nodes(t);
    if (n == 0 && t != NodeType::Manufacturer && t != NodeType::Product) continue;
    if (d.nodes[index_of(t)].size() != n) {
      fail(ErrorCode::ShapeMismatch, "save_dataset: " + std::string(to_string(t)) + " records do not match the graph");
    }
    const std::string key = node_key(t);
    man.nodes[std::string(to_string(t))] = static_cast<long long>(n);
    man.files[key] = key + ".csv";
    io::write_node_table(dir / man.files[key], {t, d.nodes[index_of(t)]});
  }
  for (const Relation& r : base_relations()) {
    if (!d.mag.has_relation(r.name)) continue;
    man.edges[r.name] = static_cast<long long>(d.mag.num_edges(r.name));
    man.files[r.name] = r.name + ".csv";
    io::write_edge_table(dir / man.files[r.name], {r, d.mag.edges(r.name)});
  }
  for (const auto& [key, fm] : d.embeddings()) {
    man.files[key] = key + ".emb";
    io::write_embeddings(dir / man.files[key], fm.values);
  }
  io::save_manifest(dir / kManifestFile, man);
}

// ---- synthetic generator -----------------------------------------------------

void SynthConfig::validate() const {
  auto unit = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::InvalidArgument, std::string(what) + " must lie in [0, 1]");
  };
  if (manufacturers < 2 || products < 2) fail(ErrorCode::InvalidArgument, "synth: need at least 2 manufacturers and products");
  if (clusters == 0 || clusters > manufacturers || clusters > products) {
    fail(ErrorCode::InvalidArgument, "synth: clusters must be in [1, min(manufacturers, products)]");
  }
  if (attributes_per_manufacturer > attributes_per_cluster) {
    fail(ErrorCode::InvalidArgument, "synth: attributes_per_manufacturer exceeds the attribute pool");
  }
  if (makers_per_product == 0 || makers_per_product > manufacturers / clusters) {
    fail(ErrorCode::InvalidArgument, "synth: makers_per_product must be in [1, manufacturers / clusters]");
  }
  if (embedding_dim < 2) fail(ErrorCode::InvalidArgument, "synth: embedding_dim must be at least 2");
  unit(makes_noise, "makes_noise");
  unit(attribute_noise, "attribute_noise");
  unit(text_signal, "text_signal");
  unit(product_signal, "product_signal");
  unit(attribute_signal, "attribute_signal");
  unit(image_signal, "image_signal");
}

namespace {

constexpr std::array<const char*, 6> kIndustries{"machining", "casting", "plastics", "electronics", "textiles", "chemicals"};
constexpr std::array<const char*, 4> kCertifications{"iso9001", "iso14001", "as9100", "iatf16949"};
constexpr std::array<const char*, 5> kCountries{"us", "de", "cn", "mx", "in"};
constexpr std::array<const char*, 8> kCategories{"fasteners", "valves", "pumps", "bearings",
                                                 "sensors", "cables", "housings", "gears"};

std::string word(std::size_t i) {
  static constexpr std::array<const char*, 16> kSyllables{"ka", "lo", "mi", "ne", "ru", "sa", "te", "vo",
                                                          "bi", "da", "fu", "go", "hi", "jo", "pe", "zu"};
  return std::string(kSyllables[i % 16]) + kSyllables[(i / 16) % 16] + kSyllables[(i / 256) % 16];
}

/// Text made of generic words, each swapped for a cluster word with
/// probability `signal`.
std::string description(const rng::Stream& rs, std::uint64_t node, std::uint32_t cluster, double signal) {
  constexpr std::size_t kWords = 12, kGeneric = 200, kPerCluster = 20;
  std::string out;
  for (std::size_t w = 0; w < kWords; ++w) {
    if (w) out += ' ';
    if (rs.uniform(node, 3 * w) < signal) {
      out += word(kGeneric + cluster * kPerCluster + rs.below(kPerCluster, node, 3 * w + 1));
    } else {
      out += word(rs.below(kGeneric, node, 3 * w + 2));
    }
  }
  return out;
}

/// Unit rows of signal * centroid + (1 - signal) * noise, rounded to float
/// so the on-disk copy is identical.
Matrix planted_embeddings(const std::vector<std::uint32_t>& cluster, std::size_t k, std::size_t dim, double signal,
                          const rng::Stream& rs) {
  auto unit_row = [&](const rng::Stream& s, std::uint64_t i, std::vector<double>& v) {
    double n = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      v[j] = s.normal(i, j);
      n += v[j] * v[j];
    }
    for (double& x : v) x /= std::sqrt(n);
  };
  Matrix centroids(k, dim);
  std::vector<double> tmp(dim);
  for (std::size_t c = 0; c < k; ++c) {
    unit_row(rs.derive(1), c, tmp);
    std::copy(tmp.begin(), tmp.end(), centroids.row(c).begin());
  }
  Matrix out(cluster.size(), dim);
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    unit_row(rs.derive(2), i, tmp);
    double n = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      tmp[j] = signal * centroids(cluster[i], j) + (1.0 - signal) * tmp[j];
      n += tmp[j] * tmp[j];
    }
    for (std::size_t j = 0; j < dim; ++j) out(i, j) = static_cast<float>(tmp[j] / std::sqrt(n));
  }
  return out;
}

std::string numbered(std::string_view prefix, std::size_t i) {
  std::string n = std::to_string(i);
  return std::string(prefix) + "-" + std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
}

}  // namespace

SynthDataset synthesize(const SynthConfig& cfg) {
  cfg.validate();
  const rng::Stream rs(cfg.seed, "synth");
  const std::size_t k = cfg.clusters;
  SynthDataset out;
  auto& mc = out.manufacturer_cluster;
  auto& pc = out.product_cluster;
  for (std::size_t m = 0; m < cfg.manufacturers; ++m) mc.push_back(static_cast<std::uint32_t>(m % k));
  for (std::size_t p = 0; p < cfg.products; ++p) pc.push_back(static_cast<std::uint32_t>(p % k));

  // members[c] lists the manufacturers of cluster c
  std::vector<std::vector<std::uint32_t>> members(k);
  for (std::uint32_t m = 0; m < cfg.manufacturers; ++m) members[mc[m]].push_back(m);

  EdgeList makes;
  const rng::Stream rmk = rs.derive(rng::tag("makes"));
  for (std::uint32_t p = 0; p < cfg.products; ++p) {
    std::set<std::uint32_t> makers;
    for (std::uint64_t draw = 0; makers.size() < cfg.makers_per_product; ++draw) {
      const bool noisy = rmk.uniform(p, 3 * draw) < cfg.makes_noise;
      const auto& pool = members[noisy ? rmk.below(k, p, 3 * draw + 1) : pc[p]];
      makers.insert(pool[rmk.below(pool.size(), p, 3 * draw + 2)]);
    }
    for (std::uint32_t m : makers) makes.push_back({m, p});
  }

  const std::size_t n_attr = k * cfg.attributes_per_cluster;
  std::vector<std::uint32_t> ac(n_attr);
  for (std::size_t a = 0; a < n_attr; ++a) ac[a] = static_cast<std::uint32_t>(a / cfg.attributes_per_cluster);
  EdgeList has_attr;
  const rng::Stream rat = rs.derive(rng::tag("attributes"));
  for (std::uint32_t m = 0; m < cfg.manufacturers; ++m) {
    std::set<std::uint32_t> picked;
    for (std::uint64_t draw = 0; picked.size() < cfg.attributes_per_manufacturer; ++draw) {
      const bool noisy = rat.uniform(m, 2 * draw) < cfg.attribute_noise;
      const std::uint64_t a = noisy ? rat.below(n_attr, m, 2 * draw + 1)
                                    : mc[m] * cfg.attributes_per_cluster +
                                          rat.below(cfg.attributes_per_cluster, m, 2 * draw + 1);
      picked.insert(static_cast<std::uint32_t>(a));
    }
    for (std::uint32_t a : picked) has_attr.push_back({m, a});
  }

  EdgeList has_img;
  std::vector<std::uint32_t> ic;
  for (std::uint32_t m = 0; m < cfg.manufacturers; ++m) {
    for (std::size_t i = 0; i < cfg.images_per_manufacturer; ++i) {
      has_img.push_back({m, static_cast<std::uint32_t>(ic.size())});
      ic.push_back(mc[m]);
    }
  }

  std::vector<std::pair<Relation, EdgeList>> rels{{relations::makes(), makes}};
  if (n_attr > 0) rels.emplace_back(relations::has_attribute(), has_attr);
  if (!ic.empty()) rels.emplace_back(relations::has_image(), has_img);
  Dataset& d = out.data;
  d.mag = HeteroGraph::create({cfg.manufacturers, cfg.products, n_attr, ic.size()}, rels);

  const rng::Stream rp = rs.derive(rng::tag("payload"));
  for (std::uint32_t m = 0; m < cfg.manufacturers; ++m) {
    Payload p;
    p["description"] = {description(rp.derive(1), m, mc[m], cfg.text_signal)};
    p["industry"] = {kIndustries[rp.below(kIndustries.size(), m, 0)]};
    for (std::size_t c = 0; c < kCertifications.size(); ++c)
      if (rp.uniform(m, 10 + c) < 0.3) p["certification"].push_back(kCertifications[c]);
    p["country"] = {kCountries[rp.below(kCountries.size(), m, 1)]};
    if (rp.uniform(m, 2) >= 0.1) p["employees"] = {std::to_string(10 + rp.below(5000, m, 3))};
    p["latitude"] = {std::to_string(-60.0 + 120.0 * rp.uniform(m, 4))};
    p["longitude"] = {std::to_string(-180.0 + 360.0 * rp.uniform(m, 5))};
    d.nodes[0].push_back({m, numbered("manufacturer", m), format_payload(p)});
  }
  for (std::uint32_t i = 0; i < cfg.products; ++i) {
    Payload p;
    p["description"] = {description(rp.derive(2), i, pc[i], cfg.product_signal)};
    p["category"] = {kCategories[rp.derive(3).below(kCategories.size(), i)]};
    d.nodes[1].push_back({i, numbered("product", i), format_payload(p)});
  }
  for (std::uint32_t a = 0; a < n_attr; ++a) d.nodes[2].push_back({a, numbered("attribute", a), "kind=capability"});
  for (std::uint32_t i = 0; i < ic.size(); ++i) d.nodes[3].push_back({i, numbered("image", i), ""});

  const std::size_t dim = cfg.embedding_dim;
  d.manufacturer_text = planted_embeddings(mc, k, dim, cfg.text_signal, rs.derive(rng::tag("mtext")));
  d.product_text = planted_embeddings(pc, k, dim, cfg.product_signal, rs.derive(rng::tag("ptext")));
  if (n_attr > 0) {
    d.attribute_text = planted_embeddings(ac, k, dim, cfg.attribute_signal, rs.derive(rng::tag("atext")));
  }
  if (!ic.empty()) d.image_embedding = planted_embeddings(ic, k, dim, cfg.image_signal, rs.derive(rng::tag("image")));
  return out;
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"manufacturers", c.manufacturers},
          {"products", c.products},
          {"clusters", c.clusters},
          {"attributes_per_cluster", c.attributes_per_cluster},
          {"attributes_per_manufacturer", c.attributes_per_manufacturer},
          {"makers_per_product", c.makers_per_product},
          {"images_per_manufacturer", c.images_per_manufacturer},
          {"embedding_dim", c.embedding_dim},
          {"makes_noise", c.makes_noise},
          {"attribute_noise", c.attribute_noise},
          {"text_signal", c.text_signal},
          {"product_signal", c.product_signal},
          {"attribute_signal", c.attribute_signal},
          {"image_signal", c.image_signal},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) fail(ErrorCode::InvalidArgument, "synth config: unknown key '" + key + "'");
  }
  nlohmann::json merged = defaults;
  merged.update(j);
  try {
    c.manufacturers = merged.at("manufacturers").get<std::size_t>();
    c.products = merged.at("products").get<std::size_t>();
    c.clusters = merged.at("clusters").get<std::size_t>();
    c.attributes_per_cluster = merged.at("attributes_per_cluster").get<std::size_t>();
    c.attributes_per_manufacturer = merged.at("attributes_per_manufacturer").get<std::size_t>();
    c.makers_per_product = merged.at("makers_per_product").get<std::size_t>();
    c.images_per_manufacturer = merged.at("images_per_manufacturer").get<std::size_t>();
    c.embedding_dim = merged.at("embedding_dim").get<std::size_t>();
    c.makes_noise = merged.at("makes_noise").get<double>();
    c.attribute_noise = merged.at("attribute_noise").get<double>();
    c.text_signal = merged.at("text_signal").get<double>();
    c.product_signal = merged.at("product_signal").get<double>();
    c.attribute_signal = merged.at("attribute_signal").get<double>();
    c.image_signal = merged.at("image_signal").get<double>();
    c.seed = merged.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace cmag::harness
