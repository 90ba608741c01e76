#include <doctest.h>

#include <filesystem>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "cmag/error.hpp"
#include "cmag/harness/experiment.hpp"
#include "cmag/ingestion.hpp"

namespace fs = std::filesystem;
using namespace cmag;
using namespace cmag::harness;
using nlohmann::json;

namespace {

SynthConfig small_synth(std::uint64_t seed = 0) {
  SynthConfig c;
  c.manufacturers = 40;
  c.products = 80;
  c.clusters = 2;
  c.attributes_per_cluster = 6;
  c.attributes_per_manufacturer = 3;
  c.images_per_manufacturer = 1;
  c.embedding_dim = 24;
  c.seed = seed;
  return c;
}

ExperimentSpec small_spec(std::string variant, const fs::path& dataset) {
  ExperimentSpec s;
  s.variant = std::move(variant);
  s.dataset = dataset;
  s.seeds = {0, 1};
  s.train.hidden = 16;
  s.train.lr_grid = {1e-2};
  s.train.max_epochs = 15;
  s.train.patience = 5;
  s.pretrain.input_dim = 24;
  s.pretrain.max_epochs = 10;
  s.pretrain.patience = 5;
  return s;
}

bool identical(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && std::ranges::equal(a.values(), b.values());
}

fs::path scratch(std::string_view name) {
  const fs::path p = fs::temp_directory_path() / ("cmag_test_harness_" + std::string(name));
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text_file(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("variant table matches the six graph variants") {
  const auto& t = variant_table();
  REQUIRE(t.size() == 6);
  struct Row {
    const char* name;
    Hierarchy h;
    TextEmbedding text;
    bool images, bipartite;
  };
  const Row expected[] = {
      {"ag_tfidf", Hierarchy::Flat, TextEmbedding::Tfidf, false, true},
      {"ag_jina", Hierarchy::Flat, TextEmbedding::Clip, false, true},
      {"fag1", Hierarchy::Flat, TextEmbedding::Clip, false, false},
      {"fmag2", Hierarchy::Flat, TextEmbedding::Clip, true, false},
      {"cmag1", Hierarchy::Cascade, TextEmbedding::Clip, false, true},
      {"cmag2", Hierarchy::Cascade, TextEmbedding::Clip, true, true},
  };
  for (std::size_t i = 0; i < 6; ++i) {
    CAPTURE(i);
    CHECK(t[i].name == expected[i].name);
    CHECK(t[i].hierarchy == expected[i].h);
    CHECK(t[i].text == expected[i].text);
    CHECK(t[i].images == expected[i].images);
    CHECK(t[i].bipartite == expected[i].bipartite);
    CHECK(&variant(expected[i].name) == &t[i]);
  }
  CHECK_THROWS_AS(variant("cmag3"), Error);
}

TEST_CASE("payload parsing") {
  const Payload p = parse_payload("industry=casting;certification=iso9001|as9100;employees=120");
  CHECK(p.at("industry") == std::vector<std::string>{"casting"});
  CHECK(p.at("certification") == std::vector<std::string>{"iso9001", "as9100"});
  CHECK(p.at("employees") == std::vector<std::string>{"120"});
  CHECK(parse_payload("").empty());
  CHECK(parse_payload("a=;b=x").at("a").empty());
  CHECK(parse_payload(R"(description=a\;b\|c\=d)").at("description") == std::vector<std::string>{"a;b|c=d"});
  CHECK_THROWS_AS(parse_payload("novalue"), Error);
  CHECK_THROWS_AS(parse_payload("=x"), Error);
  CHECK_THROWS_AS(parse_payload("a=x\\"), Error);
  const Payload q{{"k;1", {"v=1", "w|2"}}, {"plain", {"x"}}};
  CHECK(parse_payload(format_payload(q)) == q);
}

TEST_CASE("synthetic generator") {
  const SynthConfig c = small_synth(3);
  const SynthDataset a = synthesize(c);
  const SynthDataset b = synthesize(c);
  CHECK(a.data.mag == b.data.mag);
  CHECK(identical(a.data.manufacturer_text, b.data.manufacturer_text));
  CHECK(a.data.mag.num_nodes(NodeType::Attribute) == 12);
  CHECK(a.data.mag.num_nodes(NodeType::Image) == 40);
  CHECK(a.data.mag.num_edges("makes") == 80 * c.makers_per_product);
  CHECK(a.data.mag.num_edges("has_attribute") == 40 * 3);
  CHECK(a.data.manufacturer_text.cols() == 24);
  // attribute edges carry the cluster: every attribute belongs to its manufacturer's group
  for (const Edge& e : a.data.mag.edges("has_attribute")) CHECK(e.dst / 6 == a.manufacturer_cluster[e.src]);
  for (std::size_t i = 0; i < a.data.product_text.rows(); ++i) {
    double n = 0;
    for (double x : a.data.product_text.row(i)) n += x * x;
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(synthesize(small_synth(4)).data.mag != a.data.mag);
  SynthConfig bad = c;
  bad.clusters = 0;
  CHECK_THROWS(synthesize(bad));
  bad = c;
  bad.makes_noise = 1.5;
  CHECK_THROWS(synthesize(bad));
  CHECK(to_json(synth_config_from_json(to_json(c))) == to_json(c));
  CHECK_THROWS(synth_config_from_json(json{{"manufactrers", 3}}));
}

TEST_CASE("dataset save and load round trip") {
  const SynthDataset s = synthesize(small_synth(1));
  const fs::path dir = scratch("roundtrip");
  save_dataset(dir, s.data);
  const LoadedDataset l = load_dataset(dir);
  CHECK(l.report.pass());
  CHECK(l.data.mag == s.data.mag);
  CHECK(identical(l.data.manufacturer_text, s.data.manufacturer_text));
  CHECK(identical(l.data.image_embedding, s.data.image_embedding));
  CHECK(l.data.nodes[0][5].payload == s.data.nodes[0][5].payload);
  CHECK(l.manifest.nodes.at("manufacturer") == 40);
  CHECK(l.manifest.edges.at("has_attribute") == 120);
  CHECK_NOTHROW(load_valid_dataset(dir / kManifestFile));
  fs::remove_all(dir);
}

TEST_CASE("mutated datasets fail validation with the right finding") {
  const SynthDataset s = synthesize(small_synth(2));
  struct Mutation {
    const char* name;
    const char* check;
    const char* subject;
    std::function<void(const fs::path&)> apply;
  };
  auto edit_manifest = [](const fs::path& dir, auto fn) {
    json j = json::parse(io::read_text_file(dir / kManifestFile));
    fn(j);
    io::write_text_file(dir / kManifestFile, j.dump(2));
  };
  const std::vector<Mutation> mutations{
      {"node-count", "node-count", "manufacturer",
       [&](const fs::path& d) { edit_manifest(d, [](json& j) { j["nodes"]["manufacturer"] = 39; }); }},
      {"edge-count", "edge-count", "makes",
       [&](const fs::path& d) { edit_manifest(d, [](json& j) { j["edges"]["makes"] = 1; }); }},
      {"missing-file", "file", "image_embedding", [](const fs::path& d) { fs::remove(d / "image_embedding.emb"); }},
      {"feature-rows", "feature-rows", "product_text",
       [](const fs::path& d) { io::write_embeddings(d / "product_text.emb", cmag::Matrix(3, 24)); }},
      {"checksum", "load", "manufacturer_text",
       [](const fs::path& d) {
         std::fstream f(d / "manufacturer_text.emb", std::ios::in | std::ios::out | std::ios::binary);
         f.seekp(40);
         f.put('\x7f');
       }},
      {"dangling-endpoint", "graph", "", [](const fs::path& d) {
         io::write_text_file(d / "makes.csv", io::read_text_file(d / "makes.csv") + "0,9999\n");
       }},
  };
  for (const Mutation& m : mutations) {
    CAPTURE(m.name);
    const fs::path dir = scratch(m.name);
    save_dataset(dir, s.data);
    m.apply(dir);
    const LoadedDataset l = load_dataset(dir);
    CHECK_FALSE(l.report.pass());
    bool named = false;
    for (const auto& f : l.report.failures()) {
      named = named || (f.check == m.check && (std::string(m.subject).empty() || f.subject == m.subject));
    }
    CHECK(named);
    CHECK_THROWS_AS(load_valid_dataset(dir), Error);
    fs::remove_all(dir);
  }
}

TEST_CASE("tabular and text features") {
  const SynthDataset s = synthesize(small_synth(5));
  const Matrix tab = manufacturer_tabular(s.data, {});
  // 6 industries, up to 4 certifications, 5 countries, 3 numeric columns
  CHECK(tab.rows() == 40);
  CHECK(tab.cols() <= 6 + 4 + 5 + 3);
  CHECK(tab.all_finite());
  const Matrix cat = product_categorical(s.data, {});
  for (std::size_t i = 0; i < cat.rows(); ++i) {
    double sum = 0;
    for (double x : cat.row(i)) sum += x;
    CHECK(sum == 1.0);
  }
  BuildOptions o;
  const auto [mt, pt] = text_features(s.data, TextEmbedding::Tfidf, o);
  CHECK(mt.rows() == 40);
  CHECK(pt.rows() == 80);
  const auto [mc, pc] = text_features(s.data, TextEmbedding::Clip, o);
  CHECK(mc.cols() == 24);
}

TEST_CASE("build_variant shapes") {
  const SynthDataset s = synthesize(small_synth(6));
  BuildOptions o;
  o.pretrain.input_dim = 24;
  o.pretrain.max_epochs = 8;
  o.pretrain.patience = 4;

  const VariantData cmag2 = build_variant(variant("cmag2"), s.data, 7, o);
  CHECK(cmag2.features[0].cols() == 64);
  CHECK(cmag2.features[1].cols() == 64);
  CHECK(cmag2.graph.num_relations() == 2);
  CHECK(cmag2.graph.has_relation("rev_makes"));
  REQUIRE(cmag2.pretrain.has_value());
  CHECK(cmag2.pretrain->params.contains("stage1/conv0/rev_has_image/W_neigh"));
  CHECK(cmag2.eval_relations.empty());

  const VariantData tfidf = build_variant(variant("ag_tfidf"), s.data, 7, o);
  CHECK_FALSE(tfidf.pretrain.has_value());
  CHECK(tfidf.features[0].cols() == 64);
  CHECK(tfidf.graph.num_relations() == 2);

  const VariantData fag1 = build_variant(variant("fag1"), s.data, 7, o);
  const VariantData cmag1 = build_variant(variant("cmag1"), s.data, 7, o);
  CHECK(fag1.graph.num_relations() == 4);
  CHECK_FALSE(fag1.graph.has_relation("has_image"));
  CHECK(fag1.features[2].cols() == 64);
  CHECK(fag1.eval_relations == std::vector<std::string>{"makes", "rev_makes"});
  CHECK(cmag1.graph.num_relations() == 2);
  CHECK(cmag1.pretrain.has_value());
  CHECK_FALSE(cmag1.pretrain->params.contains("stage1/conv0/rev_has_image/W_neigh"));

  const VariantData fmag2 = build_variant(variant("fmag2"), s.data, 7, o);
  CHECK(fmag2.graph.num_relations() == 6);
  CHECK(fmag2.features[3].rows() == fmag2.graph.num_nodes(NodeType::Image));

  // every variant scores the same split of makes
  for (const VariantData* v : {&tfidf, &fag1, &cmag1, &fmag2}) {
    CHECK(v->split.test_pos == cmag2.split.test_pos);
    CHECK(v->split.val_neg == cmag2.split.val_neg);
  }
  CHECK(cmag2.split.train_pos.size() + cmag2.split.val_pos.size() + cmag2.split.test_pos.size() ==
        s.data.mag.num_edges("makes"));
}

TEST_CASE("build_variant image sampling and errors") {
  const SynthDataset s = synthesize(small_synth(8));
  BuildOptions o;
  o.image_ratio = 0.5;
  const VariantData half = build_variant(variant("fmag2"), s.data, 1, o);
  CHECK(half.graph.num_edges("has_image") == 20);
  CHECK(half.images_kept == 20);
  CHECK_THROWS_AS(build_variant(variant("fag1"), s.data, 1, o), Error);
  o.image_ratio = 0.0;
  CHECK_THROWS_AS(build_variant(variant("fmag2"), s.data, 1, o), Error);

  Dataset no_attr = s.data;
  no_attr.mag = strip_relations(s.data.mag, {"makes"});
  CHECK_NOTHROW(build_variant(variant("ag_jina"), no_attr, 1, {}));
  try {
    build_variant(variant("cmag1"), no_attr, 1, {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingModality);
  }
  BuildOptions wrong_dim;  // stage-1 input stays 768 against 24-D data
  CHECK_THROWS_AS(build_variant(variant("cmag1"), s.data, 1, wrong_dim), Error);
}

TEST_CASE("experiment spec json") {
  ExperimentSpec s = small_spec("cmag2", "/data/x");
  s.pretrain_encoder = nn::ConvKind::Rgcn;
  s.image_ratio = 0.2;
  s.model = train::ModelKind::HeteroGat;
  const json j = to_json(s);
  CHECK(j.at("pretrain_encoder") == "rgcn");
  CHECK(j.at("model") == "heterogat");
  const ExperimentSpec back = experiment_spec_from_json(j, "/");
  CHECK(to_json(back) == j);
  json bad = j;
  bad["train"]["seed"] = 3;
  CHECK_THROWS(experiment_spec_from_json(bad, "/"));
  bad = j;
  bad["variant"] = "ag_jina";  // ratio 0.2 without images
  CHECK_THROWS(experiment_spec_from_json(bad, "/"));
  bad = j;
  bad["seeds"] = json::array();
  CHECK_THROWS(experiment_spec_from_json(bad, "/"));
  bad = j;
  bad["pretrain_encoder"] = "gat";
  CHECK_THROWS(experiment_spec_from_json(bad, "/"));
  bad = j;
  bad["extra"] = 1;
  CHECK_THROWS(experiment_spec_from_json(bad, "/"));
  json rel = j;
  rel["dataset"] = "sub/manifest.json";
  CHECK(experiment_spec_from_json(rel, "/base").dataset == fs::path("/base/sub/manifest.json"));
  const ExperimentSpec defaults;
  CHECK(defaults.seeds.size() == 5);
}

TEST_CASE("experiment archive is complete and byte-identical on rerun") {
  const fs::path data_dir = scratch("experiment_data");
  save_dataset(data_dir, synthesize(small_synth(9)).data);
  const ExperimentSpec spec = small_spec("cmag1", data_dir / kManifestFile);
  const fs::path a = scratch("experiment_a"), b = scratch("experiment_b");
  const ExperimentResult ra = run_experiment(spec, a);
  run_experiment(spec, b);
  CHECK(ra.seeds.size() == 2);
  CHECK(ra.roc_auc.values.size() == 2);
  for (const char* f : {"experiment.json", "environment.json", "aggregate.json", "aggregate.csv",
                        "seed_0/result.json", "seed_0/best_params.ckpt", "seed_1/result.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
  }
  CHECK(read_tree(a) == read_tree(b));

  // the archive carries enough to rebuild the run
  const ArchiveSummary loaded = load_archive(a);
  const ExperimentResult again = run_experiment(loaded.spec);
  CHECK(again.roc_auc.values == ra.roc_auc.values);
  CHECK(again.pr_auc.values == ra.pr_auc.values);
  CHECK(loaded.aggregate.at("completed") == 2);
  const json r0 = json::parse(io::read_text_file(a / "seed_0/result.json"));
  CHECK(r0.at("status") == "ok");
  CHECK(r0.at("build").contains("pretrain"));
  const nn::ParameterSet p = nn::load_checkpoint(a / "seed_0/best_params.ckpt");
  CHECK(identical(p.value("stage2/conv1/makes/W_neigh"), ra.seeds[0].result.best_params.value("stage2/conv1/makes/W_neigh")));
  for (const auto& d : {a, b, data_dir}) fs::remove_all(d);
}

TEST_CASE("failed seeds are kept with a marker") {
  const SynthDataset s = synthesize(small_synth(10));
  ExperimentSpec spec = small_spec("ag_jina", "/unused");
  spec.train.lr_grid = {1e300};
  const fs::path out = scratch("failed");
  const ExperimentResult r = run_experiment(spec, s.data, out);
  CHECK(r.seeds.size() == 2);
  CHECK(r.seeds[0].failed);
  CHECK(r.aggregate.at("completed") == 0);
  CHECK(r.aggregate.at("failed_seeds") == json::array({0, 1}));
  const json r0 = json::parse(io::read_text_file(out / "seed_0/result.json"));
  CHECK(r0.at("status") == "failed");
  CHECK_FALSE(fs::exists(out / "seed_0/best_params.ckpt"));
  fs::remove_all(out);
}

TEST_CASE("sampling ablation rows") {
  const fs::path data_dir = scratch("ablation_data");
  save_dataset(data_dir, synthesize(small_synth(11)).data);
  ExperimentSpec spec = small_spec("fmag2", data_dir);
  spec.seeds = {0};
  const fs::path out = scratch("ablation");
  const auto rows = run_ablation_sampling(spec, {0.1, 0.2, 0.5},
                                          {train::ModelKind::HeteroSage, train::ModelKind::HeteroGat}, out);
  CHECK(rows.size() == 6);
  const std::string csv = io::read_text_file(out / "sampling.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "ratio,model,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(fs::exists(out / "ratio_0.2/heterogat/aggregate.json"));
  const auto single = run_ablation_sampling(spec, {1.0}, {train::ModelKind::HeteroSage});
  REQUIRE(single.size() == 1);
  CHECK(single[0].ratio == 1.0);
  CHECK_THROWS_AS(run_ablation_sampling(small_spec("cmag1", data_dir), {0.1}, {train::ModelKind::HeteroSage}), Error);
  fs::remove_all(out);
  fs::remove_all(data_dir);
}

namespace {

ArchiveSummary fake_archive(const char* v, train::ModelKind m, double roc, double pr) {
  ArchiveSummary a;
  a.dir = std::string(v) + "_" + std::string(train::to_string(m));
  a.spec.variant = v;
  a.spec.model = m;
  a.aggregate = {{"completed", 5},
                 {"test_roc_auc", {{"mean", roc}, {"std", 0.01}, {"values", json::array()}}},
                 {"test_pr_auc", {{"mean", pr}, {"std", 0.02}, {"values", json::array()}}}};
  return a;
}

}  // namespace

TEST_CASE("results table layout and highlighting") {
  std::vector<ArchiveSummary> archives;
  const double sage[] = {0.6012, 0.6312, 0.6101, 0.6050, 0.7058, 0.6990};
  for (std::size_t i = 0; i < 6; ++i) {
    const char* v = variant_table()[5 - i].name.data();  // out of order on purpose
    archives.push_back(fake_archive(v, train::ModelKind::HeteroSage, sage[5 - i], 0.5 + 0.01 * (5 - i)));
    archives.push_back(fake_archive(v, train::ModelKind::HeteroGat, sage[5 - i] + 0.01, 0.4));
  }
  const ResultsTable t = emit_results_table(archives);
  std::vector<std::string> lines;
  std::istringstream in(t.markdown);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 8);
  CHECK(lines[2].rfind("| ag_tfidf |", 0) == 0);
  CHECK(lines[7].rfind("| cmag2 |", 0) == 0);
  CHECK(lines[6].find("**70.58**") != std::string::npos);
  CHECK(lines[7].find("<u>69.90</u>") != std::string::npos);
  CHECK(lines[3].find("63.12") != std::string::npos);
  CHECK(lines[2].find("**40.00**") == std::string::npos);  // a column of ties gets no highlight
  CHECK(std::count(lines[2].begin(), lines[2].end(), '|') == 6);
  const std::string csv_first = t.csv.substr(t.csv.find('\n') + 1);
  CHECK(csv_first.rfind("ag_tfidf,60.12,50.00,61.12,40.00", 0) == 0);

  const ResultsTable one = emit_results_table({fake_archive("cmag1", train::ModelKind::HeteroSage, 0.70581, 0.6)});
  CHECK(one.markdown.find("| cmag1 | 70.58 | 60.00 | n/a | n/a |") != std::string::npos);
  CHECK(one.markdown.find("**") == std::string::npos);
  CHECK(one.markdown.find("<u>") == std::string::npos);

  CHECK_THROWS(emit_results_table({}));
  CHECK_THROWS(emit_results_table({archives[0], archives[0]}));
}
