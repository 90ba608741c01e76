// Command-line front end: dataset validation, variant building, Stage-1
// pretraining, training, experiments, the image-sampling ablation, reports
// and the synthetic generator.
//
// Exit codes: 0 success, 1 invalid input (arguments, configs, datasets),
// 2 failure while running.

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmag/error.hpp"
#include "cmag/harness/experiment.hpp"
#include "cmag/ingestion.hpp"
#include "cmag/kernels.hpp"
#include "cmag/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmag;
using namespace cmag::harness;

namespace {

enum Exit : int { kOk = 0, kInvalid = 1, kRuntime = 2 };

/// Set once inputs are parsed and validated; errors after that are runtime failures.
bool g_running = false;

fs::path output_dir(const std::string& flag, std::string_view fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CMAG_OUTPUT_DIR"); env && *env) return fs::path(env) / fallback;
  return fs::path("cmag_out") / fallback;
}

json read_json(const fs::path& p) {
  try {
    return json::parse(io::read_text_file(p));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { io::write_text_file(p, j.dump(2) + "\n"); }

void print_metrics(const std::string& label, const ExperimentResult& r) {
  std::printf("%s: test ROC-AUC %.4f +- %.4f, PR-AUC %.4f +- %.4f over %zu/%zu seeds\n", label.c_str(),
              r.roc_auc.mean, r.roc_auc.std, r.pr_auc.mean, r.pr_auc.std, r.roc_auc.values.size(), r.spec.seeds.size());
  for (const SeedOutcome& o : r.seeds) {
    if (o.failed) std::printf("  seed %llu failed: %s\n", static_cast<unsigned long long>(o.seed), o.failure.c_str());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- subcommands -------------------------------------------------------------

int cmd_validate(const std::string& manifest) {
  const LoadedDataset l = load_dataset(manifest);
  std::cout << l.report.to_text();
  const bool ok = l.report.pass();
  std::cout << (ok ? "PASS\n" : "FAIL\n");
  return ok ? kOk : kInvalid;
}

struct BuildArgs {
  std::string variant, dataset, out, pretrain_config;
  std::uint64_t seed = 0;
  double image_ratio = 1.0;
  std::size_t tfidf_max_features = 2048;
};

int cmd_build(const BuildArgs& a) {
  const VariantSpec& v = variant(a.variant);
  BuildOptions o;
  o.image_ratio = a.image_ratio;
  o.tfidf_max_features = a.tfidf_max_features;
  if (!a.pretrain_config.empty()) o.pretrain = train::pretrain_config_from_json(read_json(a.pretrain_config));
  const Dataset d = load_valid_dataset(a.dataset);
  g_running = true;

  const VariantData vd = build_variant(v, d, a.seed, o);
  const fs::path out = output_dir(a.out, "build_" + a.variant);
  fs::create_directories(out);
  json summary = {{"variant", a.variant}, {"seed", a.seed}, {"image_ratio", a.image_ratio}};
  json nodes = json::object(), edges = json::object(), feats = json::object();
  for (NodeType t : kAllNodeTypes) {
    nodes[std::string(to_string(t))] = vd.graph.num_nodes(t);
    const Matrix& f = vd.features[index_of(t)];
    if (f.rows() == 0) continue;
    const std::string file = "features_" + std::string(to_string(t)) + ".emb";
    io::write_embeddings(out / file, f);
    feats[std::string(to_string(t))] = {{"file", file}, {"rows", f.rows()}, {"cols", f.cols()}};
  }
  for (const std::string& r : vd.graph.relation_names()) edges[r] = vd.graph.num_edges(r);
  summary["nodes"] = nodes;
  summary["edges"] = edges;
  summary["features"] = feats;
  summary["eval_relations"] = vd.eval_relations;
  if (vd.pretrain) summary["pretrain"] = {{"best_epoch", vd.pretrain->best_epoch}, {"epochs_trained", vd.pretrain->epochs_trained}};

  std::string split = "part,src,dst,label\n";
  auto dump = [&](const char* part, const EdgeList& es, int label) {
    for (const Edge& e : es) split += std::string(part) + "," + std::to_string(e.src) + "," + std::to_string(e.dst) + "," + std::to_string(label) + "\n";
  };
  dump("train", vd.split.train_pos, 1);
  dump("train", vd.split.train_neg, 0);
  dump("val", vd.split.val_pos, 1);
  dump("val", vd.split.val_neg, 0);
  dump("test", vd.split.test_pos, 1);
  dump("test", vd.split.test_neg, 0);
  io::write_text_file(out / "split.csv", split);
  write_json(out / "variant.json", summary);
  std::cout << "built " << a.variant << " into " << out.string() << "\n";
  return kOk;
}

int cmd_pretrain(const std::string& config, const std::string& out_flag) {
  const json j = read_json(config);
  static const std::set<std::string> known{"dataset", "images", "image_ratio", "seed", "compress_inputs", "pretrain"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) fail(ErrorCode::BadFormat, "pretrain config: unknown key '" + k + "'");
  BuildOptions o;
  bool images = false;
  std::uint64_t seed = 0;
  fs::path dataset;
  try {
    dataset = j.at("dataset").get<std::string>();
    if (dataset.is_relative()) dataset = fs::path(config).parent_path() / dataset;
    images = j.value("images", false);
    o.image_ratio = j.value("image_ratio", 1.0);
    seed = j.value("seed", std::uint64_t{0});
    o.compress_stage1_inputs = j.value("compress_inputs", false);
    if (j.contains("pretrain")) o.pretrain = train::pretrain_config_from_json(j.at("pretrain"));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("pretrain config: ") + e.what());
  }
  o.pretrain.seed = seed;
  o.pretrain.validate();
  if (!images && o.image_ratio != 1.0) fail(ErrorCode::InvalidArgument, "pretrain config: image_ratio needs images");
  const Dataset d = load_valid_dataset(dataset);
  g_running = true;

  const Stage1Setup s = stage1_setup(d, images, seed, o);
  const train::PretrainResult r = train::pretrain_stage1(s.graph, s.features, o.pretrain);
  const fs::path out = output_dir(out_flag, "pretrain");
  fs::create_directories(out);
  io::write_embeddings(out / "stage1_embeddings.emb", r.embeddings);
  nn::save_checkpoint(out / "stage1_params.ckpt", r.params);
  write_json(out / "pretrain.json", {{"config", train::to_json(o.pretrain)},
                                     {"images_kept", s.images_kept},
                                     {"best_epoch", r.best_epoch},
                                     {"epochs_trained", r.epochs_trained},
                                     {"train_loss", r.train_loss},
                                     {"holdout_loss", r.holdout_loss},
                                     {"environment", environment_record()}});
  std::printf("stage 1: best epoch %zu of %zu, embeddings %zux%zu in %s\n", r.best_epoch, r.epochs_trained,
              r.embeddings.rows(), r.embeddings.cols(), out.string().c_str());
  return kOk;
}

int cmd_train(const std::string& config, const std::string& out_flag) {
  json j = read_json(config);
  if (j.contains("seeds")) fail(ErrorCode::BadFormat, "train config takes a single 'seed'; use 'experiment' for seed lists");
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  j.erase("seed");
  j["seeds"] = {seed};
  const ExperimentSpec spec = experiment_spec_from_json(j, fs::path(config).parent_path());
  const Dataset d = load_valid_dataset(spec.dataset);
  g_running = true;

  const fs::path out = output_dir(out_flag, "train_" + spec.variant + "_" + std::string(train::to_string(spec.model)));
  const ExperimentResult r = run_experiment(spec, d, out);
  if (r.seeds.front().failed) fail(ErrorCode::InvalidArgument, r.seeds.front().failure);
  const train::TrainResult& t = r.seeds.front().result;
  std::printf("lr %s, best epoch %zu of %zu: val ROC-AUC %.4f, test ROC-AUC %.4f, PR-AUC %.4f (archive %s)\n",
              format_number(t.lr).c_str(), t.best_epoch, t.epochs_trained, t.best_val_roc_auc, t.test.roc_auc,
              t.test.pr_auc, out.string().c_str());
  return kOk;
}

int cmd_experiment(const std::string& spec_path, const std::string& out_flag) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  const Dataset d = load_valid_dataset(spec.dataset);
  g_running = true;
  const fs::path out = output_dir(out_flag, spec.variant + "_" + std::string(train::to_string(spec.model)));
  const ExperimentResult r = run_experiment(spec, d, out);
  print_metrics(spec.variant + "/" + std::string(train::to_string(spec.model)), r);
  std::cout << "archive: " << out.string() << "\n";
  return r.roc_auc.values.empty() ? kRuntime : kOk;
}

int cmd_ablate(const std::string& spec_path, const std::string& ratios_s, const std::string& models_s,
               const std::string& out_flag) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  std::vector<double> ratios;
  for (const std::string& r : split_list(ratios_s)) {
    try {
      std::size_t used = 0;
      ratios.push_back(std::stod(r, &used));
      if (used != r.size()) throw std::invalid_argument(r);
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidArgument, "bad ratio '" + r + "'");
    }
  }
  std::vector<train::ModelKind> models;
  for (const std::string& m : split_list(models_s)) models.push_back(train::model_kind_from_string(m));
  load_valid_dataset(spec.dataset);
  g_running = true;
  const fs::path out = output_dir(out_flag, "ablation_" + spec.variant);
  const auto rows = run_ablation_sampling(spec, ratios, models, out);
  std::cout << sampling_csv(rows) << "curve: " << (out / "sampling.csv").string() << "\n";
  return kOk;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_flag) {
  std::vector<ArchiveSummary> archives;
  for (const std::string& d : dirs) archives.push_back(load_archive(d));
  g_running = true;
  const ResultsTable t = emit_results_table(archives);
  std::cout << t.markdown;
  if (!out_flag.empty() || std::getenv("CMAG_OUTPUT_DIR")) {
    const fs::path out = output_dir(out_flag, "report");
    fs::create_directories(out);
    io::write_text_file(out / "results.md", t.markdown);
    io::write_text_file(out / "results.csv", t.csv);
    std::cout << "written to " << out.string() << "\n";
  }
  return kOk;
}

int cmd_synth(const std::string& config, const std::string& out_flag, const std::optional<std::uint64_t>& seed) {
  SynthConfig c = config.empty() ? SynthConfig{} : synth_config_from_json(read_json(config));
  if (seed) c.seed = *seed;
  c.validate();
  g_running = true;
  const fs::path out = output_dir(out_flag, "synth");
  const SynthDataset s = synthesize(c);
  save_dataset(out, s.data);
  write_json(out / "synth.json", to_json(c));
  std::cout << "synthetic dataset (" << c.manufacturers << " manufacturers, " << c.products << " products) in "
            << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade multimodal attributed graph link prediction"};
  app.require_subcommand(1);
  std::string kernel = "auto";
  bool quiet = false;
  app.add_option("--kernel", kernel, "Matrix kernel: scalar, avx2, neon or auto")->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "Silence warnings");

  std::string manifest;
  auto* validate = app.add_subcommand("validate", "Check a dataset against its manifest");
  validate->add_option("manifest", manifest, "Manifest file or dataset directory")->required();

  BuildArgs build_args;
  auto* build = app.add_subcommand("build", "Build one graph variant and write its features and split");
  build->add_option("variant", build_args.variant, "ag_tfidf, ag_jina, fag1, fmag2, cmag1 or cmag2")->required();
  build->add_option("--dataset", build_args.dataset, "Manifest file or dataset directory")->required();
  build->add_option("--seed", build_args.seed)->capture_default_str();
  build->add_option("--image-ratio", build_args.image_ratio)->capture_default_str();
  build->add_option("--tfidf-max-features", build_args.tfidf_max_features)->capture_default_str();
  build->add_option("--pretrain-config", build_args.pretrain_config, "JSON Stage-1 settings for cascade variants");
  build->add_option("--out", build_args.out);

  std::string config, out;
  auto* pretrain = app.add_subcommand("pretrain", "Run Stage-1 pretraining and write manufacturer embeddings");
  pretrain->add_option("config", config)->required();
  pretrain->add_option("--out", out);

  auto* trainc = app.add_subcommand("train", "Grid-search one variant/model for a single seed");
  trainc->add_option("config", config)->required();
  trainc->add_option("--out", out);

  auto* experiment = app.add_subcommand("experiment", "Run a multi-seed experiment and write its archive");
  experiment->add_option("spec", config)->required();
  experiment->add_option("--out", out);

  std::string ratios = "0.1,0.2,0.5", models = "heterosage,heterogat";
  auto* ablate = app.add_subcommand("ablate-sampling", "Image-sampling ablation over ratios and models");
  ablate->add_option("spec", config)->required();
  ablate->add_option("--ratios", ratios)->capture_default_str();
  ablate->add_option("--models", models)->capture_default_str();
  ablate->add_option("--out", out);

  std::vector<std::string> archives;
  auto* report = app.add_subcommand("report", "Tabulate experiment archives");
  report->add_option("archives", archives)->required();
  report->add_option("--out", out);

  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Write a planted-cluster synthetic dataset");
  synth->add_option("--config", config, "JSON generator settings");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    set_warnings_quiet(quiet);
    kernels::set_mode(kernels::mode_from_string(kernel));
    if (*validate) return cmd_validate(manifest);
    if (*build) return cmd_build(build_args);
    if (*pretrain) return cmd_pretrain(config, out);
    if (*trainc) return cmd_train(config, out);
    if (*experiment) return cmd_experiment(config, out);
    if (*ablate) return cmd_ablate(config, ratios, models, out);
    if (*report) return cmd_report(archives, out);
    if (*synth) return cmd_synth(config, out, synth_seed);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return g_running ? kRuntime : kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return g_running ? kRuntime : kInvalid;
  }
  return kInvalid;
}
