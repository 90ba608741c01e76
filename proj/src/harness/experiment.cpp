#include "cmag/harness/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "cmag/error.hpp"
#include "cmag/ingestion.hpp"
#include "cmag/kernels.hpp"
#include "cmag/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmag::harness {

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- spec ----------------------------------------------------------------------

void ExperimentSpec::validate() const {
  const VariantSpec& v = harness::variant(variant);
  if (seeds.empty()) fail(ErrorCode::InvalidArgument, "experiment: the seed list is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    fail(ErrorCode::InvalidArgument, "experiment: duplicate seeds");
  }
  if (!(image_ratio > 0.0 && image_ratio <= 1.0)) fail(ErrorCode::InvalidArgument, "experiment: image_ratio must lie in (0, 1]");
  if (!v.images && image_ratio != 1.0) {
    fail(ErrorCode::InvalidArgument, "experiment: image_ratio applies only to variants with images");
  }
  if (pretrain_encoder == nn::ConvKind::Gat) {
    fail(ErrorCode::InvalidArgument, "experiment: pretrain_encoder must be graphsage or rgcn");
  }
  if (dataset.empty()) fail(ErrorCode::InvalidArgument, "experiment: no dataset given");
  train_config(seeds.front()).validate();
  if (v.hierarchy == Hierarchy::Cascade) build_options().pretrain.validate();
}

BuildOptions ExperimentSpec::build_options() const {
  BuildOptions o;
  o.pretrain = pretrain;
  o.pretrain.encoder = pretrain_encoder;
  o.image_ratio = image_ratio;
  o.tfidf_max_features = tfidf_max_features;
  o.compress_stage1_inputs = compress_stage1_inputs;
  return o;
}

train::TrainConfig ExperimentSpec::train_config(std::uint64_t seed) const {
  train::TrainConfig c = train;
  c.model = model;
  c.seed = seed;
  return c;
}

json to_json(const ExperimentSpec& s) {
  json t = train::to_json(s.train);
  t.erase("model");
  t.erase("seed");
  t.erase("eval_relations");
  json p = train::to_json(s.pretrain);
  p.erase("encoder");
  p.erase("seed");
  return {{"variant", s.variant},
          {"model", train::to_string(s.model)},
          {"pretrain_encoder", s.pretrain_encoder == nn::ConvKind::Rgcn ? "rgcn" : "graphsage"},
          {"image_ratio", s.image_ratio},
          {"seeds", s.seeds},
          {"dataset", s.dataset.string()},
          {"train", t},
          {"pretrain", p},
          {"tfidf_max_features", s.tfidf_max_features},
          {"compress_stage1_inputs", s.compress_stage1_inputs}};
}

ExperimentSpec experiment_spec_from_json(const json& j, const fs::path& base_dir) {
  static const std::set<std::string> known{"variant", "model", "pretrain_encoder", "image_ratio", "seeds", "dataset",
                                           "train", "pretrain", "tfidf_max_features", "compress_stage1_inputs"};
  if (!j.is_object()) fail(ErrorCode::BadFormat, "experiment spec must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) fail(ErrorCode::BadFormat, "experiment spec: unknown key '" + k + "'");
  }
  ExperimentSpec s;
  try {
    s.variant = j.at("variant").get<std::string>();
    if (j.contains("model")) s.model = train::model_kind_from_string(j.at("model").get<std::string>());
    if (j.contains("pretrain_encoder")) {
      s.pretrain_encoder = nn::conv_kind_from_string(j.at("pretrain_encoder").get<std::string>());
    }
    if (j.contains("image_ratio")) s.image_ratio = j.at("image_ratio").get<double>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    fs::path ds = j.at("dataset").get<std::string>();
    if (ds.is_relative()) ds = base_dir / ds;
    s.dataset = fs::weakly_canonical(fs::absolute(ds));
    if (j.contains("train")) {
      const json& t = j.at("train");
      for (const char* k : {"model", "seed", "eval_relations"}) {
        if (t.contains(k)) fail(ErrorCode::BadFormat, std::string("experiment spec: train.") + k + " is set by the harness");
      }
      s.train = train::train_config_from_json(t);
    }
    if (j.contains("pretrain")) {
      const json& p = j.at("pretrain");
      for (const char* k : {"encoder", "seed"}) {
        if (p.contains(k)) fail(ErrorCode::BadFormat, std::string("experiment spec: pretrain.") + k + " is set by the harness");
      }
      s.pretrain = train::pretrain_config_from_json(p);
    }
    if (j.contains("tfidf_max_features")) s.tfidf_max_features = j.at("tfidf_max_features").get<std::size_t>();
    if (j.contains("compress_stage1_inputs")) s.compress_stage1_inputs = j.at("compress_stage1_inputs").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
  return experiment_spec_from_json(j, path.parent_path());
}

// ---- running -------------------------------------------------------------------

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.values = values;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

json environment_record() {
  return {{"version", kVersion},
          {"threads", num_threads()},
          {"kernel", kernels::name(kernels::active_mode())},
          {"compiler", __VERSION__},
          {"precision", "float64"}};
}

namespace {

json to_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}, {"values", s.values}}; }

Summary summary_from_json(const json& j) {
  Summary s;
  s.mean = j.at("mean").get<double>();
  s.std = j.at("std").get<double>();
  s.values = j.at("values").get<std::vector<double>>();
  return s;
}

json build_record(const VariantData& v) {
  json nodes = json::object(), edges = json::object();
  for (NodeType t : kAllNodeTypes) nodes[std::string(to_string(t))] = v.graph.num_nodes(t);
  for (const std::string& r : v.graph.relation_names()) edges[r] = v.graph.num_edges(r);
  json b = {{"nodes", nodes},
            {"edges", edges},
            {"split",
             {{"train", v.split.train_pos.size()}, {"val", v.split.val_pos.size()}, {"test", v.split.test_pos.size()}}},
            {"eval_relations", v.eval_relations}};
  if (v.spec.images) b["images_kept"] = v.images_kept;
  if (v.pretrain) {
    b["pretrain"] = {{"best_epoch", v.pretrain->best_epoch},
                     {"epochs_trained", v.pretrain->epochs_trained},
                     {"train_loss", v.pretrain->train_loss},
                     {"holdout_loss", v.pretrain->holdout_loss}};
  }
  return b;
}

void write_json(const fs::path& p, const json& j) { io::write_text_file(p, j.dump(2) + "\n"); }

std::string aggregate_csv(const ExperimentResult& r) {
  const json e = to_json(r.spec);
  std::string out = "variant,model,pretrain_encoder,image_ratio,seeds,completed,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std\n";
  out += r.spec.variant + "," + e.at("model").get<std::string>() + "," + e.at("pretrain_encoder").get<std::string>() +
         "," + format_number(r.spec.image_ratio) + "," + std::to_string(r.spec.seeds.size()) + "," +
         std::to_string(r.roc_auc.values.size()) + "," + format_number(r.roc_auc.mean) + "," +
         format_number(r.roc_auc.std) + "," + format_number(r.pr_auc.mean) + "," + format_number(r.pr_auc.std) + "\n";
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& data, const fs::path& out_dir) {
  spec.validate();
  const VariantSpec& v = variant(spec.variant);
  ExperimentResult res;
  res.spec = spec;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json(out_dir / "experiment.json", to_json(spec));
    write_json(out_dir / "environment.json", environment_record());
  }
  std::vector<double> roc, pr;
  json seeds = json::array();
  json lrs = json::array();
  json failed = json::array();
  for (std::uint64_t seed : spec.seeds) {
    SeedOutcome o;
    o.seed = seed;
    try {
      const VariantData vd = build_variant(v, data, seed, spec.build_options());
      o.build = build_record(vd);
      train::TrainConfig cfg = spec.train_config(seed);
      cfg.eval_relations = vd.eval_relations;
      o.result = train::grid_search(vd.graph, vd.features, vd.split, cfg);
    } catch (const Error& e) {
      o.failed = true;
      o.failure = std::string(to_string(e.code())) + ": " + e.what();
    }
    json record = {{"seed", seed}, {"status", o.failed ? "failed" : "ok"}};
    if (o.failed) {
      record["failure"] = o.failure;
      failed.push_back(seed);
    } else {
      record["build"] = o.build;
      record["result"] = train::to_json(o.result);
      roc.push_back(o.result.test.roc_auc);
      pr.push_back(o.result.test.pr_auc);
      lrs.push_back({{"seed", seed}, {"lr", o.result.lr}});
    }
    if (!out_dir.empty()) {
      const fs::path sd = out_dir / ("seed_" + std::to_string(seed));
      fs::create_directories(sd);
      write_json(sd / "result.json", record);
      if (!o.failed) nn::save_checkpoint(sd / "best_params.ckpt", o.result.best_params);
    }
    res.seeds.push_back(std::move(o));
  }
  res.roc_auc = summarize(roc);
  res.pr_auc = summarize(pr);
  const json e = to_json(spec);
  res.aggregate = {{"variant", spec.variant},
                   {"model", e.at("model")},
                   {"pretrain_encoder", e.at("pretrain_encoder")},
                   {"image_ratio", spec.image_ratio},
                   {"seeds", spec.seeds},
                   {"completed", roc.size()},
                   {"failed_seeds", failed},
                   {"lr", lrs},
                   {"test_roc_auc", to_json(res.roc_auc)},
                   {"test_pr_auc", to_json(res.pr_auc)}};
  if (!out_dir.empty()) {
    write_json(out_dir / "aggregate.json", res.aggregate);
    io::write_text_file(out_dir / "aggregate.csv", aggregate_csv(res));
  }
  if (roc.empty()) warn("experiment " + spec.variant + ": every seed failed");
  return res;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const fs::path& out_dir) {
  spec.validate();
  return run_experiment(spec, load_valid_dataset(spec.dataset), out_dir);
}

ArchiveSummary load_archive(const fs::path& dir) {
  ArchiveSummary a;
  a.dir = dir;
  try {
    const json spec = json::parse(io::read_text_file(dir / "experiment.json"));
    a.spec = experiment_spec_from_json(spec, dir);
    a.aggregate = json::parse(io::read_text_file(dir / "aggregate.json"));
    summary_from_json(a.aggregate.at("test_roc_auc"));
    summary_from_json(a.aggregate.at("test_pr_auc"));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, "archive " + dir.string() + ": " + e.what());
  }
  return a;
}

// ---- sampling ablation ---------------------------------------------------------

std::string sampling_csv(const std::vector<CurveRow>& rows) {
  std::string out = std::string(kSamplingCsvHeader) + "\n";
  for (const CurveRow& r : rows) {
    out += format_number(r.ratio) + "," + std::string(train::to_string(r.model)) + "," + format_number(r.roc_auc.mean) +
           "," + format_number(r.roc_auc.std) + "," + format_number(r.pr_auc.mean) + "," + format_number(r.pr_auc.std) +
           "\n";
  }
  return out;
}

std::vector<CurveRow> run_ablation_sampling(const ExperimentSpec& spec, const std::vector<double>& ratios,
                                            const std::vector<train::ModelKind>& models, const fs::path& out_dir) {
  if (!variant(spec.variant).images) {
    fail(ErrorCode::InvalidArgument, "sampling ablation needs a variant with images, not " + spec.variant);
  }
  if (ratios.empty() || models.empty()) fail(ErrorCode::InvalidArgument, "sampling ablation: empty ratio or model list");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) fail(ErrorCode::InvalidArgument, "sampling ablation: ratio " + format_number(r) + " outside (0, 1]");
  }
  const Dataset data = load_valid_dataset(spec.dataset);
  std::vector<CurveRow> rows;
  for (double r : ratios) {
    for (train::ModelKind m : models) {
      ExperimentSpec s = spec;
      s.image_ratio = r;
      s.model = m;
      const fs::path dir =
          out_dir.empty() ? fs::path() : out_dir / ("ratio_" + format_number(r)) / std::string(train::to_string(m));
      const ExperimentResult res = run_experiment(s, data, dir);
      rows.push_back({r, m, res.roc_auc, res.pr_auc});
    }
  }
  if (!out_dir.empty()) io::write_text_file(out_dir / "sampling.csv", sampling_csv(rows));
  return rows;
}

// ---- results table -------------------------------------------------------------

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string row_label(const ArchiveSummary& a) {
  std::string label = a.spec.variant;
  if (variant(a.spec.variant).hierarchy == Hierarchy::Cascade && a.spec.pretrain_encoder == nn::ConvKind::Rgcn) {
    label += " (rgcn)";
  }
  if (a.spec.image_ratio != 1.0) label += " @" + format_number(a.spec.image_ratio);
  return label;
}

std::size_t variant_rank(std::string_view name) {
  const auto& t = variant_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].name == name) return i;
  return t.size();
}

}  // namespace

ResultsTable emit_results_table(const std::vector<ArchiveSummary>& archives) {
  if (archives.empty()) fail(ErrorCode::InvalidArgument, "report: no archives given");
  constexpr std::array<train::ModelKind, 2> kModels{train::ModelKind::HeteroSage, train::ModelKind::HeteroGat};
  struct Row {
    std::size_t rank;
    std::string label;
    std::array<const ArchiveSummary*, 2> cells{};
  };
  std::vector<Row> rows;
  for (const ArchiveSummary& a : archives) {
    const std::string label = row_label(a);
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) { return r.label == label; });
    if (it == rows.end()) {
      rows.push_back({variant_rank(a.spec.variant), label, {}});
      it = rows.end() - 1;
    }
    const std::size_t m = a.spec.model == kModels[0] ? 0 : 1;
    if (it->cells[m]) {
      fail(ErrorCode::InvalidArgument, "report: two archives for " + label + " / " +
                                           std::string(train::to_string(a.spec.model)) + " (" +
                                           it->cells[m]->dir.string() + ", " + a.dir.string() + ")");
    }
    it->cells[m] = &a;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });

  // column c = 2 * model + metric
  auto value = [&](const Row& r, std::size_t c) -> std::optional<std::string> {
    const ArchiveSummary* a = r.cells[c / 2];
    if (!a || a->aggregate.at("completed").get<std::size_t>() == 0) return std::nullopt;
    return percent(a->aggregate.at(c % 2 == 0 ? "test_roc_auc" : "test_pr_auc").at("mean").get<double>());
  };
  std::array<std::vector<double>, 4> ranked;
  for (std::size_t c = 0; c < 4; ++c) {
    std::set<double, std::greater<>> distinct;
    for (const Row& r : rows) {
      if (auto v = value(r, c)) distinct.insert(std::stod(*v));
    }
    if (distinct.size() >= 2) ranked[c].assign(distinct.begin(), distinct.end());
  }

  ResultsTable t;
  t.markdown =
      "| Variant | HeteroSAGE ROC-AUC | HeteroSAGE PR-AUC | HeteroGAT ROC-AUC | HeteroGAT PR-AUC |\n"
      "|---|---:|---:|---:|---:|\n";
  t.csv = "variant,heterosage_roc_auc,heterosage_pr_auc,heterogat_roc_auc,heterogat_pr_auc,"
          "heterosage_roc_auc_std,heterosage_pr_auc_std,heterogat_roc_auc_std,heterogat_pr_auc_std\n";
  for (const Row& r : rows) {
    t.markdown += "| " + r.label;
    t.csv += r.label;
    std::string stds;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto v = value(r, c);
      std::string cell = v.value_or("n/a");
      if (v && !ranked[c].empty()) {
        const double x = std::stod(*v);
        if (x == ranked[c][0]) {
          cell = "**" + cell + "**";
        } else if (ranked[c].size() > 1 && x == ranked[c][1]) {
          cell = "<u>" + cell + "</u>";
        }
      }
      t.markdown += " | " + cell;
      t.csv += "," + v.value_or("");
      const ArchiveSummary* a = r.cells[c / 2];
      stds += ",";
      if (v) stds += percent(a->aggregate.at(c % 2 == 0 ? "test_roc_auc" : "test_pr_auc").at("std").get<double>());
    }
    t.markdown += " |\n";
    t.csv += stds + "\n";
  }
  return t;
}

}  // namespace cmag::harness
