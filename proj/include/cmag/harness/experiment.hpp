#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmag/harness/variants.hpp"

namespace cmag::harness {

inline constexpr std::string_view kVersion = "0.1.0";

struct ExperimentSpec {
  std::string variant = "cmag1";
  train::ModelKind model = train::ModelKind::HeteroSage;
  nn::ConvKind pretrain_encoder = nn::ConvKind::Sage;
  double image_ratio = 1.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path dataset;
  /// model and seed come from the fields above / the seed list.
  train::TrainConfig train;
  /// encoder and seed likewise.
  train::PretrainConfig pretrain;
  std::size_t tfidf_max_features = 2048;
  bool compress_stage1_inputs = false;

  void validate() const;
  BuildOptions build_options() const;
  train::TrainConfig train_config(std::uint64_t seed) const;
};

nlohmann::json to_json(const ExperimentSpec& s);
/// Relative dataset paths resolve against `base_dir` and are stored absolute.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  train::TrainResult result;
  nlohmann::json build;  // graph sizes, image sampling, Stage-1 curves
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::vector<double> values;
};

Summary summarize(const std::vector<double>& values);

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<SeedOutcome> seeds;
  Summary roc_auc, pr_auc;
  nlohmann::json aggregate;
};

/// One build_variant + grid_search per seed. Seeds whose build or training
/// raises a cmag::Error are kept with a failure marker. When `out_dir` is
/// non-empty the archive is written there:
///   experiment.json  environment.json  aggregate.json  aggregate.csv
///   seed_<s>/result.json  seed_<s>/best_params.ckpt
ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& data,
                                const std::filesystem::path& out_dir = {});
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = {});

nlohmann::json environment_record();

struct ArchiveSummary {
  std::filesystem::path dir;
  ExperimentSpec spec;
  nlohmann::json aggregate;
};

ArchiveSummary load_archive(const std::filesystem::path& dir);

// ---- image-sampling ablation -------------------------------------------------

inline constexpr std::string_view kSamplingCsvHeader = "ratio,model,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std";

struct CurveRow {
  double ratio = 1.0;
  train::ModelKind model = train::ModelKind::HeteroSage;
  Summary roc_auc, pr_auc;
};

/// One run_experiment per (ratio, model), archived under
/// `out_dir/ratio_<r>/<model>/`, with the curve in `out_dir/sampling.csv`.
std::vector<CurveRow> run_ablation_sampling(const ExperimentSpec& spec, const std::vector<double>& ratios,
                                            const std::vector<train::ModelKind>& models,
                                            const std::filesystem::path& out_dir = {});
std::string sampling_csv(const std::vector<CurveRow>& rows);

// ---- results table -----------------------------------------------------------

struct ResultsTable {
  std::string markdown;  // best per column bold, second-best underlined
  std::string csv;
};

ResultsTable emit_results_table(const std::vector<ArchiveSummary>& archives);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

}  // namespace cmag::harness
