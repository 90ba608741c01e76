#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmag/graph.hpp"
#include "cmag/metrics.hpp"
#include "cmag/nn/encoder.hpp"
#include "cmag/nn/params.hpp"

namespace cmag::train {

/// Halts after `patience` consecutive epochs without a strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience, bool maximize = true) : patience_(patience), maximize_(maximize) {}

  /// Returns true if `value` is a new best.
  bool update(std::size_t epoch, double value);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_value() const noexcept { return best_; }
  bool has_best() const noexcept { return seen_; }

 private:
  std::size_t patience_;
  bool maximize_;
  bool seen_ = false;
  double best_ = 0.0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
};

// ---- stage 1 -----------------------------------------------------------------

struct PretrainConfig {
  nn::ConvKind encoder = nn::ConvKind::Sage;  // sage or rgcn
  std::size_t input_dim = 768;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 32;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::size_t max_epochs = 1000;
  std::size_t patience = 20;
  std::size_t attribute_batch = 32;
  std::size_t image_batch = 16;
  std::size_t negative_ratio = 1;
  double holdout_fraction = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PretrainResult {
  Matrix embeddings;                 // manufacturers x output_dim, from the best epoch
  std::vector<double> train_loss;    // index 0 = before the first update
  std::vector<double> holdout_loss;  // same indexing; empty if nothing was held out
  std::size_t best_epoch = 0;
  std::size_t epochs_trained = 0;
  nn::ParameterSet params;
};

/// Unsupervised link prediction on a manufacturer/attribute/image graph.
/// `features` holds one matrix per node type that takes part.
PretrainResult pretrain_stage1(const HeteroGraph& mag, const TypedMatrices& features, const PretrainConfig& cfg);

// ---- stage 2 -----------------------------------------------------------------

enum class ModelKind { HeteroSage, HeteroGat };
std::string_view to_string(ModelKind m) noexcept;
ModelKind model_kind_from_string(std::string_view s);

/// {1, 5} x {1e-6, ..., 1e-2}, ascending.
std::vector<double> default_lr_grid();

struct TrainConfig {
  ModelKind model = ModelKind::HeteroSage;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  double dropout = 0.5;
  std::size_t heads = 4;
  std::vector<double> lr_grid = default_lr_grid();
  double lr = 1e-3;  // used by train_linkpred; grid_search overrides it
  double weight_decay = 1e-5;
  std::size_t max_epochs = 1000;
  std::size_t patience = 20;
  std::size_t negative_ratio = 1;
  std::optional<double> pos_weight;  // default: #negatives / #positives
  bool resample_train_negatives = false;
  bool residual = false;
  bool self_loops = true;
  /// Relations kept for message passing at validation/test time; empty
  /// keeps everything.
  std::vector<std::string> eval_relations;
  std::uint64_t seed = 0;
  /// Test hook: replaces the measured validation ROC-AUC of an epoch (1-based).
  std::function<double(std::size_t epoch, double measured)> validation_override;

  void validate() const;
};

struct GridRun {
  double lr = 0.0;
  bool failed = false;
  std::string failure;
  double best_val_roc_auc = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_trained = 0;
};

struct TrainResult {
  nn::ParameterSet best_params;
  double best_val_roc_auc = 0.0;
  double lr = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  std::size_t epochs_trained = 0;
  std::vector<double> train_loss;
  std::vector<double> val_roc_auc;
  metrics::MetricReport val;
  metrics::MetricReport test;
  std::vector<GridRun> grid;  // filled by grid_search
};

/// The message-passing graph for training: the split relation and its
/// reverse hold exactly the training positives.
HeteroGraph training_graph(const HeteroGraph& g, const EdgeSplit& split);

/// Throws if any validation or test positive can pass messages in `mp`.
void assert_no_leakage(const HeteroGraph& mp, const EdgeSplit& split);

nn::EncoderConfig stage2_encoder_config(const TrainConfig& cfg, const HeteroGraph& g, const TypedMatrices& features);

TrainResult train_linkpred(const HeteroGraph& g, const TypedMatrices& features, const EdgeSplit& split,
                           const TrainConfig& cfg);

/// One train_linkpred per grid lr (same seed, split and negatives). Picks
/// the best validation ROC-AUC, preferring the smaller lr on ties. Runs
/// that fail are recorded and skipped.
TrainResult grid_search(const HeteroGraph& g, const TypedMatrices& features, const EdgeSplit& split,
                        const TrainConfig& cfg);

/// Scores of `edges` under `params`, with the given message graph.
std::vector<double> score_edges(const nn::HeteroEncoder& enc, const nn::ParameterSet& params,
                                const HeteroGraph& mp, const TypedMatrices& features, const Relation& relation,
                                std::span<const Edge> edges);

nlohmann::json to_json(const metrics::MetricReport& r);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const TrainResult& r);
nlohmann::json to_json(const PretrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
PretrainConfig pretrain_config_from_json(const nlohmann::json& j);

}  // namespace cmag::train
