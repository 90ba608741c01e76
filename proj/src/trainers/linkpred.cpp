#include <algorithm>
#include <cmath>

#include "cmag/error.hpp"
#include "cmag/nn/layers.hpp"
#include "cmag/rng.hpp"
#include "cmag/trainers.hpp"

namespace cmag::train {

std::string_view to_string(ModelKind m) noexcept { return m == ModelKind::HeteroSage ? "heterosage" : "heterogat"; }

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "heterosage" || s == "sage") return ModelKind::HeteroSage;
  if (s == "heterogat" || s == "gat") return ModelKind::HeteroGat;
  fail(ErrorCode::InvalidArgument, "unknown model '" + std::string(s) + "'");
}

std::vector<double> default_lr_grid() {
  return {1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2};
}

void TrainConfig::validate() const {
  if (lr_grid.empty()) fail(ErrorCode::InvalidArgument, "lr grid is empty");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::OutOfRange, "dropout must lie in [0, 1)");
  if (hidden == 0 || layers == 0) fail(ErrorCode::InvalidArgument, "hidden width and layer count must be positive");
  if (model == ModelKind::HeteroGat && (heads == 0 || hidden % heads != 0)) {
    fail(ErrorCode::InvalidArgument, "hidden width must be divisible by the head count");
  }
  if (negative_ratio == 0) fail(ErrorCode::InvalidArgument, "negative ratio must be positive");
  if (patience >= max_epochs) fail(ErrorCode::InvalidArgument, "patience must be below max_epochs");
  if (pos_weight && !(*pos_weight > 0.0)) fail(ErrorCode::InvalidArgument, "pos_weight must be positive");
}

HeteroGraph training_graph(const HeteroGraph& g, const EdgeSplit& split) {
  const Relation& r = split.relation;
  const std::string rev = relations::reverse_name(r.name);
  if (!g.has_relation(r.name)) fail(ErrorCode::UnknownRelation, "graph has no relation '" + r.name + "'");
  if (!g.has_relation(rev)) fail(ErrorCode::InvalidArgument, "add reverse edges for '" + r.name + "' before training");
  return g.with_relation(r, split.train_pos).with_relation(g.relation(rev), transpose(split.train_pos));
}

void assert_no_leakage(const HeteroGraph& mp, const EdgeSplit& split) {
  const std::string& name = split.relation.name;
  const std::string rev = relations::reverse_name(name);
  for (const auto* part : {&split.val_pos, &split.test_pos}) {
    for (const Edge& e : *part) {
      const bool fwd = mp.has_relation(name) && mp.has_edge(name, e.src, e.dst);
      const bool bwd = mp.has_relation(rev) && mp.has_edge(rev, e.dst, e.src);
      if (fwd || bwd) {
        fail(ErrorCode::InvalidArgument, "held-out edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                                             ") is present in the message-passing graph");
      }
    }
  }
}

nn::EncoderConfig stage2_encoder_config(const TrainConfig& cfg, const HeteroGraph& g, const TypedMatrices& features) {
  nn::EncoderConfig ec;
  ec.name = "stage2";
  ec.kind = cfg.model == ModelKind::HeteroGat ? nn::ConvKind::Gat : nn::ConvKind::Sage;
  for (NodeType t : kAllNodeTypes) {
    const Matrix& f = features[index_of(t)];
    if (f.empty() || g.num_nodes(t) == 0) continue;
    if (f.rows() != g.num_nodes(t)) {
      fail(ErrorCode::ShapeMismatch, std::string(to_string(t)) + " features have " + std::to_string(f.rows()) +
                                         " rows for " + std::to_string(g.num_nodes(t)) + " nodes");
    }
    ec.input_dims[index_of(t)] = f.cols();
  }
  for (const Relation& r : g.relations()) {
    if (ec.input_dims[index_of(r.src)] == 0 || ec.input_dims[index_of(r.dst)] == 0) {
      fail(ErrorCode::MissingModality, "relation '" + r.name + "' joins a node type without features");
    }
    ec.relations.push_back(r);
  }
  ec.projection_dim = cfg.hidden;
  ec.layer_dims.assign(cfg.layers, cfg.hidden);
  ec.heads = cfg.heads;
  ec.dropout = cfg.dropout;
  ec.residual = cfg.residual;
  ec.self_loops = cfg.self_loops;
  return ec;
}

std::vector<double> score_edges(const nn::HeteroEncoder& enc, const nn::ParameterSet& params, const HeteroGraph& mp,
                                const TypedMatrices& features, const Relation& relation, std::span<const Edge> edges) {
  const TypedMatrices z = enc.forward(mp, features, params, {});
  return nn::dot_decoder(z[index_of(relation.src)], z[index_of(relation.dst)], edges);
}

namespace {

metrics::MetricReport report_on(const nn::HeteroEncoder& enc, const nn::ParameterSet& params, const HeteroGraph& mp,
                                const TypedMatrices& features, const Relation& rel, const EdgeList& pos,
                                const EdgeList& neg) {
  EdgeList all = pos;
  all.insert(all.end(), neg.begin(), neg.end());
  const auto s = score_edges(enc, params, mp, features, rel, all);
  std::vector<double> y(all.size(), 0.0);
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(pos.size()), 1.0);
  for (double v : s) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite edge score");
  }
  return metrics::evaluate(s, y);
}

}  // namespace

TrainResult train_linkpred(const HeteroGraph& g, const TypedMatrices& features, const EdgeSplit& split,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (split.val_pos.empty() || split.test_pos.empty() || split.val_neg.empty() || split.test_neg.empty()) {
    fail(ErrorCode::DegenerateSplit, "validation and test sets must be non-empty");
  }
  if (split.train_pos.empty()) fail(ErrorCode::DegenerateSplit, "no training positives");
  const HeteroGraph mp = training_graph(g, split);
  assert_no_leakage(mp, split);
  const HeteroGraph eval_g = cfg.eval_relations.empty() ? mp : strip_relations(mp, cfg.eval_relations);
  assert_no_leakage(eval_g, split);

  const nn::HeteroEncoder enc(stage2_encoder_config(cfg, g, features));
  TypedMatrices x;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    if (enc.config().input_dims[t] > 0) x[t] = features[t];
  }
  const Relation& rel = split.relation;
  const std::size_t si = index_of(rel.src), di = index_of(rel.dst);

  nn::ParameterSet params;
  enc.init(params, cfg.seed);
  const nn::AdamConfig adam{.lr = cfg.lr, .weight_decay = cfg.weight_decay};

  TrainResult res;
  res.lr = cfg.lr;
  EarlyStopper stopper(cfg.patience, /*maximize=*/true);
  EdgeList train_neg = split.train_neg;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.resample_train_negatives) {
      train_neg = sample_negatives(g, rel.name, split.train_pos, cfg.negative_ratio, split.seed,
                                   rng::mix64(rng::tag("train-neg-epoch") ^ epoch));
    }
    EdgeList batch = split.train_pos;
    batch.insert(batch.end(), train_neg.begin(), train_neg.end());
    std::vector<double> y(batch.size(), 0.0);
    std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(split.train_pos.size()), 1.0);
    const double pw = cfg.pos_weight.value_or(static_cast<double>(train_neg.size()) /
                                              static_cast<double>(split.train_pos.size()));

    nn::HeteroEncoder::Cache cache;
    const TypedMatrices z = enc.forward(mp, x, params, {true, cfg.seed, epoch, 0}, &cache);
    const auto s = nn::dot_decoder(z[si], z[di], batch);
    const nn::LossResult lr = nn::weighted_bce(s, y, pw);
    if (!std::isfinite(lr.loss)) {
      fail(ErrorCode::NonFinite, "training loss is not finite at epoch " + std::to_string(epoch));
    }
    TypedMatrices dz;
    dz[si] = Matrix(z[si].rows(), z[si].cols());
    dz[di] = Matrix(z[di].rows(), z[di].cols());
    nn::dot_decoder_backward(z[si], z[di], batch, lr.dscores, dz[si], dz[di]);
    params.zero_grad();
    enc.backward(mp, cache, dz, params);
    nn::adam_step(params, adam);
    res.train_loss.push_back(lr.loss);

    double val = report_on(enc, params, eval_g, x, rel, split.val_pos, split.val_neg).roc_auc;
    if (cfg.validation_override) val = cfg.validation_override(epoch, val);
    res.val_roc_auc.push_back(val);
    res.epochs_trained = epoch;
    if (stopper.update(epoch, val)) res.best_params = params;
    if (stopper.should_stop()) break;
  }
  res.best_epoch = stopper.best_epoch();
  res.best_val_roc_auc = stopper.best_value();
  res.val = report_on(enc, res.best_params, eval_g, x, rel, split.val_pos, split.val_neg);
  res.test = report_on(enc, res.best_params, eval_g, x, rel, split.test_pos, split.test_neg);
  return res;
}

TrainResult grid_search(const HeteroGraph& g, const TypedMatrices& features, const EdgeSplit& split,
                        const TrainConfig& cfg) {
  cfg.validate();
  std::vector<double> grid = cfg.lr_grid;
  std::sort(grid.begin(), grid.end());
  std::optional<TrainResult> best;
  std::vector<GridRun> runs;
  for (double lr : grid) {
    TrainConfig c = cfg;
    c.lr = lr;
    GridRun run;
    run.lr = lr;
    try {
      TrainResult r = train_linkpred(g, features, split, c);
      run.best_val_roc_auc = r.best_val_roc_auc;
      run.best_epoch = r.best_epoch;
      run.epochs_trained = r.epochs_trained;
      if (!best || r.best_val_roc_auc > best->best_val_roc_auc) best = std::move(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      run.failed = true;
      run.failure = e.what();
    }
    runs.push_back(run);
  }
  if (!best) fail(ErrorCode::NonFinite, "every learning rate in the grid diverged");
  best->grid = std::move(runs);
  return std::move(*best);
}

}  // namespace cmag::train
