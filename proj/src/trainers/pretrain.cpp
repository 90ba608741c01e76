#include <cmath>

#include "cmag/error.hpp"
#include "cmag/nn/layers.hpp"
#include "cmag/rng.hpp"
#include "cmag/trainers.hpp"

namespace cmag::train {

namespace {

struct Part {
  Relation relation;
  EdgeList train;
  EdgeList holdout;
  EdgeList holdout_neg;
  EdgeList train_neg;  // fixed negatives for the per-epoch training loss curve
  std::size_t batch = 0;
};

struct Scored {
  std::vector<double> scores;
  std::vector<double> labels;
};

void score_into(const TypedMatrices& z, const Relation& r, std::span<const Edge> edges, double label, Scored& out) {
  const auto s = nn::dot_decoder(z[index_of(r.src)], z[index_of(r.dst)], edges);
  out.scores.insert(out.scores.end(), s.begin(), s.end());
  out.labels.insert(out.labels.end(), s.size(), label);
}

}  // namespace

void PretrainConfig::validate() const {
  if (encoder == nn::ConvKind::Gat) fail(ErrorCode::InvalidArgument, "stage-1 encoder must be sage or rgcn");
  if (input_dim == 0 || hidden_dim == 0 || output_dim == 0) fail(ErrorCode::InvalidArgument, "stage-1 widths must be positive");
  if (attribute_batch == 0 || image_batch == 0) fail(ErrorCode::InvalidArgument, "batch sizes must be positive");
  if (negative_ratio == 0) fail(ErrorCode::InvalidArgument, "negative ratio must be positive");
  if (patience >= max_epochs) fail(ErrorCode::InvalidArgument, "patience must be below max_epochs");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) fail(ErrorCode::OutOfRange, "holdout fraction must lie in [0, 1)");
  if (!(lr > 0.0) || weight_decay < 0.0) fail(ErrorCode::InvalidArgument, "lr must be positive and weight decay nonnegative");
}

PretrainResult pretrain_stage1(const HeteroGraph& mag, const TypedMatrices& features, const PretrainConfig& cfg) {
  cfg.validate();
  const std::size_t mi = index_of(NodeType::Manufacturer);
  if (features[mi].empty()) fail(ErrorCode::MissingModality, "stage 1 needs manufacturer features");
  if (features[mi].cols() != cfg.input_dim || features[mi].rows() != mag.num_nodes(NodeType::Manufacturer)) {
    fail(ErrorCode::ShapeMismatch, "manufacturer features are " + std::to_string(features[mi].rows()) + "x" +
                                       std::to_string(features[mi].cols()) + ", expected " +
                                       std::to_string(mag.num_nodes(NodeType::Manufacturer)) + "x" +
                                       std::to_string(cfg.input_dim));
  }

  std::vector<Part> parts;
  for (const Relation& r : {relations::has_attribute(), relations::has_image()}) {
    if (!mag.has_relation(r.name) || mag.num_edges(r.name) == 0) continue;
    const Matrix& fd = features[index_of(r.dst)];
    if (fd.empty() || fd.rows() != mag.num_nodes(r.dst)) {
      fail(ErrorCode::MissingModality, "relation '" + r.name + "' has edges but its " +
                                           std::string(to_string(r.dst)) + " features are missing or misaligned");
    }
    Part p;
    p.relation = r;
    p.batch = r.dst == NodeType::Attribute ? cfg.attribute_batch : cfg.image_batch;
    EdgeList all = mag.edges(r.name);
    rng::shuffle(all, rng::Stream(cfg.seed, "pretrain-holdout").derive(rng::tag(r.name)));
    std::size_t n_hold = round_half_up(cfg.holdout_fraction * static_cast<double>(all.size()));
    if (n_hold >= all.size()) n_hold = all.size() - 1;
    p.holdout.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_hold));
    p.train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_hold), all.end());
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.holdout.begin(), p.holdout.end());
    if (!p.holdout.empty()) {
      p.holdout_neg = sample_negatives(mag, r.name, p.holdout, cfg.negative_ratio, cfg.seed, rng::tag("pretrain-holdout-neg"));
    }
    p.train_neg = sample_negatives(mag, r.name, p.train, cfg.negative_ratio, cfg.seed, rng::tag("pretrain-train-neg"));
    parts.push_back(std::move(p));
  }
  if (parts.empty()) fail(ErrorCode::EmptyInput, "stage 1 needs attribute or image edges");

  std::vector<std::pair<Relation, EdgeList>> train_rels, full_rels;
  for (const Part& p : parts) {
    train_rels.emplace_back(p.relation, p.train);
    train_rels.emplace_back(relations::reverse_of(p.relation), transpose(p.train));
    full_rels.emplace_back(p.relation, mag.edges(p.relation.name));
    full_rels.emplace_back(relations::reverse_of(p.relation), transpose(mag.edges(p.relation.name)));
  }
  const HeteroGraph msg = HeteroGraph::create(mag.node_counts(), train_rels);
  const HeteroGraph full = HeteroGraph::create(mag.node_counts(), full_rels);

  nn::EncoderConfig ec;
  ec.name = "stage1";
  ec.kind = cfg.encoder;
  ec.input_dims[mi] = cfg.input_dim;
  for (const Part& p : parts) ec.input_dims[index_of(p.relation.dst)] = features[index_of(p.relation.dst)].cols();
  ec.layer_dims = {cfg.hidden_dim, cfg.output_dim};
  ec.relations = msg.relations();
  const nn::HeteroEncoder enc(ec);

  TypedMatrices x;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    if (ec.input_dims[t] > 0) x[t] = features[t];
  }

  PretrainResult res;
  nn::ParameterSet params;
  enc.init(params, cfg.seed);
  const nn::AdamConfig adam{.lr = cfg.lr, .weight_decay = cfg.weight_decay};
  const bool has_holdout = std::any_of(parts.begin(), parts.end(), [](const Part& p) { return !p.holdout.empty(); });

  auto eval_loss = [&](const nn::ParameterSet& ps, bool holdout) {
    const TypedMatrices z = enc.forward(msg, x, ps, {});
    Scored sc;
    for (const Part& p : parts) {
      score_into(z, p.relation, holdout ? p.holdout : p.train, 1.0, sc);
      score_into(z, p.relation, holdout ? p.holdout_neg : p.train_neg, 0.0, sc);
    }
    const double l = nn::weighted_bce(sc.scores, sc.labels, 1.0).loss;
    if (!std::isfinite(l)) fail(ErrorCode::NonFinite, "stage-1 loss is not finite");
    return l;
  };

  EarlyStopper stopper(cfg.patience, /*maximize=*/false);
  auto record = [&](std::size_t epoch, const nn::ParameterSet& ps) {
    res.train_loss.push_back(eval_loss(ps, false));
    if (has_holdout) res.holdout_loss.push_back(eval_loss(ps, true));
    const double monitor = has_holdout ? res.holdout_loss.back() : res.train_loss.back();
    if (stopper.update(epoch, monitor)) res.params = ps;
  };
  record(0, params);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<EdgeList> order;
    for (const Part& p : parts) {
      EdgeList e = p.train;
      rng::shuffle(e, rng::Stream(cfg.seed, "pretrain-epoch").derive(epoch).derive(rng::tag(p.relation.name)));
      order.push_back(std::move(e));
    }
    std::vector<std::size_t> cursor(parts.size(), 0);
    std::size_t batch_index = 0;
    for (bool any = true; any;) {
      any = false;
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Part& p = parts[pi];
        if (cursor[pi] >= order[pi].size()) continue;
        any = true;
        const std::size_t end = std::min(order[pi].size(), cursor[pi] + p.batch);
        const std::span<const Edge> pos(order[pi].data() + cursor[pi], end - cursor[pi]);
        cursor[pi] = end;
        const EdgeList neg = sample_negatives(mag, p.relation.name, pos, cfg.negative_ratio, cfg.seed,
                                              rng::mix64(rng::tag("pretrain-batch") ^ rng::mix64(epoch * 1000003 + batch_index)));
        const nn::ForwardMode mode{true, cfg.seed, epoch, batch_index};
        nn::HeteroEncoder::Cache cache;
        const TypedMatrices z = enc.forward(msg, x, params, mode, &cache);
        Scored sc;
        score_into(z, p.relation, pos, 1.0, sc);
        score_into(z, p.relation, neg, 0.0, sc);
        const nn::LossResult lr = nn::weighted_bce(sc.scores, sc.labels, 1.0);
        if (!std::isfinite(lr.loss)) fail(ErrorCode::NonFinite, "stage-1 loss is not finite at epoch " + std::to_string(epoch));
        const std::size_t si = index_of(p.relation.src), di = index_of(p.relation.dst);
        TypedMatrices dz;
        dz[si] = Matrix(z[si].rows(), z[si].cols());
        dz[di] = Matrix(z[di].rows(), z[di].cols());
        const std::span<const double> ds(lr.dscores);
        nn::dot_decoder_backward(z[si], z[di], pos, ds.subspan(0, pos.size()), dz[si], dz[di]);
        nn::dot_decoder_backward(z[si], z[di], neg, ds.subspan(pos.size()), dz[si], dz[di]);
        params.zero_grad();
        enc.backward(msg, cache, dz, params);
        nn::adam_step(params, adam);
        ++batch_index;
      }
    }
    res.epochs_trained = epoch;
    record(epoch, params);
    if (stopper.should_stop()) break;
  }
  res.best_epoch = stopper.best_epoch();
  res.embeddings = enc.forward(full, x, res.params, {})[mi];
  return res;
}

}  // namespace cmag::train
