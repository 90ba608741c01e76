#include "cmag/error.hpp"
#include "cmag/trainers.hpp"

namespace cmag::train {

using nlohmann::json;

json to_json(const metrics::MetricReport& r) {
  return {{"roc_auc", r.roc_auc}, {"pr_auc", r.pr_auc}, {"positives", r.positives}, {"negatives", r.negatives}};
}

json to_json(const TrainConfig& c) {
  json j = {{"model", to_string(c.model)},
            {"hidden", c.hidden},
            {"layers", c.layers},
            {"dropout", c.dropout},
            {"heads", c.heads},
            {"lr_grid", c.lr_grid},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"negative_ratio", c.negative_ratio},
            {"resample_train_negatives", c.resample_train_negatives},
            {"residual", c.residual},
            {"self_loops", c.self_loops},
            {"eval_relations", c.eval_relations},
            {"seed", c.seed}};
  j["pos_weight"] = c.pos_weight ? json(*c.pos_weight) : json(nullptr);
  return j;
}

json to_json(const PretrainConfig& c) {
  return {{"encoder", c.encoder == nn::ConvKind::Rgcn ? "rgcn" : "graphsage"},
          {"dims", {c.input_dim, c.hidden_dim, c.output_dim}},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"batch_sizes", {{"attribute", c.attribute_batch}, {"image", c.image_batch}}},
          {"negative_ratio", c.negative_ratio},
          {"holdout_fraction", c.holdout_fraction},
          {"seed", c.seed}};
}

json to_json(const TrainResult& r) {
  json grid = json::array();
  for (const GridRun& g : r.grid) {
    json e = {{"lr", g.lr}, {"failed", g.failed}};
    if (g.failed) {
      e["failure"] = g.failure;
    } else {
      e["best_val_roc_auc"] = g.best_val_roc_auc;
      e["best_epoch"] = g.best_epoch;
      e["epochs_trained"] = g.epochs_trained;
    }
    grid.push_back(e);
  }
  return {{"lr", r.lr},
          {"best_epoch", r.best_epoch},
          {"epochs_trained", r.epochs_trained},
          {"best_val_roc_auc", r.best_val_roc_auc},
          {"val", to_json(r.val)},
          {"test", to_json(r.test)},
          {"curves", {{"train_loss", r.train_loss}, {"val_roc_auc", r.val_roc_auc}}},
          {"grid", grid}};
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) fail(ErrorCode::BadFormat, std::string(what) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      fail(ErrorCode::BadFormat, std::string(what) + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace

TrainConfig train_config_from_json(const json& j) {
  check_keys(j, {"model", "hidden", "layers", "dropout", "heads", "lr_grid", "lr", "weight_decay", "max_epochs",
                 "patience", "negative_ratio", "pos_weight", "resample_train_negatives", "residual", "self_loops",
                 "eval_relations", "seed"},
             "train config");
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = model_kind_from_string(j.at("model").get<std::string>());
    read(j, "hidden", c.hidden);
    read(j, "layers", c.layers);
    read(j, "dropout", c.dropout);
    read(j, "heads", c.heads);
    read(j, "lr_grid", c.lr_grid);
    read(j, "lr", c.lr);
    read(j, "weight_decay", c.weight_decay);
    read(j, "max_epochs", c.max_epochs);
    read(j, "patience", c.patience);
    read(j, "negative_ratio", c.negative_ratio);
    if (j.contains("pos_weight") && !j.at("pos_weight").is_null()) c.pos_weight = j.at("pos_weight").get<double>();
    read(j, "resample_train_negatives", c.resample_train_negatives);
    read(j, "residual", c.residual);
    read(j, "self_loops", c.self_loops);
    read(j, "eval_relations", c.eval_relations);
    read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

PretrainConfig pretrain_config_from_json(const json& j) {
  check_keys(j, {"encoder", "dims", "lr", "weight_decay", "max_epochs", "patience", "batch_sizes", "negative_ratio",
                 "holdout_fraction", "seed"},
             "pretrain config");
  PretrainConfig c;
  try {
    if (j.contains("encoder")) {
      const auto e = j.at("encoder").get<std::string>();
      c.encoder = nn::conv_kind_from_string(e);
    }
    if (j.contains("dims")) {
      const auto d = j.at("dims").get<std::vector<std::size_t>>();
      if (d.size() != 3) fail(ErrorCode::BadFormat, "pretrain config: dims needs three entries");
      c.input_dim = d[0];
      c.hidden_dim = d[1];
      c.output_dim = d[2];
    }
    read(j, "lr", c.lr);
    read(j, "weight_decay", c.weight_decay);
    read(j, "max_epochs", c.max_epochs);
    read(j, "patience", c.patience);
    if (j.contains("batch_sizes")) {
      const json& b = j.at("batch_sizes");
      read(b, "attribute", c.attribute_batch);
      read(b, "image", c.image_batch);
    }
    read(j, "negative_ratio", c.negative_ratio);
    read(j, "holdout_fraction", c.holdout_fraction);
    read(j, "seed", c.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace cmag::train
