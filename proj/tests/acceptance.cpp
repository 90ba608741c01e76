// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "cmag/error.hpp"
#include "cmag/features.hpp"
#include "cmag/harness/experiment.hpp"
#include "cmag/ingestion.hpp"
#include "cmag/metrics.hpp"
#include "cmag/rng.hpp"
#include "nn_cases.hpp"
#include "support.hpp"
#include "train_cases.hpp"

namespace fs = std::filesystem;
using namespace cmag;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool run(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.pass && in_time;
  std::printf("%s criterion %d (%s): %s; %.1f s of %.0f s allowed%s\n", pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs, limit_s, in_time ? "" : " (over time)");
  std::fflush(stdout);
  return pass;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- 1: gradients ------------------------------------------------------------

Outcome gradients() {
  std::map<std::string, double> layer;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto worst = [&](const std::string& k, double e) { layer[k] = std::max(layer[k], e); };
    worst("linear", testing::linear_grad_error(seed));
    worst("relu", testing::relu_grad_error(seed));
    worst("dropout-off", testing::dropout_grad_error(seed, false));
    worst("dropout-on", testing::dropout_grad_error(seed, true));
    worst("dot-decoder", testing::decoder_grad_error(seed));
    worst("weighted-bce", testing::bce_grad_error(seed));
    for (bool last : {false, true}) {
      worst("sage", testing::conv_grad_error(nn::ConvKind::Sage, seed, last));
      worst("gat", testing::conv_grad_error(nn::ConvKind::Gat, seed, last));
      worst("rgcn", testing::conv_grad_error(nn::ConvKind::Rgcn, seed, last));
    }
  }
  double model = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (nn::ConvKind k : {nn::ConvKind::Sage, nn::ConvKind::Gat, nn::ConvKind::Rgcn})
      model = std::max(model, testing::model_grad_error(k, seed));
  }
  double worst_layer = 0;
  std::string which;
  for (const auto& [k, e] : layer) {
    if (e >= worst_layer) {
      worst_layer = e;
      which = k;
    }
  }
  return {worst_layer < 1e-5 && model < 1e-4,
          fmt("worst per-layer rel err %.2e", worst_layer) + " (" + which + ") < 1e-5, " +
              fmt("worst 2-layer model rel err %.2e < 1e-4", model) + ", 9 layers x 3 seeds, 3 models x 3 seeds"};
}

// ---- 2: metrics ----------------------------------------------------------------

Outcome metric_oracles() {
  const rng::Stream rs(2, "acceptance-metrics");
  double roc_worst = 0, pr_worst = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rs.below(199, t, 0);
    const bool discrete = rs.uniform(t, 1) < 0.5;  // half the trials carry heavy ties
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = discrete ? static_cast<double>(rs.below(6, t, 10 + 2 * i)) : rs.normal(t, 10 + 2 * i);
      y[i] = rs.uniform(t, 11 + 2 * i) < 0.4 ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    roc_worst = std::max(roc_worst, std::abs(metrics::roc_auc(s, y) - metrics::brute_force_roc_auc(s, y)));
    pr_worst = std::max(pr_worst, std::abs(metrics::pr_auc(s, y) - testing::threshold_sweep_pr_auc(s, y)));
  }
  return {roc_worst < 1e-12 && pr_worst < 1e-12,
          fmt("1000 instances, n<=200: max |roc - brute force| = %.1e, max |pr - threshold sweep| = %.1e, both < 1e-12",
              roc_worst, pr_worst)};
}

// ---- 3: SVD --------------------------------------------------------------------

double orthonormality_error(const Matrix& b) {
  const Matrix g = matmul_tn(b, b);
  double e = 0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return e;
}

Outcome svd_optimality() {
  const rng::Stream rs(3, "acceptance-svd");
  double gap = 0, ortho = 0;
  double gap_rand = 0, ortho_rand = 0;
  features::SvdOptions randomized;
  randomized.dense_threshold = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const std::size_t r = 2 + rs.below(63, t, 0), c = 2 + rs.below(63, t, 1);
    const std::size_t full = std::min(r, c);
    const std::size_t rank = 1 + rs.below(full, t, 2);
    const std::size_t k = 1 + rs.below(full, t, 3);
    const Matrix m = rank == full ? testing::random_matrix(r, c, 100 + t)
                                  : matmul(testing::random_matrix(r, rank, 100 + t),
                                           testing::random_matrix(rank, c, 500 + t));
    const double total = frobenius_sq(m);
    const double exact = testing::exact_topk_energy(m, k);
    const features::SvdModel s = features::svd_fit(m, k, t);
    gap = std::max(gap, (exact - features::captured_energy(s, m)) / total);
    ortho = std::max(ortho, orthonormality_error(s.basis));
    const features::SvdModel q = features::svd_fit(m, k, t, randomized);
    gap_rand = std::max(gap_rand, (exact - features::captured_energy(q, m)) / total);
    ortho_rand = std::max(ortho_rand, orthonormality_error(q.basis));
  }
  const bool pass = gap < 1e-6 && ortho < 1e-8 && gap_rand < 1e-6 && ortho_rand < 1e-8;
  return {pass, fmt("200 matrices <=64x64: energy shortfall %.1e (randomized path %.1e) of total, < 1e-6; ", gap,
                    gap_rand) +
                    fmt("orthonormality %.1e (randomized %.1e) < 1e-8", ortho, ortho_rand)};
}

// ---- 4: perfect signal -------------------------------------------------------

train::TrainConfig toy_config(train::ModelKind m, std::uint64_t seed) {
  train::TrainConfig c;
  c.model = m;
  c.lr = 1e-2;
  c.max_epochs = 50;
  c.seed = seed;
  return c;
}

Outcome perfect_signal() {
  const auto task = testing::planted_bipartite(24, 3, false, 11);
  const auto sage = train::train_linkpred(task.g, task.features, task.split, toy_config(train::ModelKind::HeteroSage, 11));
  const auto gat = train::train_linkpred(task.g, task.features, task.split, toy_config(train::ModelKind::HeteroGat, 11));
  double shuffled = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = testing::planted_bipartite(24, 3, true, seed);
    shuffled += train::train_linkpred(s.g, s.features, s.split, toy_config(train::ModelKind::HeteroSage, seed)).test.roc_auc;
  }
  shuffled /= 5;
  const bool pass = sage.test.roc_auc == 1.0 && gat.test.roc_auc == 1.0 && shuffled >= 0.4 && shuffled <= 0.6;
  return {pass, fmt("48-node planted graph, <=50 epochs: HeteroSAGE test ROC-AUC %.4f, HeteroGAT %.4f (need 1.0); ",
                    sage.test.roc_auc, gat.test.roc_auc) +
                    fmt("shuffled-label control mean %.4f over 5 seeds (need [0.4, 0.6])", shuffled)};
}

// ---- 5: cascade beats flat -----------------------------------------------------

harness::SynthConfig cascade_generator() {
  harness::SynthConfig c;
  c.seed = 5;
  return c;
}

Outcome cascade_beats_flat() {
  const harness::SynthDataset data = harness::synthesize(cascade_generator());
  auto mean_roc = [&](const char* v) {
    harness::ExperimentSpec s;
    s.variant = v;
    s.dataset = "synthetic";
    return harness::run_experiment(s, data.data).roc_auc;
  };
  const harness::Summary cascade = mean_roc("cmag1");
  const harness::Summary flat = mean_roc("ag_jina");
  const double margin = cascade.mean - flat.mean;
  return {cascade.values.size() == 5 && flat.values.size() == 5 && margin >= 0.05,
          fmt("default protocol, 5 seeds: cmag1 mean test ROC-AUC %.4f (sd %.4f) vs ag_jina %.4f (sd %.4f)",
              cascade.mean, cascade.std, flat.mean, flat.std) +
              fmt(", margin %.4f >= 0.05", margin)};
}

// ---- 6: protocol pinning -------------------------------------------------------

Outcome protocol_pinning() {
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) bad.push_back(what);
  };
  const SplitRatios split;
  expect(split.train == 0.8 && split.val == 0.1 && split.test == 0.1, "split 80/10/10");
  const train::TrainConfig t;
  expect(t.negative_ratio == 1, "negative ratio 1");
  expect(t.patience == 20, "patience 20");
  expect(t.max_epochs == 1000, "max epochs 1000");
  expect(t.lr_grid == std::vector<double>{1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2}, "lr grid");
  expect(t.hidden == 128 && t.layers == 2 && t.dropout == 0.5 && t.heads == 4, "stage-2 architecture");
  const train::PretrainConfig p;
  expect(p.input_dim == 768 && p.hidden_dim == 64 && p.output_dim == 32, "stage-1 dims");
  expect(p.patience == 20 && p.max_epochs == 1000 && p.lr == 1e-3 && p.weight_decay == 1e-5, "stage-1 optimizer");
  expect(p.attribute_batch == 32 && p.image_batch == 16, "stage-1 batch sizes");
  using harness::Hierarchy;
  using harness::TextEmbedding;
  const auto& v = harness::variant_table();
  const bool table =
      v.size() == 6 &&
      v[0].name == "ag_tfidf" && v[0].hierarchy == Hierarchy::Flat && v[0].text == TextEmbedding::Tfidf && !v[0].images && v[0].bipartite &&
      v[1].name == "ag_jina" && v[1].hierarchy == Hierarchy::Flat && v[1].text == TextEmbedding::Clip && !v[1].images && v[1].bipartite &&
      v[2].name == "fag1" && v[2].hierarchy == Hierarchy::Flat && v[2].text == TextEmbedding::Clip && !v[2].images && !v[2].bipartite &&
      v[3].name == "fmag2" && v[3].hierarchy == Hierarchy::Flat && v[3].text == TextEmbedding::Clip && v[3].images && !v[3].bipartite &&
      v[4].name == "cmag1" && v[4].hierarchy == Hierarchy::Cascade && v[4].text == TextEmbedding::Clip && !v[4].images && v[4].bipartite &&
      v[5].name == "cmag2" && v[5].hierarchy == Hierarchy::Cascade && v[5].text == TextEmbedding::Clip && v[5].images && v[5].bipartite;
  expect(table, "variant table");
  std::string detail = "split, negatives, patience, epochs, 10-point lr grid, 768-64-32, 128x2/0.5/4 heads, 6 variants";
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty(), detail};
}

// ---- 7: determinism --------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text_file(e.path());
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "cmag_acceptance_determinism";
  fs::remove_all(root);
  harness::save_dataset(root / "data", harness::synthesize(cascade_generator()).data);
  harness::ExperimentSpec s;
  s.variant = "cmag2";
  s.model = train::ModelKind::HeteroGat;
  s.seeds = {0, 1};
  s.dataset = root / "data";
  s.image_ratio = 0.5;
  s.train.lr_grid = {1e-3, 1e-2};
  s.train.max_epochs = 60;
  harness::run_experiment(s, root / "a");
  harness::run_experiment(s, root / "b");
  const auto a = read_tree(root / "a");
  const auto b = read_tree(root / "b");
  std::size_t bytes = 0;
  for (const auto& [k, v] : a) bytes += v.size();
  fs::remove_all(root);
  return {a == b && a.size() >= 8,
          fmt("cmag2/HeteroGAT, 2 seeds, image ratio 0.5: %.0f archive files, %.0f bytes, identical across reruns",
              static_cast<double>(a.size()), static_cast<double>(bytes))};
}

// ---- 8: ingestion ----------------------------------------------------------------

Outcome ingestion() {
  Matrix m = testing::random_matrix(100, 768, 8);
  for (double& x : m.values()) x = static_cast<float>(x);
  const fs::path file = fs::temp_directory_path() / "cmag_acceptance_roundtrip.emb";
  io::write_embeddings(file, m);
  const Matrix back = io::load_embeddings(file);
  fs::remove(file);
  const bool bitwise = back.rows() == 100 && back.cols() == 768 && std::ranges::equal(m.values(), back.values());
  const fs::path fixtures(CMAG_FIXTURE_DIR);
  const bool mini = harness::load_dataset(fixtures / "mini").report.pass();
  std::size_t rejected = 0, total = 0;
  for (const auto& e : fs::directory_iterator(fixtures / "mutated")) {
    ++total;
    rejected += harness::load_dataset(e.path()).report.pass() ? 0 : 1;
  }
  return {bitwise && mini && total == 5 && rejected == 5,
          std::string("100x768 round trip ") + (bitwise ? "bitwise identical" : "DIFFERS") + ", miniature fixture " +
              (mini ? "passes" : "FAILS") + fmt(", %.0f of %.0f mutated fixtures rejected", rejected, total)};
}

// ---- 9: URL filter -----------------------------------------------------------------

Outcome url_filter() {
  const auto rows = io::parse_csv(io::read_text_file(fs::path(CMAG_FIXTURE_DIR) / "urls.csv"));
  const auto cfg = io::UrlFilterConfig::standard();
  std::size_t match = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    match += io::to_string(io::url_lexical_filter(rows[i][0], cfg)) == rows[i][1] ? 1 : 0;
  const double n = static_cast<double>(rows.size() - 1);
  return {rows.size() == 31 && match == rows.size() - 1, fmt("%.0f of %.0f labelled URLs match", match, n)};
}

}  // namespace

int main() {
  set_warnings_quiet(true);
  bool ok = true;
  ok &= run(1, "gradient suite", 60, gradients);
  ok &= run(2, "metric oracles", 30, metric_oracles);
  ok &= run(3, "SVD optimality", 60, svd_optimality);
  ok &= run(4, "perfect-signal end to end", 120, perfect_signal);
  ok &= run(5, "cascade beats flat", 600, cascade_beats_flat);
  ok &= run(6, "protocol pinning", 60, protocol_pinning);
  ok &= run(7, "determinism", 300, determinism);
  ok &= run(8, "ingestion", 60, ingestion);
  ok &= run(9, "URL filter", 60, url_filter);
  std::printf("%s\n", ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return ok ? 0 : 1;
}
