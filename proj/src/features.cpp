#include "cmag/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "cmag/binary_io.hpp"
#include "cmag/error.hpp"

namespace cmag::features {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) tokens.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur += static_cast<char>(c >= 0x80 ? c : std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

double TfidfModel::idf(std::size_t col) const {
  return std::log((1.0 + static_cast<double>(corpus_size)) /
                  (1.0 + static_cast<double>(document_frequency.at(col)))) +
         1.0;
}

Matrix TfidfModel::transform(const std::vector<std::string>& docs) const {
  Matrix out(docs.size(), vocabulary.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const std::string& tok : tokenize(docs[d])) {
      if (auto it = column.find(tok); it != column.end()) out(d, it->second) += 1.0;
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < vocabulary.size(); ++c) {
      out(d, c) *= idf(c);
      norm += out(d, c) * out(d, c);
    }
    if (norm > 0.0) {
      const double inv = 1.0 / std::sqrt(norm);
      for (double& v : out.row(d)) v *= inv;
    }
  }
  return out;
}

std::pair<TfidfModel, Matrix> tfidf_fit_transform(const std::vector<std::string>& docs,
                                                  std::size_t max_features) {
  if (max_features == 0) fail(ErrorCode::InvalidArgument, "tfidf: max_features must be positive");
  std::map<std::string, std::size_t> frequency;
  std::map<std::string, std::size_t> df;
  for (const std::string& doc : docs) {
    const auto toks = tokenize(doc);
    for (const auto& t : toks) ++frequency[t];
    for (const auto& t : std::set<std::string>(toks.begin(), toks.end())) ++df[t];
  }
  if (frequency.empty()) fail(ErrorCode::EmptyInput, "tfidf: corpus has no tokens");

  std::vector<std::pair<std::string, std::size_t>> ranked(frequency.begin(), frequency.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_features) ranked.resize(max_features);

  TfidfModel model;
  model.corpus_size = docs.size();
  for (const auto& [term, _] : ranked) model.vocabulary.push_back(term);
  std::sort(model.vocabulary.begin(), model.vocabulary.end());
  for (std::size_t c = 0; c < model.vocabulary.size(); ++c) {
    model.column[model.vocabulary[c]] = c;
    model.document_frequency.push_back(df.at(model.vocabulary[c]));
  }
  Matrix m = model.transform(docs);
  return {std::move(model), std::move(m)};
}

void save_tfidf_model(const std::filesystem::path& path, const TfidfModel& model) {
  io::BinaryWriter w("tfidf-model");
  w.u64(model.corpus_size);
  w.u64(model.vocabulary.size());
  for (std::size_t c = 0; c < model.vocabulary.size(); ++c) {
    w.str(model.vocabulary[c]);
    w.u64(model.document_frequency[c]);
  }
  w.save(path);
}

TfidfModel load_tfidf_model(const std::filesystem::path& path) {
  auto r = io::BinaryReader::open(path, "tfidf-model");
  TfidfModel m;
  m.corpus_size = r.u64();
  const std::uint64_t v = r.u64();
  for (std::uint64_t c = 0; c < v; ++c) {
    m.vocabulary.push_back(r.str());
    m.document_frequency.push_back(r.u64());
    m.column[m.vocabulary.back()] = c;
  }
  return m;
}

Matrix one_hot(const std::vector<std::vector<std::string>>& values,
               const std::vector<std::string>& categories, bool strict) {
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < categories.size(); ++c) col.emplace(categories[c], c);
  Matrix out(values.size(), categories.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (const std::string& v : values[r]) {
      const auto it = col.find(v);
      if (it == col.end()) {
        if (strict) fail(ErrorCode::UnknownCategory, "one_hot: unknown category '" + v + "'");
        continue;
      }
      out(r, it->second) = 1.0;
    }
  }
  return out;
}

std::vector<std::string> collect_categories(const std::vector<std::vector<std::string>>& values) {
  std::set<std::string> s;
  for (const auto& row : values) s.insert(row.begin(), row.end());
  return {s.begin(), s.end()};
}

std::vector<double> standardize(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++present;
    }
  }
  std::vector<double> out(values.size(), 0.0);
  if (present == 0) return out;
  const double mean = sum / static_cast<double>(present);
  double ss = 0.0;
  for (const auto& v : values) {
    const double x = v.value_or(mean) - mean;
    ss += x * x;
  }
  const double var = ss / static_cast<double>(values.size());
  if (!(var > 1e-24 * std::max(1.0, mean * mean))) return out;
  const double inv = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i].value_or(mean) - mean) * inv;
  return out;
}

void save_svd_model(const std::filesystem::path& path, const SvdModel& model) {
  io::BinaryWriter w("svd-model");
  w.u64(model.k);
  w.u32(model.centered ? 1 : 0);
  w.matrix(model.basis);
  w.f64s(model.singular_values);
  w.f64s(model.column_means);
  w.save(path);
}

SvdModel load_svd_model(const std::filesystem::path& path) {
  auto r = io::BinaryReader::open(path, "svd-model");
  SvdModel m;
  m.k = r.u64();
  m.centered = r.u32() != 0;
  m.basis = r.matrix();
  m.singular_values = r.f64s();
  m.column_means = r.f64s();
  if (m.basis.cols() != m.k || m.singular_values.size() != m.k) {
    fail(ErrorCode::BadFormat, "svd model: inconsistent rank");
  }
  return m;
}

Matrix svd_transform(const SvdModel& model, const Matrix& m) {
  if (m.cols() != model.basis.rows()) {
    fail(ErrorCode::ShapeMismatch, "svd_transform: matrix has " + std::to_string(m.cols()) +
                                       " columns, model expects " + std::to_string(model.basis.rows()));
  }
  if (!model.centered) return matmul(m, model.basis);
  Matrix centered = m;
  for (std::size_t i = 0; i < centered.rows(); ++i)
    for (std::size_t j = 0; j < centered.cols(); ++j) centered(i, j) -= model.column_means[j];
  return matmul(centered, model.basis);
}

double captured_energy(const SvdModel& model, const Matrix& m) {
  return frobenius_sq(svd_transform(model, m));
}

Matrix compress(const Matrix& m, std::size_t width, std::uint64_t seed, std::string_view what) {
  if (m.rows() == 0) fail(ErrorCode::EmptyInput, std::string(what) + ": no rows");
  if (m.cols() == 0) return Matrix(m.rows(), width);
  const std::size_t k = std::min({width, m.rows(), m.cols()});
  if (k < width) {
    warn(std::string(what) + ": rank clipped from " + std::to_string(width) + " to " +
         std::to_string(k) + " for a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
         " matrix");
  }
  const Matrix projected = svd_transform(svd_fit(m, k, seed), m);
  if (k == width) return projected;
  Matrix out(m.rows(), width);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = projected(i, j);
  return out;
}

namespace {

void require_rows(const Matrix& a, const Matrix& b, std::string_view op) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": row counts differ (" +
                                       std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + ")");
  }
}

}  // namespace

Matrix assemble_stage2_manufacturer(const Matrix& text, const Matrix& categorical,
                                    const Matrix& numeric, std::uint64_t seed) {
  require_rows(text, categorical, "assemble_stage2_manufacturer");
  require_rows(text, numeric, "assemble_stage2_manufacturer");
  const Matrix text32 = compress(text, kTextDims, seed ^ 0x7465787433320000ULL, "manufacturer text");
  const Matrix tab32 = compress(hconcat(categorical, numeric), kTabularDims,
                                seed ^ 0x7461623332000000ULL, "manufacturer categorical+numeric");
  return hconcat(text32, tab32);
}

Matrix fuse_final_manufacturer(const Matrix& stage1, const Matrix& stage2, std::uint64_t seed) {
  require_rows(stage1, stage2, "fuse_final_manufacturer");
  if (stage1.cols() != kStage1Dims || stage2.cols() != kNodeDims) {
    fail(ErrorCode::ShapeMismatch, "fuse_final_manufacturer: expects 32 + 64 columns, got " +
                                       std::to_string(stage1.cols()) + " + " + std::to_string(stage2.cols()));
  }
  return compress(hconcat(stage1, stage2), kNodeDims, seed ^ 0x6675736536340000ULL, "manufacturer fusion");
}

Matrix assemble_product(const Matrix& text, const Matrix& categorical, std::uint64_t seed) {
  require_rows(text, categorical, "assemble_product");
  return compress(hconcat(text, categorical), kNodeDims, seed ^ 0x70726f6436340000ULL, "product features");
}

}  // namespace cmag::features
