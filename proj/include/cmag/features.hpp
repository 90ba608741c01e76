#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/matrix.hpp"
#include "cmag/types.hpp"

namespace cmag::features {

// ---- TF-IDF -------------------------------------------------------------------

/// Lowercases, splits on anything that is not an ASCII letter or digit
/// (non-ASCII bytes count as letters), and drops tokens shorter than 2.
std::vector<std::string> tokenize(std::string_view text);

struct TfidfModel {
  std::vector<std::string> vocabulary;  // column order
  std::map<std::string, std::size_t> column;
  std::vector<std::size_t> document_frequency;
  std::size_t corpus_size = 0;

  double idf(std::size_t col) const;
  /// Raw-count tf times smoothed idf, rows L2-normalized.
  Matrix transform(const std::vector<std::string>& docs) const;
};

/// Vocabulary: the max_features most frequent terms over the corpus (ties
/// broken lexicographically), assigned columns in lexicographic order.
std::pair<TfidfModel, Matrix> tfidf_fit_transform(const std::vector<std::string>& docs,
                                                  std::size_t max_features);

void save_tfidf_model(const std::filesystem::path& path, const TfidfModel& model);
TfidfModel load_tfidf_model(const std::filesystem::path& path);

// ---- categorical / numeric ---------------------------------------------------------

/// One column per category; a row may list several categories (multi-hot) or
/// none (missing -> zero row). Unknown values throw in strict mode and are
/// ignored otherwise.
Matrix one_hot(const std::vector<std::vector<std::string>>& values,
               const std::vector<std::string>& categories, bool strict = false);

/// Sorted distinct values across all rows.
std::vector<std::string> collect_categories(const std::vector<std::vector<std::string>>& values);

/// (x - mean) / population std. Missing entries take the mean first;
/// a constant column maps to zeros.
std::vector<double> standardize(const std::vector<std::optional<double>>& values);

// ---- truncated SVD ---------------------------------------------------------------

struct SvdOptions {
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;
  /// Matrices whose smaller side is at most this use an exact dense SVD.
  std::size_t dense_threshold = 256;
};

struct SvdModel {
  std::size_t k = 0;
  Matrix basis;                          // cols x k, orthonormal columns
  std::vector<double> singular_values;  // k, descending
  std::vector<double> column_means;     // zeros unless centered
  bool centered = false;
};

SvdModel svd_fit(const Matrix& m, std::size_t k, std::uint64_t seed, const SvdOptions& opts = {});
Matrix svd_transform(const SvdModel& model, const Matrix& m);
/// ||m * basis||_F^2 for the fitted basis.
double captured_energy(const SvdModel& model, const Matrix& m);

void save_svd_model(const std::filesystem::path& path, const SvdModel& model);
SvdModel load_svd_model(const std::filesystem::path& path);

/// Fit-and-project to `width` columns. When `width` exceeds min(rows, cols)
/// the rank is clipped with a warning and the output is zero-padded back to
/// `width` columns.
Matrix compress(const Matrix& m, std::size_t width, std::uint64_t seed, std::string_view what);

// ---- node feature assembly ---------------------------------------------------------

inline constexpr std::size_t kTextDims = 32;
inline constexpr std::size_t kTabularDims = 32;
inline constexpr std::size_t kStage1Dims = 32;
inline constexpr std::size_t kNodeDims = 64;

/// text -> 32 and [categorical | numeric] -> 32, concatenated to 64.
Matrix assemble_stage2_manufacturer(const Matrix& text, const Matrix& categorical,
                                    const Matrix& numeric, std::uint64_t seed);

/// [stage1 (32) | stage2 (64)] -> 96 -> 64.
Matrix fuse_final_manufacturer(const Matrix& stage1, const Matrix& stage2, std::uint64_t seed);

/// [text | categorical] -> 64.
Matrix assemble_product(const Matrix& text, const Matrix& categorical, std::uint64_t seed);

}  // namespace cmag::features
