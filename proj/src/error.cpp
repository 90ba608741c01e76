#include "cmag/error.hpp"

#include <atomic>
#include <iostream>

namespace cmag {
namespace {
std::atomic<std::size_t> g_warnings{0};
std::atomic<bool> g_quiet{false};
}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::DanglingEndpoint: return "dangling-endpoint";
    case ErrorCode::TypeMismatch: return "type-mismatch";
    case ErrorCode::RelationCollision: return "relation-collision";
    case ErrorCode::UnknownRelation: return "unknown-relation";
    case ErrorCode::TooFewEdges: return "too-few-edges";
    case ErrorCode::Saturation: return "saturation";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::ChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::BadFormat: return "bad-format";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::Io: return "io";
    case ErrorCode::DegenerateSplit: return "degenerate-split";
    case ErrorCode::MissingModality: return "missing-modality";
    case ErrorCode::UnknownCategory: return "unknown-category";
    case ErrorCode::ValidationFailed: return "validation-failed";
  }
  return "unknown";
}

void warn(std::string_view message) {
  g_warnings.fetch_add(1, std::memory_order_relaxed);
  if (!g_quiet.load(std::memory_order_relaxed)) std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() { return g_warnings.load(std::memory_order_relaxed); }

void set_warnings_quiet(bool quiet) { g_quiet.store(quiet); }

}  // namespace cmag
