#include "cmag/ingestion.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmag/error.hpp"

namespace cmag::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

template <typename T>
void put(std::vector<unsigned char>& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T get(std::span<const unsigned char> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

std::uint32_t crc(std::span<const unsigned char> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    c = crc32(c, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::uint32_t parse_id(const std::string& field, const fs::path& path, std::size_t row) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(field, &used);
    if (used != field.size() || v > 0xFFFFFFFFULL) throw std::invalid_argument("id");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    fail(ErrorCode::BadFormat, path.string() + " row " + std::to_string(row) + ": bad id '" + field + "'");
  }
}

void expect_header(const std::vector<std::vector<std::string>>& rows,
                   const std::vector<std::string>& header, const fs::path& path) {
  if (rows.empty() || rows.front() != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    fail(ErrorCode::BadFormat, path.string() + ": expected header '" + want + "'");
  }
}

}  // namespace

// ---- embeddings --------------------------------------------------------------

std::vector<unsigned char> encode_embeddings(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) fail(ErrorCode::BadFormat, "embedding matrix has a zero dimension");
  std::vector<unsigned char> out(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
  out.reserve(kEmbeddingHeaderBytes + m.size() * 4 + 4);
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  put<std::uint32_t>(out, kDtypeFloat32);
  for (double v : m.values()) put<float>(out, static_cast<float>(v));
  put<std::uint32_t>(out, crc(out));
  return out;
}

Matrix decode_embeddings(std::span<const unsigned char> bytes, std::string_view origin) {
  const std::string where(origin);
  if (bytes.size() < kEmbeddingHeaderBytes) {
    fail(ErrorCode::Truncated, where + ": header needs " + std::to_string(kEmbeddingHeaderBytes) +
                                   " bytes, file has " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
    fail(ErrorCode::BadFormat, where + ": bad magic tag");
  }
  const auto rows = get<std::uint64_t>(bytes, 8);
  const auto cols = get<std::uint64_t>(bytes, 16);
  const auto dtype = get<std::uint32_t>(bytes, 24);
  if (dtype != kDtypeFloat32) fail(ErrorCode::BadFormat, where + ": unsupported dtype tag " + std::to_string(dtype));
  if (rows == 0 || cols == 0) fail(ErrorCode::BadFormat, where + ": zero-sized shape");
  if (cols > (std::uint64_t{1} << 40) / rows) fail(ErrorCode::BadFormat, where + ": implausible shape");
  const std::uint64_t payload = rows * cols * 4;
  const std::uint64_t expected = kEmbeddingHeaderBytes + payload + 4;
  if (bytes.size() < expected) {
    fail(ErrorCode::Truncated, where + ": declares " + std::to_string(rows) + "x" +
                                   std::to_string(cols) + " (" + std::to_string(payload) +
                                   " payload bytes) but holds " +
                                   std::to_string(bytes.size() >= kEmbeddingHeaderBytes
                                                      ? bytes.size() - kEmbeddingHeaderBytes
                                                      : 0) +
                                   " bytes after the header");
  }
  if (bytes.size() > expected) fail(ErrorCode::BadFormat, where + ": trailing bytes after checksum");
  const auto stored = get<std::uint32_t>(bytes, kEmbeddingHeaderBytes + payload);
  if (stored != crc(bytes.first(kEmbeddingHeaderBytes + payload))) {
    fail(ErrorCode::ChecksumMismatch, where + ": checksum mismatch");
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float f = get<float>(bytes, kEmbeddingHeaderBytes + 4 * i);
    if (!std::isfinite(f)) fail(ErrorCode::NonFinite, where + ": non-finite value at index " + std::to_string(i));
    m.data()[i] = f;
  }
  return m;
}

void write_embeddings(const fs::path& path, const Matrix& m) {
  if (m.empty()) fail(ErrorCode::BadFormat, "refusing to write a zero-sized embedding matrix");
  if (!m.all_finite()) fail(ErrorCode::NonFinite, "embedding matrix has non-finite values");
  const auto bytes = encode_embeddings(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Matrix load_embeddings(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return decode_embeddings(bytes, path.string());
}

// ---- tables ------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) fail(ErrorCode::BadFormat, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

NodeTable read_node_table(const fs::path& path, NodeType type) {
  const auto rows = parse_csv(read_text_file(path));
  expect_header(rows, {"id", "name", "payload"}, path);
  NodeTable t{type, {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) {
      fail(ErrorCode::BadFormat, path.string() + " row " + std::to_string(r) + ": expected 3 fields");
    }
    t.rows.push_back({parse_id(rows[r][0], path, r), rows[r][1], rows[r][2]});
  }
  return t;
}

void write_node_table(const fs::path& path, const NodeTable& table) {
  std::string text = "id,name,payload\n";
  for (const NodeRecord& r : table.rows) {
    text += std::to_string(r.id) + "," + csv_escape(r.name) + "," + csv_escape(r.payload) + "\n";
  }
  write_text_file(path, text);
}

EdgeTable read_edge_table(const fs::path& path, const Relation& relation) {
  const auto rows = parse_csv(read_text_file(path));
  expect_header(rows, {"src", "dst"}, path);
  EdgeTable t{relation, {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) {
      fail(ErrorCode::BadFormat, path.string() + " row " + std::to_string(r) + ": expected 2 fields");
    }
    t.rows.push_back({parse_id(rows[r][0], path, r), parse_id(rows[r][1], path, r)});
  }
  return t;
}

void write_edge_table(const fs::path& path, const EdgeTable& table) {
  std::string text = "src,dst\n";
  for (const Edge& e : table.rows) text += std::to_string(e.src) + "," + std::to_string(e.dst) + "\n";
  write_text_file(path, text);
}

// ---- manifest ----------------------------------------------------------------

fs::path DatasetManifest::resolve(std::string_view file_key) const {
  const auto it = files.find(std::string(file_key));
  if (it == files.end()) fail(ErrorCode::MissingModality, "manifest has no file '" + std::string(file_key) + "'");
  const fs::path p(it->second);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest parse_manifest(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("manifest: ") + e.what());
  }
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    const json nodes = j.value("nodes", json::object());
    const json edges = j.value("edges", json::object());
    const json files = j.value("files", json::object());
    for (const auto& [k, v] : nodes.items()) {
      node_type_from_string(k);
      m.nodes[k] = v.get<long long>();
    }
    for (const auto& [k, v] : edges.items()) m.edges[k] = v.get<long long>();
    for (const auto& [k, v] : files.items()) m.files[k] = v.get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("manifest: ") + e.what());
  }
  for (const auto& [k, v] : m.nodes) {
    if (v < 0) fail(ErrorCode::BadFormat, "manifest: negative count for nodes." + k);
  }
  for (const auto& [k, v] : m.edges) {
    if (v < 0) fail(ErrorCode::BadFormat, "manifest: negative count for edges." + k);
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path());
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  json j;
  j["nodes"] = manifest.nodes;
  j["edges"] = manifest.edges;
  j["files"] = manifest.files;
  write_text_file(path, j.dump(2) + "\n");
}

// ---- validation --------------------------------------------------------------

bool ValidationReport::pass() const {
  return std::all_of(findings.begin(), findings.end(), [](const Finding& f) { return f.pass; });
}

std::vector<Finding> ValidationReport::failures() const {
  std::vector<Finding> out;
  std::copy_if(findings.begin(), findings.end(), std::back_inserter(out),
               [](const Finding& f) { return !f.pass; });
  return out;
}

std::string ValidationReport::to_text() const {
  std::ostringstream ss;
  for (const Finding& f : findings) {
    ss << (f.pass ? "PASS " : "FAIL ") << f.check << ' ' << f.subject << ": expected " << f.expected
       << ", actual " << f.actual << '\n';
  }
  ss << (pass() ? "dataset valid" : "dataset INVALID") << '\n';
  return ss.str();
}

ValidationReport validate_dataset(const DatasetManifest& manifest, const HeteroGraph& g,
                                  const std::map<std::string, FeatureMatrix>& features) {
  ValidationReport report;
  auto add = [&](std::string check, std::string subject, auto expected, auto actual) {
    report.findings.push_back({std::move(check), std::move(subject), std::to_string(expected),
                               std::to_string(actual), expected == actual});
  };
  for (const auto& [key, expected] : manifest.nodes) {
    add("node-count", key, expected, static_cast<long long>(g.num_nodes(node_type_from_string(key))));
  }
  for (const auto& [key, expected] : manifest.edges) {
    const long long actual = g.has_relation(key) ? static_cast<long long>(g.num_edges(key)) : -1;
    add("edge-count", key, expected, actual);
  }
  for (const auto& [key, path] : manifest.files) {
    const bool exists = fs::exists(manifest.resolve(key));
    report.findings.push_back({"file", key, "exists", exists ? "exists" : "missing", exists});
  }
  for (const auto& [name, fm] : features) {
    add("feature-rows", name, static_cast<long long>(g.num_nodes(fm.node_type)),
        static_cast<long long>(fm.values.rows()));
    const bool finite = fm.values.all_finite();
    report.findings.push_back({"feature-finite", name, "finite", finite ? "finite" : "non-finite", finite});
  }
  for (const Relation& r : g.relations()) {
    const std::size_t n_src = g.num_nodes(r.src);
    const std::size_t n_dst = g.num_nodes(r.dst);
    long long bad = 0;
    for (const Edge& e : g.edges(r.name)) bad += (e.src >= n_src || e.dst >= n_dst) ? 1 : 0;
    add("endpoint", r.name, 0LL, bad);
  }
  return report;
}

// ---- URL filter -----------------------------------------------------------------

std::string_view to_string(UrlVerdict v) {
  switch (v) {
    case UrlVerdict::Keep: return "keep";
    case UrlVerdict::Drop: return "drop";
    case UrlVerdict::Neutral: return "neutral";
  }
  return "unknown";
}

UrlFilterConfig UrlFilterConfig::standard() {
  return {{"product", "item", "catalog", "gallery", "prod"},
          {"about", "contact", "blog", "news", "login", "signup"},
          std::nullopt};
}

void UrlFilterConfig::validate() const {
  if (keep_keywords.empty() || drop_keywords.empty()) {
    fail(ErrorCode::InvalidArgument, "url filter keyword lists must be non-empty");
  }
  std::set<std::string> keep;
  for (const auto& k : keep_keywords) {
    if (k.empty() || lower(k) != k) fail(ErrorCode::InvalidArgument, "keyword '" + k + "' must be non-empty lowercase");
    keep.insert(k);
  }
  for (const auto& d : drop_keywords) {
    if (d.empty() || lower(d) != d) fail(ErrorCode::InvalidArgument, "keyword '" + d + "' must be non-empty lowercase");
    if (keep.contains(d)) fail(ErrorCode::InvalidArgument, "keyword '" + d + "' is in both lists");
  }
}

UrlVerdict url_lexical_filter(std::string_view url, const UrlFilterConfig& cfg) {
  if (url.empty()) fail(ErrorCode::InvalidArgument, "empty url");
  const std::string u = lower(url);
  for (const auto& d : cfg.drop_keywords) {
    if (u.find(d) != std::string::npos) return UrlVerdict::Drop;
  }
  for (const auto& k : cfg.keep_keywords) {
    if (u.find(k) != std::string::npos) return UrlVerdict::Keep;
  }
  return UrlVerdict::Neutral;
}

bool needs_supplementary_pages(const std::vector<UrlVerdict>& verdicts, const UrlFilterConfig& cfg) {
  if (!cfg.supplementary_trigger) return false;
  const auto kept = static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), UrlVerdict::Keep));
  return kept < *cfg.supplementary_trigger;
}

}  // namespace cmag::io
