#include "fecam/embedding_io.hpp"

#include "binary_io.hpp"
#include "fecam/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>

namespace fecam {
namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path);
}

}  // namespace detail

namespace {

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw InputError(std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

std::string_view next_field(std::string_view& line) {
  const auto comma = line.find(',');
  const std::string_view field = line.substr(0, comma);
  line = comma == std::string_view::npos ? std::string_view{} : line.substr(comma + 1);
  return field;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& message) {
  throw FormatError("embedding CSV line " + std::to_string(line_no) + ": " + message, 0);
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const FeatureMatrix& batch) {
  batch.validate();
  const std::uint32_t dim = checked_u32(batch.dim(), "embedding dimension");
  if (dim == 0 || dim > kMaxEmbeddingDim) throw InputError("embedding dimension out of range");
  const std::uint32_t rows = checked_u32(batch.rows(), "row count");
  std::uint32_t label_domain = 0;
  for (ClassId label : batch.labels) {
    if (label == std::numeric_limits<ClassId>::max()) throw InputError("label out of range");
    label_domain = std::max(label_domain, label + 1);
  }

  detail::ByteWriter w;
  w.bytes(kEmbeddingMagic);
  w.u16(kEmbeddingVersion);
  w.u32(dim);
  w.u32(rows);
  w.u32(label_domain);
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    w.u32(batch.labels[r]);
    w.u32(batch.domains.empty() ? 0 : batch.domains[r]);
    for (std::size_t c = 0; c < batch.dim(); ++c) {
      w.f32(static_cast<float>(
          batch.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  return w.take();
}

FeatureMatrix decode_embeddings(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "embedding file");
  if (r.bytes(4, "magic") != kEmbeddingMagic) {
    throw FormatError("embedding file: bad magic (expected FEMB)", 0);
  }
  const std::uint16_t version = r.u16("version");
  if (version != kEmbeddingVersion) {
    throw FormatError("embedding file: unsupported version " + std::to_string(version), 4);
  }
  const std::uint32_t dim = r.u32("dim");
  if (dim == 0 || dim > kMaxEmbeddingDim) {
    throw FormatError("embedding file: dimension " + std::to_string(dim) + " out of range", 6);
  }
  const std::uint32_t rows = r.u32("row_count");
  const std::uint32_t label_domain = r.u32("label_domain");

  const std::uint64_t record_bytes = 8ull + 4ull * dim;
  const std::uint64_t expected = kEmbeddingHeaderBytes + record_bytes * rows;
  if (bytes.size() < expected) {
    const std::uint64_t complete = (bytes.size() - kEmbeddingHeaderBytes) / record_bytes;
    throw FormatError("embedding file: truncated payload, record " + std::to_string(complete) +
                          " of " + std::to_string(rows) + " starts at byte " +
                          std::to_string(kEmbeddingHeaderBytes + complete * record_bytes) +
                          " but the file ends at byte " + std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > expected) {
    throw FormatError("embedding file: " + std::to_string(bytes.size() - expected) +
                          " trailing bytes after the declared rows",
                      expected);
  }

  FeatureMatrix out;
  out.values.resize(rows, dim);
  out.labels.resize(rows);
  out.domains.resize(rows);
  for (std::uint32_t i = 0; i < rows; ++i) {
    const std::size_t record_start = r.offset();
    out.labels[i] = r.u32("label");
    if (out.labels[i] >= label_domain) {
      throw FormatError("embedding file: label " + std::to_string(out.labels[i]) +
                            " outside the declared label domain " + std::to_string(label_domain),
                        record_start);
    }
    out.domains[i] = r.u32("domain");
    for (std::uint32_t c = 0; c < dim; ++c) out.values(i, c) = static_cast<double>(r.f32("value"));
  }
  return out;
}

std::string format_embeddings_csv(const FeatureMatrix& batch) {
  batch.validate();
  std::string out = "label,domain";
  for (std::size_t c = 0; c < batch.dim(); ++c) out += ",f" + std::to_string(c);
  out += '\n';
  char buffer[32];
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    out += std::to_string(batch.labels[r]);
    out += ',';
    out += std::to_string(batch.domains.empty() ? 0 : batch.domains[r]);
    for (std::size_t c = 0; c < batch.dim(); ++c) {
      const float v = static_cast<float>(
          batch.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      std::snprintf(buffer, sizeof(buffer), "%.9g", static_cast<double>(v));
      out += ',';
      out += buffer;
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_embeddings_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto newline = text.find('\n');
    std::string_view line = text.substr(0, newline);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    text = newline == std::string_view::npos ? std::string_view{} : text.substr(newline + 1);
  }
  if (lines.empty()) csv_error(1, "missing header");

  std::string_view header = lines[0];
  if (next_field(header) != "label" || next_field(header) != "domain") {
    csv_error(1, "header must start with label,domain");
  }
  std::size_t dim = 0;
  while (!header.empty() || dim == 0) {
    const std::string_view name = next_field(header);
    if (name != "f" + std::to_string(dim)) csv_error(1, "expected column f" + std::to_string(dim));
    ++dim;
    if (header.empty()) break;
  }

  FeatureMatrix out;
  const std::size_t rows = lines.size() - 1;
  out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  out.labels.resize(rows);
  out.domains.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::string_view line = lines[i + 1];
    const std::size_t line_no = i + 2;
    auto parse_u32 = [&](std::string_view field) {
      std::uint32_t v = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        csv_error(line_no, "bad integer '" + std::string(field) + "'");
      }
      return v;
    };
    out.labels[i] = parse_u32(next_field(line));
    out.domains[i] = parse_u32(next_field(line));
    for (std::size_t c = 0; c < dim; ++c) {
      if (line.empty() && c < dim) csv_error(line_no, "expected " + std::to_string(dim) + " values");
      const std::string_view field = next_field(line);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        csv_error(line_no, "bad number '" + std::string(field) + "'");
      }
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          static_cast<double>(static_cast<float>(v));
    }
    if (!line.empty()) csv_error(line_no, "too many values");
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const FeatureMatrix& batch) {
  detail::write_file_bytes(path.string(), encode_embeddings(batch));
}

void write_embeddings_csv(const std::filesystem::path& path, const FeatureMatrix& batch) {
  const std::string text = format_embeddings_csv(batch);
  detail::write_file_bytes(path.string(),
                           std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FeatureMatrix read_embeddings(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path.string());
  if (bytes.size() >= 4 && std::equal(kEmbeddingMagic.begin(), kEmbeddingMagic.end(), bytes.begin())) {
    return decode_embeddings(bytes);
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (text.starts_with("label,")) return parse_embeddings_csv(text);
  throw FormatError("embedding file " + path.string() + ": bad magic (expected FEMB or a CSV header)", 0);
}

}  // namespace fecam
