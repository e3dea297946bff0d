#include "gnnrisk/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace gnnrisk {

namespace {

bool has_gz_suffix(const std::filesystem::path& p) { return p.extension() == ".gz"; }

std::vector<std::string_view> split_fields(std::string_view line) {
  auto is_sep = [](char c) { return c == ',' || c == '\t' || c == ' ' || c == ';'; };
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

/// Non-empty lines; a trailing '\r' is dropped.
std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view all(text);
  std::size_t start = 0;
  while (start <= all.size()) {
    auto end = all.find('\n', start);
    if (end == std::string_view::npos) end = all.size();
    auto line = all.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

template <typename T>
std::vector<std::vector<T>> parse_table(const std::filesystem::path& path, const char* what) {
  const std::string text = read_text_file(path);
  const auto lines = lines_of(text);
  std::vector<std::vector<T>> rows;
  rows.reserve(lines.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    auto fields = split_fields(lines[li]);
    std::vector<T> row(fields.size());
    bool ok = true;
    for (std::size_t k = 0; k < fields.size() && ok; ++k) ok = parse_number(fields[k], row[k]);
    if (!ok) {
      if (li == 0) continue;  // header
      throw GraphError(std::string("parse failure in ") + what + " file " + path.string() + " at line " +
                       std::to_string(li + 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw GraphError("file not found: " + path.string());
  }
  if (has_gz_suffix(path)) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw GraphError("cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(f);
    if (failed) throw GraphError("corrupt gzip stream in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (has_gz_suffix(path)) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) throw GraphError("cannot write " + path.string());
    const int written = contents.empty() ? 0 : gzwrite(f, contents.data(), static_cast<unsigned>(contents.size()));
    gzclose(f);
    if (static_cast<std::size_t>(written) != contents.size()) throw GraphError("short write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw GraphError("cannot write " + path.string());
  out << contents;
  if (!out) throw GraphError("short write to " + path.string());
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

Graph load_graph(const std::filesystem::path& features_path, const std::filesystem::path& edges_path,
                 const std::filesystem::path& labels_path, std::optional<int> num_classes) {
  const auto feature_rows = parse_table<double>(features_path, "features");
  const auto edge_rows = parse_table<long long>(edges_path, "edges");
  const auto label_rows = parse_table<long long>(labels_path, "labels");

  if (feature_rows.empty()) throw GraphError("no feature rows in " + features_path.string());
  const auto dim = feature_rows.front().size();
  if (dim == 0) throw GraphError("empty feature row in " + features_path.string());
  const auto n = feature_rows.size();
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    if (feature_rows[i].size() != dim) {
      throw GraphError("feature row " + std::to_string(i) + " has " + std::to_string(feature_rows[i].size()) +
                       " columns, expected " + std::to_string(dim));
    }
    for (std::size_t j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feature_rows[i][j];
  }

  if (label_rows.size() != n) {
    throw GraphError("inconsistent node counts: " + std::to_string(n) + " feature rows, " +
                     std::to_string(label_rows.size()) + " labels");
  }
  std::vector<int> labels(n);
  long long max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label_rows[i].size() != 1) throw GraphError("labels file must hold one integer per line");
    const long long y = label_rows[i][0];
    if (y < 0 || y > std::numeric_limits<int>::max()) {
      throw GraphError("label out of range at node " + std::to_string(i) + ": " + std::to_string(y));
    }
    labels[i] = static_cast<int>(y);
    max_label = std::max(max_label, y);
  }
  const int classes = num_classes.value_or(std::max(2, static_cast<int>(max_label) + 1));

  if (edge_rows.empty() && n > 1) throw GraphError("zero edges in " + edges_path.string());
  std::vector<Edge> edges;
  edges.reserve(edge_rows.size());
  for (std::size_t i = 0; i < edge_rows.size(); ++i) {
    const auto& r = edge_rows[i];
    if (r.size() != 2) throw GraphError("edge row " + std::to_string(i) + " must have two columns");
    if (r[0] < 0 || r[1] < 0 || r[0] >= static_cast<long long>(n) || r[1] >= static_cast<long long>(n)) {
      throw GraphError("inconsistent node counts: edge (" + std::to_string(r[0]) + "," + std::to_string(r[1]) +
                       ") references a node beyond " + std::to_string(n));
    }
    if (r[0] == r[1]) throw GraphError("self-loop row for node " + std::to_string(r[0]));
    edges.emplace_back(static_cast<NodeId>(r[0]), static_cast<NodeId>(r[1]));
  }
  return Graph(std::move(x), std::move(edges), std::move(labels), classes);
}

void write_graph(const Graph& g, const std::filesystem::path& features_path, const std::filesystem::path& edges_path,
                 const std::filesystem::path& labels_path) {
  std::string features;
  const auto& x = g.features();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) features += ',';
      features += format_double(x(i, j));
    }
    features += '\n';
  }
  std::string edges;
  for (const auto& e : g.edges()) {
    edges += std::to_string(e.u);
    edges += ',';
    edges += std::to_string(e.v);
    edges += '\n';
  }
  std::string labels;
  for (int y : g.labels()) {
    labels += std::to_string(y);
    labels += '\n';
  }
  write_text_file(features_path, features);
  write_text_file(edges_path, edges);
  write_text_file(labels_path, labels);
}

}  // namespace gnnrisk
