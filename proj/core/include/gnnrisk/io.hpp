#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gnnrisk/graph.hpp"

namespace gnnrisk {

/// Reads a whole text file; files ending in ".gz" are inflated.
std::string read_text_file(const std::filesystem::path& path);
/// Writes a text file, gzip-compressed when the name ends in ".gz".
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Loads a graph from three delimited text files:
///   features: one row per node, comma / tab / whitespace separated, optional header
///   edges:    two integer columns, one undirected edge per row, optional header
///   labels:   one integer per line, optional header
/// Duplicate and reversed edge rows collapse to one edge. The class count is
/// max(label) + 1 (at least 2) unless `num_classes` is given.
Graph load_graph(const std::filesystem::path& features_path, const std::filesystem::path& edges_path,
                 const std::filesystem::path& labels_path, std::optional<int> num_classes = std::nullopt);

/// Canonical form: no headers, comma separated, edges sorted with u < v,
/// features in shortest round-trip decimal form.
void write_graph(const Graph& g, const std::filesystem::path& features_path,
                 const std::filesystem::path& edges_path, const std::filesystem::path& labels_path);

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

}  // namespace gnnrisk
