#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "rescore/graphs.hpp"
#include "rescore/sem.hpp"

namespace rescore::io {

/// Graph document: {"d": int, "edges": [[source, target], ...], "weights": [...]}.
/// Weights are optional and parallel to `edges`.
struct GraphDocument {
  Dag graph;
  std::optional<Eigen::MatrixXd> weights;  // full d x d matrix, zero off-support
};

[[nodiscard]] std::string graph_to_json(const Dag& graph, const Eigen::MatrixXd* weights = nullptr);
[[nodiscard]] GraphDocument graph_from_json(const std::string& text);
void write_graph(const std::filesystem::path& path, const Dag& graph, const Eigen::MatrixXd* weights = nullptr);
[[nodiscard]] GraphDocument read_graph(const std::filesystem::path& path);

/// Comma-separated numeric rows, 17 significant digits; `header` writes x1..xd.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values, bool header = false);
/// Reads numeric CSV; a first row that does not parse as numbers is taken as a header.
[[nodiscard]] Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Sidecar with columns group,corrupted (one row per sample).
void write_labels_csv(const std::filesystem::path& path, const DataMatrix& data);

/// One real per line.
void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& values);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

[[nodiscard]] std::string format_double(double v);

}  // namespace rescore::io
