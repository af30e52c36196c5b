#include "rescore/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "rescore/errors.hpp"

namespace rescore::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string graph_to_json(const Dag& graph, const Eigen::MatrixXd* weights) {
  json doc;
  doc["d"] = graph.size();
  json edges = json::array();
  json values = json::array();
  for (const auto& [from, to] : graph.edges()) {
    edges.push_back({from, to});
    if (weights != nullptr) values.push_back((*weights)(from, to));
  }
  doc["edges"] = std::move(edges);
  if (weights != nullptr) doc["weights"] = std::move(values);
  return doc.dump(2) + "\n";
}

GraphDocument graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidParameter(std::string("malformed graph document: ") + e.what());
  }
  if (!doc.contains("d") || !doc.contains("edges")) throw InvalidParameter("graph document needs 'd' and 'edges'");
  const int d = doc.at("d").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : doc.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw InvalidParameter("each edge must be a [source, target] pair");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  GraphDocument out{Dag(d, edges), std::nullopt};
  if (doc.contains("weights")) {
    const auto& w = doc.at("weights");
    if (!w.is_array() || w.size() != edges.size()) throw InvalidParameter("weights must parallel the edge list");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (size_t k = 0; k < edges.size(); ++k) m(edges[k].first, edges[k].second) = w[k].get<double>();
    out.weights = std::move(m);
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidParameter("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidParameter("cannot write " + path.string());
  out << text;
}

void write_graph(const std::filesystem::path& path, const Dag& graph, const Eigen::MatrixXd* weights) {
  write_text(path, graph_to_json(graph, weights));
}

GraphDocument read_graph(const std::filesystem::path& path) { return graph_from_json(read_text(path)); }

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values, bool header) {
  std::string text;
  if (header) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) text += (c ? ",x" : "x") + std::to_string(c + 1);
    text += "\n";
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) text += ',';
      text += format_double(values(r, c));
    }
    text += '\n';
  }
  write_text(path, text);
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    if (first == std::string::npos) return false;
    const char* begin = cell.data() + first;
    const char* end = cell.data() + last + 1;
    double v = 0.0;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!parse_row(line, row)) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidParameter("non-numeric row " + std::to_string(rows.size() + 1) + " in " + path.string());
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidParameter("ragged row " + std::to_string(rows.size() + 1) + " in " + path.string());
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw InvalidParameter("no data rows in " + path.string());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

void write_labels_csv(const std::filesystem::path& path, const DataMatrix& data) {
  std::string text = "group,corrupted\n";
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto i = static_cast<size_t>(r);
    text += std::to_string(data.group.empty() ? 0 : data.group[i]) + "," +
            std::to_string(data.corrupted.empty() ? 0 : static_cast<int>(data.corrupted[i])) + "\n";
  }
  write_text(path, text);
}

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& values) {
  std::string text;
  for (Eigen::Index i = 0; i < values.size(); ++i) text += format_double(values[i]) + "\n";
  write_text(path, text);
}

}  // namespace rescore::io
