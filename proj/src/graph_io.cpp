#include "agt/graph_io.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace agt {
namespace {

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  throw ParseError(file.string() + ":" + std::to_string(line) + ": " + what);
}

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());
  return in;
}

// strtod-based parse that, unlike std::stod, accepts subnormal values (our
// own writer emits them at full precision). Rejects trailing garbage and
// true overflow; underflow to a subnormal or zero is a valid double.
bool parse_double(const std::string& token, double& out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  if (*end != '\0') return false;
  if (errno == ERANGE && (v == HUGE_VAL || v == -HUGE_VAL)) return false;
  out = v;
  return true;
}

// Parses a comma-separated list of integers; empty string -> empty list.
std::vector<int> parse_int_list(const std::string& text, const std::filesystem::path& file,
                                std::size_t line_no) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (blank(token)) continue;
    try {
      out.push_back(std::stoi(token));
    } catch (const std::exception&) {
      fail(file, line_no, "expected integer, got '" + token + "'");
    }
  }
  return out;
}

}  // namespace

Graph load_graph(const std::filesystem::path& dir, EdgeCleanupStats* stats) {
  const auto features_path = dir / "features.csv";
  const auto edges_path = dir / "edges.txt";
  const auto labels_path = dir / "labels.csv";

  // Features first: their row count defines n.
  std::vector<std::vector<double>> rows;
  {
    auto in = open_or_throw(features_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (blank(line)) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string token;
      while (std::getline(ss, token, ',')) {
        double value = 0.0;
        if (parse_double(token, value)) {
          row.push_back(value);
        } else {
          fail(features_path, line_no, "expected number, got '" + token + "'");
        }
      }
      if (!rows.empty() && row.size() != rows.front().size())
        fail(features_path, line_no,
             "row has " + std::to_string(row.size()) + " columns, expected " +
                 std::to_string(rows.front().size()));
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw ParseError(features_path.string() + ": no feature rows");
  const int n = static_cast<int>(rows.size());
  RowMatrixXd features(n, static_cast<Eigen::Index>(rows.front().size()));
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  std::vector<std::pair<int, int>> edges;
  {
    auto in = open_or_throw(edges_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string body = strip_comment(line);
      if (blank(body)) continue;
      std::istringstream ss(body);
      long long u = 0, v = 0;
      if (!(ss >> u >> v)) fail(edges_path, line_no, "expected 'u v' pair");
      std::string extra;
      if (ss >> extra) fail(edges_path, line_no, "trailing content '" + extra + "'");
      if (u < 0 || u >= n || v < 0 || v >= n)
        fail(edges_path, line_no,
             "endpoint out of range for " + std::to_string(n) + " nodes");
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
  }

  std::vector<int> labels;
  if (std::filesystem::exists(labels_path)) {
    auto in = open_or_throw(labels_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (blank(line)) continue;
      try {
        labels.push_back(std::stoi(line));
      } catch (const std::exception&) {
        fail(labels_path, line_no, "expected integer label, got '" + line + "'");
      }
    }
    if (static_cast<int>(labels.size()) != n)
      throw ParseError(labels_path.string() + ": " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(n) + " nodes");
  }

  try {
    return make_graph(n, edges, std::move(features), std::move(labels), stats);
  } catch (const std::invalid_argument& e) {
    throw ParseError(dir.string() + ": " + e.what());
  }
}

void save_graph(const std::filesystem::path& dir, const Graph& g) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.txt");
    if (!out) throw std::runtime_error("cannot write " + (dir / "edges.txt").string());
    for (int v = 0; v < g.n; ++v)
      for (int u : g.neighbors(v))
        if (v < u) out << v << ' ' << u << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "features.csv").string());
    out.precision(17);
    for (int i = 0; i < g.n; ++i) {
      for (Eigen::Index j = 0; j < g.features.cols(); ++j) {
        if (j) out << ',';
        out << g.features(i, j);
      }
      out << '\n';
    }
  }
  if (g.has_labels()) {
    std::ofstream out(dir / "labels.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "labels.csv").string());
    for (int y : g.labels) out << y << '\n';
  }
}

DataSplit load_split(const std::filesystem::path& file, int n) {
  auto in = open_or_throw(file);
  std::vector<std::vector<int>> parts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line) && parts.size() < 3) {
    ++line_no;
    parts.push_back(parse_int_list(line, file, line_no));
  }
  if (parts.size() != 3)
    throw ParseError(file.string() + ": expected 3 lines (train/validation/test), got " +
                     std::to_string(parts.size()));
  DataSplit s{std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (int v : *part) {
      if (v < 0 || v >= n)
        throw ParseError(file.string() + ": node id " + std::to_string(v) + " out of range");
      if (seen[static_cast<std::size_t>(v)]++)
        throw ParseError(file.string() + ": node id " + std::to_string(v) +
                         " appears in more than one set");
    }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

void save_split(const std::filesystem::path& file, const DataSplit& split) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      if (i) out << ',';
      out << (*part)[i];
    }
    out << '\n';
  }
}

}  // namespace agt
