#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sta/tensor.hpp"

namespace sta {

// 17 significant digits: the shortest width that round-trips every double
// bit-exactly through decimal text.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Plain-text matrix: header "rows cols", then one whitespace-separated row
// per line.
inline void write_matrix(const std::string& path, const MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix: cannot open " + path);
  out << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? " " : "") << format_double(M(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_matrix: write failed for " + path);
}

inline MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_matrix: cannot open " + path);
  Eigen::Index rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0)
    throw std::runtime_error("read_matrix: malformed header in " + path);
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(in >> M(i, j))) throw std::runtime_error("read_matrix: row length mismatch in " + path);
  return M;
}

// Plain-text tensor: header "order d_1 ... d_k", then the row-major values.
inline void write_tensor(const std::string& path, const DenseTensor& T) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_tensor: cannot open " + path);
  out << T.order();
  for (int d : T.shape) out << ' ' << d;
  out << '\n';
  for (Eigen::Index i = 0; i < T.data.size(); ++i)
    out << format_double(T.data[i]) << ((i + 1) % 8 == 0 || i + 1 == T.data.size() ? '\n' : ' ');
  if (!out) throw std::runtime_error("write_tensor: write failed for " + path);
}

inline DenseTensor read_tensor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_tensor: cannot open " + path);
  int order = -1;
  if (!(in >> order) || order < 1) throw std::runtime_error("read_tensor: malformed header in " + path);
  std::vector<int> shape(order);
  std::int64_t total = 1;
  for (int i = 0; i < order; ++i) {
    if (!(in >> shape[i]) || shape[i] < 1)
      throw std::runtime_error("read_tensor: malformed header in " + path);
    total *= shape[i];
  }
  VectorXd data(total);
  for (std::int64_t i = 0; i < total; ++i)
    if (!(in >> data[i])) throw std::runtime_error("read_tensor: size mismatch in " + path);
  double extra;
  if (in >> extra) throw std::runtime_error("read_tensor: size mismatch in " + path);
  return DenseTensor(shape, data);
}

// Flat key=value config. '#' starts a comment, blank lines are skipped,
// whitespace around key and value is trimmed.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: missing '=' at line " + std::to_string(lineno));
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
      cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    const auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }
  long long get_int(const std::string& key) const { return to_int(key, get_string(key)); }
  long long get_int(const std::string& key, long long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }
  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  static long long to_int(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not an integer: " + v);
    }
  }
  static double to_double(const std::string& key, const std::string& v) {
    try {
      size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not a number: " + v);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace sta
