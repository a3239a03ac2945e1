#pragma once

// Internal text-checkpoint helpers shared by the model and baseline
// serializers. 17 significant digits round-trips doubles exactly.

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ideotrace/errors.hpp"

namespace ideotrace::detail {

inline void write_value(std::ofstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

inline void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      write_value(out, m(r, c));
    }
    out << '\n';
  }
}

inline void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << '\t';
    write_value(out, v[i]);
  }
  out << '\n';
}

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::filesystem::path& path)
      : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open file: " + path.string());
  }

  std::string line() {
    std::string l;
    if (!std::getline(in_, l)) throw DataError(path_.string() + ": truncated file");
    if (!l.empty() && l.back() == '\r') l.pop_back();
    return l;
  }

  std::vector<double> row(Eigen::Index expect) {
    std::string l = line();
    std::vector<double> vals;
    const char* p = l.c_str();
    char* end = nullptr;
    while (*p) {
      double v = std::strtod(p, &end);
      if (end == p) throw DataError(path_.string() + ": bad numeric row");
      vals.push_back(v);
      p = end;
      while (*p == '\t' || *p == ' ') ++p;
    }
    if (static_cast<Eigen::Index>(vals.size()) != expect) {
      throw DataError(path_.string() + ": wrong row width");
    }
    return vals;
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      auto vals = row(cols);
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = vals[c];
    }
    return m;
  }

  Eigen::VectorXd vector(Eigen::Index n) {
    auto vals = row(n);
    return Eigen::Map<Eigen::VectorXd>(vals.data(), n);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace ideotrace::detail
