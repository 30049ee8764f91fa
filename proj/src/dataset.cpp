#include "itrbal/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace itrbal {

namespace {

std::string row_msg(const std::string& what, Index row) {
  return what + " at data row " + std::to_string(row);
}

}  // namespace

Dataset::Dataset(Matrix X, std::vector<int> S, std::vector<std::optional<int>> A,
                 std::vector<std::optional<double>> Y)
    : X_(std::move(X)), S_(std::move(S)), A_(std::move(A)), Y_(std::move(Y)) {
  const Index n = X_.rows();
  if (n == 0 || X_.cols() == 0) throw std::invalid_argument("Dataset: empty covariate matrix");
  if (static_cast<Index>(S_.size()) != n || static_cast<Index>(A_.size()) != n ||
      static_cast<Index>(Y_.size()) != n) {
    throw std::invalid_argument("Dataset: S/A/Y length does not match X rows");
  }
  if (!X_.allFinite()) {
    for (Index i = 0; i < n; ++i) {
      if (!X_.row(i).allFinite()) throw std::invalid_argument(row_msg("Dataset: non-finite covariate", i));
    }
  }
  Index n1 = 0, n0 = 0;
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<size_t>(i);
    if (S_[ui] != 0 && S_[ui] != 1) throw std::invalid_argument(row_msg("Dataset: S not binary", i));
    if (S_[ui] == 1) {
      if (!A_[ui].has_value()) throw std::invalid_argument(row_msg("Dataset: source row with missing A", i));
      if (!Y_[ui].has_value()) throw std::invalid_argument(row_msg("Dataset: source row with missing Y", i));
      if (*A_[ui] != 0 && *A_[ui] != 1) throw std::invalid_argument(row_msg("Dataset: A not binary", i));
      if (!std::isfinite(*Y_[ui])) throw std::invalid_argument(row_msg("Dataset: non-finite Y", i));
      source_rows_.push_back(i);
      if (*A_[ui] == 1) {
        groups_.s1.push_back(i);
        ++n1;
      } else {
        groups_.s0.push_back(i);
        ++n0;
      }
    } else {
      if (A_[ui].has_value()) throw std::invalid_argument(row_msg("Dataset: target row with A present", i));
      if (Y_[ui].has_value()) throw std::invalid_argument(row_msg("Dataset: target row with Y present", i));
      groups_.t.push_back(i);
    }
  }
  if (n_source() < 2 || n1 < 1 || n0 < 1) {
    throw std::invalid_argument("Dataset: need at least one treated and one control source unit");
  }
  if (n_target() < 1) throw std::invalid_argument("Dataset: need at least one target row");
}

GroupIndex group_indices(const Dataset& d) { return d.groups(); }

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(cell);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_na(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

double parse_double(const std::string& s, const char* col, Index row) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("load_dataset: cannot parse '") + s + "' in column " +
                                col + " at data row " + std::to_string(row));
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file " + path);
  const auto header = split_line(trim(line), schema.delimiter);

  int col_s = -1, col_a = -1, col_y = -1;
  std::vector<int> cov_cols;
  for (size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    if (name == schema.s) col_s = static_cast<int>(j);
    else if (name == schema.a) col_a = static_cast<int>(j);
    else if (name == schema.y) col_y = static_cast<int>(j);
    else cov_cols.push_back(static_cast<int>(j));
  }
  if (col_s < 0) throw std::runtime_error("load_dataset: missing column " + schema.s);
  if (col_a < 0) throw std::runtime_error("load_dataset: missing column " + schema.a);
  if (col_y < 0) throw std::runtime_error("load_dataset: missing column " + schema.y);
  if (cov_cols.empty()) throw std::runtime_error("load_dataset: no covariate columns");

  std::vector<std::vector<double>> xrows;
  std::vector<int> S;
  std::vector<std::optional<int>> A;
  std::vector<std::optional<double>> Y;

  Index row = 0;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split_line(t, schema.delimiter);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("load_dataset: wrong number of cells at data row " + std::to_string(row));
    }
    const std::string s_cell = trim(cells[static_cast<size_t>(col_s)]);
    const double s_val = parse_double(s_cell, schema.s.c_str(), row);
    if (s_val != 0.0 && s_val != 1.0) {
      throw std::invalid_argument("load_dataset: non-binary S at data row " + std::to_string(row));
    }
    const int s = static_cast<int>(s_val);
    S.push_back(s);

    const std::string a_cell = trim(cells[static_cast<size_t>(col_a)]);
    const std::string y_cell = trim(cells[static_cast<size_t>(col_y)]);
    if (s == 1) {
      if (is_na(a_cell)) throw std::invalid_argument("load_dataset: source row with missing A at data row " + std::to_string(row));
      if (is_na(y_cell)) throw std::invalid_argument("load_dataset: source row with missing Y at data row " + std::to_string(row));
      const double a_val = parse_double(a_cell, schema.a.c_str(), row);
      if (a_val != 0.0 && a_val != 1.0) {
        throw std::invalid_argument("load_dataset: non-binary A at data row " + std::to_string(row));
      }
      const double y_val = parse_double(y_cell, schema.y.c_str(), row);
      if (!std::isfinite(y_val)) {
        throw std::invalid_argument("load_dataset: non-finite Y at data row " + std::to_string(row));
      }
      A.emplace_back(static_cast<int>(a_val));
      Y.emplace_back(y_val);
    } else {
      // target rows: A/Y masked regardless of file content
      A.emplace_back(std::nullopt);
      Y.emplace_back(std::nullopt);
    }

    std::vector<double> xrow;
    xrow.reserve(cov_cols.size());
    for (int j : cov_cols) {
      const double v = parse_double(trim(cells[static_cast<size_t>(j)]), trim(header[static_cast<size_t>(j)]).c_str(), row);
      if (!std::isfinite(v)) {
        throw std::invalid_argument("load_dataset: non-finite covariate at data row " + std::to_string(row));
      }
      xrow.push_back(v);
    }
    xrows.push_back(std::move(xrow));
    ++row;
  }
  if (xrows.empty()) throw std::runtime_error("load_dataset: no data rows in " + path);

  Matrix X(static_cast<Index>(xrows.size()), static_cast<Index>(cov_cols.size()));
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) X(i, j) = xrows[static_cast<size_t>(i)][static_cast<size_t>(j)];

  return Dataset(std::move(X), std::move(S), std::move(A), std::move(Y));
}

void save_dataset(const Dataset& d, const std::string& path, const ColumnSchema& schema) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  const char delim = schema.delimiter;
  out << schema.s << delim << schema.a << delim << schema.y;
  for (Index j = 0; j < d.dim(); ++j) out << delim << "x" << (j + 1);
  out << "\n";
  for (Index i = 0; i < d.n(); ++i) {
    out << d.population(i) << delim;
    if (d.is_source(i)) {
      out << *d.treatment(i) << delim << format_double(*d.outcome(i));
    } else {
      out << "NA" << delim << "NA";
    }
    for (Index j = 0; j < d.dim(); ++j) out << delim << format_double(d.covariates()(i, j));
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset standardize(const Dataset& d) {
  const Matrix& X = d.covariates();
  const Index n = X.rows();
  Matrix Z = X;
  for (Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const double ss = (X.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw std::invalid_argument("standardize: constant covariate column " + std::to_string(j));
    Z.col(j) = (X.col(j).array() - mean) / sd;
  }
  std::vector<int> S(static_cast<size_t>(n));
  std::vector<std::optional<int>> A(static_cast<size_t>(n));
  std::vector<std::optional<double>> Y(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    S[static_cast<size_t>(i)] = d.population(i);
    A[static_cast<size_t>(i)] = d.treatment(i);
    Y[static_cast<size_t>(i)] = d.outcome(i);
  }
  return Dataset(std::move(Z), std::move(S), std::move(A), std::move(Y));
}

double effective_sample_size(const Vector& w) {
  const double s = w.sum();
  const double s2 = w.squaredNorm();
  if (s2 <= 0.0) throw std::invalid_argument("effective_sample_size: zero weights");
  return s * s / s2;
}

void check_weight_invariants(const WeightSolution& ws, const Dataset& d, double rel_tol) {
  const Index ns = d.n_source();
  if (ws.w.size() != ns) throw std::invalid_argument("weights: length != n_s");
  if ((ws.w.array() < 0.0).any()) throw std::invalid_argument("weights: negative entry");
  double sum1 = 0.0, sum0 = 0.0;
  const auto& rows = d.source_rows();
  for (Index k = 0; k < ns; ++k) {
    if (*d.treatment(rows[static_cast<size_t>(k)]) == 1) sum1 += ws.w[k];
    else sum0 += ws.w[k];
  }
  const double target = static_cast<double>(ns);
  if (std::abs(sum1 - target) > rel_tol * target || std::abs(sum0 - target) > rel_tol * target) {
    throw std::invalid_argument("weights: group sums deviate from n_s");
  }
  const double ess = effective_sample_size(ws.w);
  if (!(ess > 0.0) || ess > 2.0 * target * (1.0 + rel_tol)) {
    throw std::invalid_argument("weights: ESS outside (0, 2 n_s]");
  }
  if (std::isfinite(ws.ess) && std::abs(ws.ess - ess) > 1e-6 * ess) {
    throw std::invalid_argument("weights: stored ESS inconsistent");
  }
}

WeightSolution uniform_weights(const Dataset& d) {
  const Index ns = d.n_source();
  const auto& g = d.groups();
  const double w1 = static_cast<double>(ns) / static_cast<double>(g.s1.size());
  const double w0 = static_cast<double>(ns) / static_cast<double>(g.s0.size());
  WeightSolution ws;
  ws.w.resize(ns);
  const auto& rows = d.source_rows();
  for (Index k = 0; k < ns; ++k) {
    ws.w[k] = (*d.treatment(rows[static_cast<size_t>(k)]) == 1) ? w1 : w0;
  }
  ws.ess = effective_sample_size(ws.w);
  return ws;
}

}  // namespace itrbal
