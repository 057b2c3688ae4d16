#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "twoway/core_model.hpp"
#include "twoway/model_selection.hpp"
#include "twoway/predict.hpp"
#include "twoway/simulation.hpp"

namespace twoway {

inline constexpr const char* kVersion = "0.1.0";

struct ReadOptions {
  bool header = false;    // first line holds column names
  bool rownames = false;  // first field of each line holds the row name
  char delimiter = ',';
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool is_skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

inline std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidArgument, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// Rectangular numeric CSV. Empty fields and NA mark missing cells. Blank
/// lines and lines starting with '#' are skipped.
inline TwoWayArray read_array(std::istream& in, const ReadOptions& opt = {}, const std::string& source = "<input>") {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> seen;
  TwoWayArray out;
  std::string line;
  long lineno = 0;
  bool header_pending = opt.header;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_skippable(line)) continue;
    auto fields = detail::split_fields(line, opt.delimiter);
    if (header_pending) {
      header_pending = false;
      std::size_t k = 0;
      if (opt.rownames && fields.size() > 0) k = 1;
      for (; k < fields.size(); ++k) out.col_names.push_back(detail::unquote(fields[k]));
      continue;
    }
    std::size_t first = 0;
    if (opt.rownames) {
      out.row_names.push_back(detail::unquote(fields[0]));
      first = 1;
    }
    const std::size_t n = fields.size() - first;
    if (rows.empty()) {
      width = n;
      if (width == 0) fail(ErrorKind::EmptyMatrix, source + ": line " + std::to_string(lineno) + " has no data fields");
    } else if (n != width) {
      fail(ErrorKind::RaggedRows, source + ": line " + std::to_string(lineno) + " has " + std::to_string(n) +
                                      " fields, expected " + std::to_string(width));
    }
    std::vector<double> vals(n, 0.0);
    std::vector<bool> obs(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      const std::string_view f = detail::trim(fields[first + k]);
      if (f.empty() || f == "NA" || f == "\"NA\"") continue;
      double x = 0.0;
      const auto* begin = f.data() + (f.front() == '+' ? 1 : 0);
      const auto res = std::from_chars(begin, f.data() + f.size(), x);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(x))
        fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ", column " +
                                        std::to_string(first + k + 1) + ": cannot parse '" + std::string(f) +
                                        "' as a number");
      vals[k] = x;
      obs[k] = true;
    }
    rows.push_back(std::move(vals));
    seen.push_back(std::move(obs));
  }
  if (rows.empty()) fail(ErrorKind::EmptyMatrix, source + ": no data rows");
  if (!out.col_names.empty() && out.col_names.size() != width)
    fail(ErrorKind::RaggedRows, source + ": header has " + std::to_string(out.col_names.size()) +
                                    " names for " + std::to_string(width) + " columns");
  const auto r = static_cast<Eigen::Index>(rows.size()), s = static_cast<Eigen::Index>(width);
  out.values = Matrix::Zero(r, s);
  out.mask = Mask::Constant(r, s, false);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < s; ++j) {
      out.values(i, j) = rows[i][j];
      out.mask(i, j) = seen[i][j];
    }
  return out;
}

inline TwoWayArray read_array(const std::string& path, const ReadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open '" + path + "'");
  return read_array(in, opt, path);
}

/// Writes values in shortest round-trip form, NA for missing cells. Names are
/// written when present.
inline void write_array(std::ostream& out, const TwoWayArray& data) {
  const bool rn = !data.row_names.empty();
  if (!data.col_names.empty()) {
    for (std::size_t j = 0; j < data.col_names.size(); ++j) out << (j || rn ? "," : "") << data.col_names[j];
    out << '\n';
  }
  for (int i = 0; i < data.rows(); ++i) {
    if (rn) out << data.row_names[i];
    for (int j = 0; j < data.cols(); ++j) {
      if (j || rn) out << ',';
      if (data.observed(i, j)) out << detail::format_double(data.values(i, j));
      else out << "NA";
    }
    out << '\n';
  }
}

/// Per-row normal scores Phi^-1((rank - 3/8) / (m + 1/4)) over observed cells,
/// m the observed count, tied values sharing their average rank.
inline TwoWayArray normal_scores(const TwoWayArray& data) {
  data.check_shape();
  const boost::math::normal_distribution<double> z;
  TwoWayArray out = data;
  std::vector<std::pair<double, int>> cells;
  for (int i = 0; i < data.rows(); ++i) {
    cells.clear();
    for (int j = 0; j < data.cols(); ++j)
      if (data.observed(i, j)) cells.emplace_back(data.values(i, j), j);
    const std::string where = "row " + std::to_string(i + 1);
    if (cells.size() < 2) fail(ErrorKind::DegenerateRow, where + " has fewer than two observed cells");
    std::sort(cells.begin(), cells.end());
    if (cells.front().first == cells.back().first) fail(ErrorKind::DegenerateRow, where + " is constant");
    const double m = static_cast<double>(cells.size());
    for (std::size_t a = 0; a < cells.size();) {
      std::size_t b = a;
      while (b + 1 < cells.size() && cells[b + 1].first == cells[a].first) ++b;
      const double rank = 0.5 * static_cast<double>(a + b) + 1.0;
      const double score = boost::math::quantile(z, (rank - 0.375) / (m + 0.25));
      for (std::size_t k = a; k <= b; ++k) out.values(i, cells[k].second) = score;
      a = b + 1;
    }
  }
  return out;
}

/// "# twoway <version> seed=<seed> cmd=<command>" provenance line.
inline std::string provenance_line(std::uint64_t seed, const std::string& command) {
  return std::string("# twoway ") + kVersion + " seed=" + std::to_string(seed) + " cmd=" + command;
}

// ---------------------------------------------------------------- params

/// Long format: parameter,i,j,value with 1-based indices and 0 for unused ones.
/// rho is written for reference and ignored on reading.
inline void write_params(std::ostream& out, const ModelParams& p) {
  out << "parameter,i,j,value\n";
  auto row = [&](const char* name, int i, int j, double x) {
    out << name << ',' << i << ',' << j << ',' << detail::format_double(x) << '\n';
  };
  for (int u = 0; u < p.k1(); ++u) row("lambda", u + 1, 0, p.lambda(u));
  for (int a = 0; a < p.k2(); ++a)
    for (int b = 0; b < p.k2(); ++b) row("Pi", a + 1, b + 1, p.Pi(a, b));
  for (int u = 0; u < p.k1(); ++u)
    for (int v = 0; v < p.k2(); ++v) row("Psi", u + 1, v + 1, p.Psi(u, v));
  row("sigma2", 0, 0, p.sigma2);
  const Vector rho = stationary_distribution(p.Pi);
  for (int v = 0; v < p.k2(); ++v) row("rho", v + 1, 0, rho(v));
}

inline ModelParams read_params(std::istream& in, const std::string& source = "<params>") {
  struct Entry {
    std::string name;
    int i, j;
    double x;
  };
  std::vector<Entry> entries;
  std::string line;
  long lineno = 0;
  bool header = true;
  int k1 = 0, k2 = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_skippable(line)) continue;
    if (header) {
      header = false;
      if (detail::trim(line) != "parameter,i,j,value")
        fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ": expected header parameter,i,j,value");
      continue;
    }
    const auto f = detail::split_fields(line, ',');
    if (f.size() != 4) fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ": expected 4 fields");
    Entry e{std::string(detail::trim(f[0])), 0, 0, 0.0};
    auto num = [&](std::string_view s, auto& v, int col) {
      s = detail::trim(s);
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorKind::ParseError,
             source + ": line " + std::to_string(lineno) + ", column " + std::to_string(col) + ": bad number");
    };
    num(f[1], e.i, 2);
    num(f[2], e.j, 3);
    num(f[3], e.x, 4);
    if (e.name == "lambda") k1 = std::max(k1, e.i);
    else if (e.name == "Pi") k2 = std::max({k2, e.i, e.j});
    else if (e.name != "Psi" && e.name != "sigma2" && e.name != "rho")
      fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ": unknown parameter '" + e.name + "'");
    entries.push_back(e);
  }
  if (k1 < 1 || k2 < 1) fail(ErrorKind::ParseError, source + ": lambda or Pi block missing");
  ModelParams p;
  p.lambda = Vector::Constant(k1, std::numeric_limits<double>::quiet_NaN());
  p.Pi = Matrix::Constant(k2, k2, std::numeric_limits<double>::quiet_NaN());
  p.Psi = Matrix::Constant(k1, k2, std::numeric_limits<double>::quiet_NaN());
  p.sigma2 = std::numeric_limits<double>::quiet_NaN();
  auto in_range = [&](int i, int hi) { return i >= 1 && i <= hi; };
  for (const auto& e : entries) {
    if (e.name == "sigma2") {
      p.sigma2 = e.x;
      continue;
    }
    const bool ok = e.name == "lambda" ? in_range(e.i, k1)
                    : e.name == "rho"  ? in_range(e.i, k2)
                                       : in_range(e.i, e.name == "Pi" ? k2 : k1) && in_range(e.j, k2);
    if (!ok) fail(ErrorKind::DimensionMismatch, source + ": " + e.name + " index out of range");
    if (e.name == "lambda") p.lambda(e.i - 1) = e.x;
    else if (e.name == "Pi") p.Pi(e.i - 1, e.j - 1) = e.x;
    else if (e.name == "Psi") p.Psi(e.i - 1, e.j - 1) = e.x;
  }
  if (!p.lambda.allFinite() || !p.Pi.allFinite() || !p.Psi.allFinite() || !std::isfinite(p.sigma2))
    fail(ErrorKind::ParseError, source + ": incomplete parameter blocks");
  validate_params(p, {1, 1, k1, k2});
  return p;
}

inline ModelParams read_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open '" + path + "'");
  return read_params(in, path);
}

inline void write_trace(std::ostream& out, const FitResult& fr) {
  out << "iteration,objective\n";
  for (std::size_t t = 0; t < fr.trace.size(); ++t) out << t + 1 << ',' << detail::format_double(fr.trace[t]) << '\n';
}

// ---------------------------------------------------------------- scenarios

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::string cleaned = text;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::replace(cleaned.begin(), cleaned.end(), ';', ' ');
  std::istringstream is(cleaned);
  std::string tok;
  while (is >> tok) {
    double x = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail(ErrorKind::ParseError, "scenario key '" + key + "': cannot parse '" + tok + "'");
    out.push_back(x);
  }
  return out;
}

inline Matrix parse_matrix(const std::string& text, const std::string& key, int rows, int cols) {
  const auto x = parse_numbers(text, key);
  if (x.size() != static_cast<std::size_t>(rows) * cols)
    fail(ErrorKind::DimensionMismatch, "scenario key '" + key + "' needs " + std::to_string(rows * cols) +
                                           " entries, got " + std::to_string(x.size()));
  Matrix m(rows, cols);
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) m(a, b) = x[static_cast<std::size_t>(a) * cols + b];
  return m;
}

inline std::string format_matrix(const Matrix& m) {
  std::string s;
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    if (a) s += "; ";
    for (Eigen::Index b = 0; b < m.cols(); ++b) s += (b ? " " : "") + format_double(m(a, b));
  }
  return s;
}

}  // namespace detail

/// Key-value scenario file, one "key = value" per line. Matrices are given
/// row by row with rows separated by ';'. Keys: name, r, s, k1, k2, lambda,
/// Pi, Psi, sigma2, n_replicates, methods, seed.
inline Scenario read_scenario(std::istream& in, const std::string& source = "<scenario>") {
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(detail::trim(std::string_view(line).substr(0, eq)));
    const std::string value(detail::trim(std::string_view(line).substr(eq + 1)));
    if (kv.count(key)) fail(ErrorKind::ParseError, source + ": line " + std::to_string(lineno) + ": duplicate key " + key);
    kv[key] = value;
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorKind::ParseError, source + ": missing key '" + key + "'");
    return it->second;
  };
  auto integer = [&](const std::string& key) {
    const auto x = detail::parse_numbers(need(key), key);
    if (x.size() != 1 || x[0] != std::floor(x[0]))
      fail(ErrorKind::ParseError, source + ": key '" + key + "' must be one integer");
    return static_cast<long long>(x[0]);
  };
  Scenario sc;
  if (kv.count("name")) sc.name = kv["name"];
  sc.dims = {static_cast<int>(integer("r")), static_cast<int>(integer("s")), static_cast<int>(integer("k1")),
             static_cast<int>(integer("k2"))};
  sc.dims.check();
  sc.truth.lambda = detail::parse_matrix(need("lambda"), "lambda", sc.dims.k1, 1);
  sc.truth.Pi = detail::parse_matrix(need("Pi"), "Pi", sc.dims.k2, sc.dims.k2);
  sc.truth.Psi = detail::parse_matrix(need("Psi"), "Psi", sc.dims.k1, sc.dims.k2);
  const auto s2 = detail::parse_numbers(need("sigma2"), "sigma2");
  if (s2.size() != 1) fail(ErrorKind::ParseError, source + ": key 'sigma2' must be one number");
  sc.truth.sigma2 = s2[0];
  if (kv.count("n_replicates")) sc.n_replicates = static_cast<int>(integer("n_replicates"));
  if (kv.count("seed")) {
    const std::string& t = kv["seed"];
    std::uint64_t seed = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), seed);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
      fail(ErrorKind::ParseError, source + ": key 'seed' must be a non-negative integer");
    sc.seed = seed;
  }
  if (kv.count("methods")) {
    sc.methods.clear();
    std::string list = kv["methods"];
    std::replace(list.begin(), list.end(), ',', ' ');
    std::istringstream is(list);
    std::string m;
    while (is >> m) sc.methods.push_back(parse_method(m));
  }
  sc.check();
  return sc;
}

inline Scenario read_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open '" + path + "'");
  return read_scenario(in, path);
}

inline void write_scenario(std::ostream& out, const Scenario& sc) {
  out << "name = " << sc.name << '\n'
      << "r = " << sc.dims.r << '\n'
      << "s = " << sc.dims.s << '\n'
      << "k1 = " << sc.dims.k1 << '\n'
      << "k2 = " << sc.dims.k2 << '\n'
      << "lambda = " << detail::format_matrix(sc.truth.lambda.transpose()) << '\n'
      << "Pi = " << detail::format_matrix(sc.truth.Pi) << '\n'
      << "Psi = " << detail::format_matrix(sc.truth.Psi) << '\n'
      << "sigma2 = " << detail::format_double(sc.truth.sigma2) << '\n'
      << "n_replicates = " << sc.n_replicates << '\n'
      << "methods =";
  for (Method m : sc.methods) out << ' ' << to_string(m);
  out << '\n' << "seed = " << sc.seed << '\n';
}

// ---------------------------------------------------------------- reports

inline void write_accuracy(std::ostream& out, const AccuracyReport& rep) {
  out << "method,parameter,bias,rmse\n";
  for (const auto& m : rep.methods)
    for (const auto& e : m.entries)
      out << to_string(m.method) << ',' << e.parameter << ',' << detail::format_double(e.bias) << ','
          << detail::format_double(e.rmse) << '\n';
}

inline void write_timing(std::ostream& out, const AccuracyReport& rep) {
  out << "method,median_seconds,mad_seconds,n_fits,n_failures,flagged\n";
  for (const auto& m : rep.methods)
    out << to_string(m.method) << ',' << detail::format_double(m.median_seconds) << ','
        << detail::format_double(m.mad_seconds) << ',' << m.n_fits << ',' << m.n_failures << ','
        << (m.flagged ? 1 : 0) << '\n';
}

inline void write_selection(std::ostream& out, const SelectionTable& t) {
  out << "k1,k2,n_params,cl_cv,n_cv,q\n";
  for (const auto& e : t.entries)
    out << e.point.k1 << ',' << e.point.k2 << ',' << e.n_params << ',' << detail::format_double(e.cl_cv) << ','
        << e.n_cv << ',' << detail::format_double(e.q) << '\n';
}

namespace detail {

inline std::string label_of(const std::vector<std::string>& names, int k) {
  return names.empty() ? std::to_string(k + 1) : names[k];
}

}  // namespace detail

/// labels.csv: axis,index,name,label for every row then every column.
inline void write_labels(std::ostream& out, const TwoWayArray& data, const Prediction& pr) {
  out << "axis,index,name,label\n";
  for (std::size_t i = 0; i < pr.row_labels.size(); ++i)
    out << "row," << i + 1 << ',' << detail::label_of(data.row_names, static_cast<int>(i)) << ',' << pr.row_labels[i]
        << '\n';
  for (std::size_t j = 0; j < pr.col_labels.size(); ++j)
    out << "column," << j + 1 << ',' << detail::label_of(data.col_names, static_cast<int>(j)) << ','
        << pr.col_labels[j] << '\n';
}

/// posteriors.csv: axis,index,state,probability in long format.
inline void write_posteriors(std::ostream& out, const Prediction& pr) {
  out << "axis,index,state,probability\n";
  for (Eigen::Index i = 0; i < pr.row_posteriors.rows(); ++i)
    for (Eigen::Index u = 0; u < pr.row_posteriors.cols(); ++u)
      out << "row," << i + 1 << ',' << u + 1 << ',' << detail::format_double(pr.row_posteriors(i, u)) << '\n';
  for (Eigen::Index j = 0; j < pr.col_posteriors.rows(); ++j)
    for (Eigen::Index v = 0; v < pr.col_posteriors.cols(); ++v)
      out << "column," << j + 1 << ',' << v + 1 << ',' << detail::format_double(pr.col_posteriors(j, v)) << '\n';
}

}  // namespace twoway
