#include "tdhm/io.hpp"

#include "tdhm/numeric.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tdhm::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, delim)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == delim) out.push_back("");
  return out;
}

bool is_binary_token(const std::string& s) { return s == "0" || s == "1"; }

double parse_double(const std::string& s, int line) {
  if (s == "inf") return pos_inf();
  if (s == "-inf") return neg_inf();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + s + "'");
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return in;
}

std::ofstream create_or_throw(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

std::string format_g17(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

GroupedData read_groups_file(const std::string& path, bool assume_time_column) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  int lineno = 0;

  std::vector<std::string> labels;
  bool has_time = assume_time_column;
  bool saw_header = false;
  std::vector<std::vector<int>> rows;
  std::vector<double> times;
  int width = -1;

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, ',');

    if (rows.empty() && !saw_header) {
      const bool any_nonbinary = std::any_of(cells.begin(), cells.end(), [&](const std::string& c) {
        return !is_binary_token(c) && !(assume_time_column && &c == &cells.front());
      });
      if (any_nonbinary) {
        saw_header = true;
        std::size_t first = 0;
        std::string head = cells.empty() ? "" : cells[0];
        std::transform(head.begin(), head.end(), head.begin(), ::tolower);
        if (head == "time") {
          has_time = true;
          first = 1;
        }
        labels.assign(cells.begin() + first, cells.end());
        width = static_cast<int>(labels.size());
        if (width == 0) throw ParseError(lineno, "header has no node labels");
        continue;
      }
    }

    const std::size_t offset = has_time ? 1 : 0;
    if (cells.size() <= offset) throw ParseError(lineno, "row has no entries");
    const int row_width = static_cast<int>(cells.size() - offset);
    if (width < 0) width = row_width;
    if (row_width != width) {
      throw ParseError(lineno, "expected " + std::to_string(width) + " entries, got " +
                                   std::to_string(row_width));
    }
    if (has_time) times.push_back(parse_double(cells[0], lineno));
    std::vector<int> row(width);
    int row_sum = 0;
    for (int j = 0; j < width; ++j) {
      const std::string& c = cells[offset + j];
      if (!is_binary_token(c)) {
        throw ParseError(lineno, "entry '" + c + "' is not 0 or 1");
      }
      row[j] = (c == "1");
      row_sum += row[j];
    }
    if (row_sum == 0) throw ParseError(lineno, "empty group (all-zero row)");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(lineno, "no data rows");

  BinaryMatrix g(static_cast<int>(rows.size()), width);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (int j = 0; j < width; ++j) g(static_cast<int>(t), j) = rows[t][j];
  }
  std::optional<std::vector<double>> ts;
  if (has_time) ts = std::move(times);
  return GroupedData::create(std::move(g), std::move(labels), std::move(ts));
}

void write_groups_file(const std::string& path, const GroupedData& g) {
  std::ofstream out = create_or_throw(path);
  const bool has_time = g.timestamps.has_value();
  if (has_time) out << "time,";
  for (int j = 0; j < g.n(); ++j) {
    out << g.node_labels[j] << (j + 1 < g.n() ? "," : "\n");
  }
  for (int t = 0; t < g.T(); ++t) {
    if (has_time) out << format_g17((*g.timestamps)[t]) << ",";
    for (int j = 0; j < g.n(); ++j) {
      out << g.groups(t, j) << (j + 1 < g.n() ? "," : "\n");
    }
  }
}

ModelParams read_params_file(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  int lineno = 0;

  auto next_line = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::istringstream is(t);
      std::vector<std::string> tokens;
      std::string tok;
      while (is >> tok) tokens.push_back(tok);
      return tokens;
    }
    throw ParseError(lineno, "unexpected end of params file");
  };

  auto header = next_line();
  if (header.size() != 2 || header[0] != "tdhm_params" || header[1] != "v1") {
    throw ParseError(lineno, "expected 'tdhm_params v1' header");
  }
  auto n_line = next_line();
  if (n_line.size() != 2 || n_line[0] != "n") throw ParseError(lineno, "expected 'n <size>'");
  const int n = static_cast<int>(parse_double(n_line[1], lineno));
  if (n < 1) throw ParseError(lineno, "n must be positive");

  double alpha = 0, beta = 0, gamma = 0;
  for (auto item : {std::pair<const char*, double*>{"alpha", &alpha},
                    std::pair<const char*, double*>{"beta", &beta},
                    std::pair<const char*, double*>{"gamma", &gamma}}) {
    auto t = next_line();
    if (t.size() != 2 || t[0] != item.first) {
      throw ParseError(lineno, std::string("expected '") + item.first + " <value>'");
    }
    *item.second = parse_double(t[1], lineno);
  }

  auto u_line = next_line();
  if (u_line.size() != static_cast<std::size_t>(n) + 1 || u_line[0] != "u") {
    throw ParseError(lineno, "expected 'u' followed by n values");
  }
  Vector u(n);
  for (int i = 0; i < n; ++i) u[i] = parse_double(u_line[i + 1], lineno);

  auto th_line = next_line();
  if (th_line.size() != 1 || th_line[0] != "theta") {
    throw ParseError(lineno, "expected 'theta' block");
  }
  Matrix theta(n, n);
  for (int i = 0; i < n; ++i) {
    auto row = next_line();
    if (row.size() != static_cast<std::size_t>(n)) {
      throw ParseError(lineno, "theta row has wrong width");
    }
    for (int j = 0; j < n; ++j) theta(i, j) = parse_double(row[j], lineno);
  }
  return ModelParams::create(std::move(u), std::move(theta), alpha, beta, gamma);
}

void write_params_file(const std::string& path, const ModelParams& params) {
  std::ofstream out = create_or_throw(path);
  out << "tdhm_params v1\n";
  out << "n " << params.n << "\n";
  out << "alpha " << format_g17(params.alpha) << "\n";
  out << "beta " << format_g17(params.beta) << "\n";
  out << "gamma " << format_g17(params.gamma) << "\n";
  out << "u";
  for (int i = 0; i < params.n; ++i) out << " " << format_g17(params.u[i]);
  out << "\ntheta\n";
  for (int i = 0; i < params.n; ++i) {
    for (int j = 0; j < params.n; ++j) {
      out << format_g17(params.theta(i, j)) << (j + 1 < params.n ? " " : "\n");
    }
  }
}

RawRecords read_raw_records(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  int lineno = 0;

  RawRecords raw;
  std::map<std::string, int> index;
  bool fixed_universe = false;

  struct PendingEvent {
    double time;
    std::vector<std::vector<std::string>> label_cands;  // empty entry = binary
    std::vector<BinaryVector> binary_cands;
    std::vector<bool> is_binary;
    int line;
  };
  std::vector<PendingEvent> pending;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string prefix = "# nodes:";
      if (t.rfind(prefix, 0) == 0) {
        if (fixed_universe) throw ParseError(lineno, "duplicate nodes header");
        for (const auto& lab : split(t.substr(prefix.size()), ',')) {
          if (lab.empty()) throw ParseError(lineno, "empty node label");
          if (index.count(lab)) throw ParseError(lineno, "duplicate node label '" + lab + "'");
          index[lab] = static_cast<int>(raw.node_labels.size());
          raw.node_labels.push_back(lab);
        }
        fixed_universe = true;
      }
      continue;
    }

    std::vector<std::string> fields = split(t, '|');
    if (fields.size() < 2) {
      throw ParseError(lineno, "expected 'time | group [| group ...]'");
    }
    PendingEvent ev;
    ev.time = parse_double(fields[0], lineno);
    ev.line = lineno;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      std::vector<std::string> tokens = split(fields[f], ',');
      if (tokens.size() == 1 && tokens[0].empty()) {
        throw ParseError(lineno, "empty candidate group");
      }
      const bool binary = std::all_of(tokens.begin(), tokens.end(), is_binary_token);
      if (binary) {
        if (!fixed_universe) {
          throw ParseError(lineno, "binary candidate requires a '# nodes:' header");
        }
        if (tokens.size() != raw.node_labels.size()) {
          throw ParseError(lineno, "binary candidate has wrong width");
        }
        BinaryVector v(static_cast<int>(tokens.size()));
        for (std::size_t j = 0; j < tokens.size(); ++j) v[static_cast<int>(j)] = tokens[j] == "1";
        ev.binary_cands.push_back(std::move(v));
        ev.label_cands.emplace_back();
        ev.is_binary.push_back(true);
      } else {
        for (const auto& lab : tokens) {
          if (lab.empty()) throw ParseError(lineno, "empty node label in candidate");
          if (!index.count(lab)) {
            if (fixed_universe) {
              throw ParseError(lineno, "unknown node label '" + lab + "'");
            }
            index[lab] = static_cast<int>(raw.node_labels.size());
            raw.node_labels.push_back(lab);
          }
        }
        ev.label_cands.push_back(tokens);
        ev.binary_cands.emplace_back();
        ev.is_binary.push_back(false);
      }
    }
    pending.push_back(std::move(ev));
  }
  if (pending.empty()) throw ParseError(lineno, "no events");

  const int n = static_cast<int>(raw.node_labels.size());
  for (auto& pe : pending) {
    RawEvent ev;
    ev.time = pe.time;
    for (std::size_t k = 0; k < pe.is_binary.size(); ++k) {
      if (pe.is_binary[k]) {
        ev.candidates.push_back(std::move(pe.binary_cands[k]));
      } else {
        BinaryVector v = BinaryVector::Zero(n);
        for (const auto& lab : pe.label_cands[k]) v[index.at(lab)] = 1;
        ev.candidates.push_back(std::move(v));
      }
      if (ev.candidates.back().sum() == 0) {
        throw ParseError(pe.line, "empty candidate group");
      }
    }
    raw.events.push_back(std::move(ev));
  }
  return raw;
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  int lineno = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& c : split(line, ',')) row.push_back(parse_double(c, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(lineno, "ragged matrix row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(lineno, "empty matrix file");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.front().size(); ++j) {
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out = create_or_throw(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << format_g17(m(i, j)) << (j + 1 < m.cols() ? "," : "\n");
    }
  }
}

void write_labels_file(const std::string& path, const std::vector<std::string>& labels) {
  std::ofstream out = create_or_throw(path);
  for (const auto& lab : labels) out << lab << "\n";
}

}  // namespace tdhm::io
