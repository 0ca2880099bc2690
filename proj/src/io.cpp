#include "jitterlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "jitterlab/errors.hpp"

namespace jitterlab {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const char c : data) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

std::string format_number(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.12g", value);
  return buffer;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  require(cells.size() == header.size(), ErrorKind::invalid_dimension,
          "csv row has " + std::to_string(cells.size()) + " cells, header has " +
              std::to_string(header.size()));
  rows.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto join = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  for (const auto& comment : comments) out += "# " + comment + "\n";
  join(header);
  for (const auto& row : rows) join(row);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path target = path.has_parent_path() ? path : std::filesystem::path(".") / path;
  std::error_code ec;
  if (!std::filesystem::is_directory(target.parent_path(), ec)) {
    fail(ErrorKind::io, "output directory does not exist: '" + target.parent_path().string() + "'");
  }
  std::filesystem::path temp = target;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + temp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(temp, ec);
      fail(ErrorKind::io, "write to '" + temp.string() + "' failed");
    }
  }
  std::filesystem::rename(temp, target, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    fail(ErrorKind::io, "cannot move output into place at '" + target.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CsvTable risk_report_table(const RiskReport<double>& report) {
  CsvTable table;
  table.header = {"eps", "risk", "ci_low", "ci_high", "n_samples", "method"};
  const std::string method(to_string(report.method));
  for (std::size_t i = 0; i < report.size(); ++i) {
    table.add_row({format_number(report.eps_grid[i]), format_number(report.values[i]),
                   format_number(report.ci_low[i]), format_number(report.ci_high[i]),
                   std::to_string(report.n_samples), method});
  }
  return table;
}

CsvTable trace_table(const TrainTrace<double>& trace) {
  CsvTable table;
  table.header = {"iteration", "loss"};
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    table.add_row({std::to_string(trace.iterations[i]), format_number(trace.losses[i])});
  }
  return table;
}

CsvTable sweep_table(const SweepResult<double>& sweep) {
  CsvTable table;
  table.header = {"sigma_w", "eps", "risk", "ci_low", "ci_high"};
  for (std::size_t w = 0; w < sweep.sigma_w_grid.size(); ++w) {
    const RiskReport<double>& report = sweep.reports[w];
    for (std::size_t e = 0; e < sweep.eps_grid.size(); ++e) {
      table.add_row({format_number(sweep.sigma_w_grid[w]), format_number(sweep.eps_grid[e]),
                     format_number(report.values[e]), format_number(report.ci_low[e]),
                     format_number(report.ci_high[e])});
    }
  }
  return table;
}

namespace {

/// 17 significant digits so that parsing recovers the exact double.
std::string exact_number(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void append_matrix(std::string& out, const Matrix<double>& matrix, char separator) {
  for (Index i = 0; i < matrix.rows(); ++i) {
    for (Index j = 0; j < matrix.cols(); ++j) {
      if (j) out += separator;
      out += exact_number(matrix(i, j));
    }
    out += '\n';
  }
}

std::vector<double> parse_numbers(std::string_view line, char separator) {
  std::vector<double> out;
  std::string cell;
  std::istringstream stream{std::string(line)};
  if (separator == ' ') {
    while (stream >> cell) out.push_back(std::stod(cell));
  } else {
    while (std::getline(stream, cell, separator)) out.push_back(std::stod(cell));
  }
  return out;
}

Matrix<double> read_block(std::istringstream& in, Index rows, Index cols) {
  Matrix<double> block(rows, cols);
  std::string line;
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) fail(ErrorKind::io, "factored estimator: truncated block");
    const std::vector<double> values = parse_numbers(line, ' ');
    require(static_cast<Index>(values.size()) == cols, ErrorKind::io,
            "factored estimator: row has the wrong number of entries");
    for (Index j = 0; j < cols; ++j) block(i, j) = values[static_cast<std::size_t>(j)];
  }
  return block;
}

}  // namespace

std::string estimator_dense_text(const LinearEstimator<double>& estimator) {
  std::string out;
  append_matrix(out, estimator.matrix(), ',');
  return out;
}

LinearEstimator<double> parse_estimator_dense(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::vector<double>> rows;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      rows.push_back(parse_numbers(line, ','));
    }
  } catch (const std::exception&) {
    fail(ErrorKind::io, "dense estimator: malformed number");
  }
  require(!rows.empty(), ErrorKind::io, "dense estimator: no rows");
  Matrix<double> matrix(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == rows.front().size(), ErrorKind::io, "dense estimator: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      matrix(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return LinearEstimator<double>(std::move(matrix));
}

std::string estimator_factored_text(const LinearEstimator<double>& estimator) {
  const Matrix<double>& left = estimator.left();
  const Vector<double>& values = estimator.singular_values();
  const Matrix<double>& right = estimator.right();
  std::string out;
  out += "left " + std::to_string(left.rows()) + " " + std::to_string(left.cols()) + "\n";
  append_matrix(out, left, ' ');
  out += "values " + std::to_string(values.size()) + "\n";
  append_matrix(out, values.transpose(), ' ');
  out += "right " + std::to_string(right.rows()) + " " + std::to_string(right.cols()) + "\n";
  append_matrix(out, right, ' ');
  return out;
}

LinearEstimator<double> parse_estimator_factored(std::string_view text) {
  std::istringstream in{std::string(text)};
  auto header = [&](const std::string& expected, int count) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::io, "factored estimator: missing '" + expected + "' block");
    std::istringstream fields(line);
    std::string name;
    fields >> name;
    require(name == expected, ErrorKind::io,
            "factored estimator: expected '" + expected + "', got '" + name + "'");
    std::vector<Index> dims(static_cast<std::size_t>(count));
    for (auto& dim : dims) {
      require(static_cast<bool>(fields >> dim) && dim >= 0, ErrorKind::io,
              "factored estimator: bad dimensions for '" + expected + "'");
    }
    return dims;
  };
  try {
    const auto left_dims = header("left", 2);
    const Matrix<double> left = read_block(in, left_dims[0], left_dims[1]);
    const auto value_dims = header("values", 1);
    const Vector<double> values =
        value_dims[0] == 0 ? Vector<double>(0) : Vector<double>(read_block(in, 1, value_dims[0]).transpose());
    const auto right_dims = header("right", 2);
    const Matrix<double> right = read_block(in, right_dims[0], right_dims[1]);
    return LinearEstimator<double>::from_factors(left, values, right);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::io, "factored estimator: malformed number");
  }
}

}  // namespace jitterlab
