#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jitterlab/estimators.hpp"
#include "jitterlab/risk.hpp"
#include "jitterlab/training.hpp"

namespace jitterlab {

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// 12 significant digits, "%.12g".
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  /// Comment lines ("# ..."), then the header, then one line per row.
  std::string str() const;
};

/// Writes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// eps,risk,ci_low,ci_high,n_samples,method (risk per coordinate).
CsvTable risk_report_table(const RiskReport<double>& report);
/// iteration,loss
CsvTable trace_table(const TrainTrace<double>& trace);
/// sigma_w,eps,risk,ci_low,ci_high
CsvTable sweep_table(const SweepResult<double>& sweep);

/// Dense n x m matrix, one CSV row per matrix row, no header.
std::string estimator_dense_text(const LinearEstimator<double>& estimator);
LinearEstimator<double> parse_estimator_dense(std::string_view text);

/// Three blocks, each introduced by "left <rows> <cols>", "values <k>" and
/// "right <rows> <cols>", holding whitespace-separated rows.
std::string estimator_factored_text(const LinearEstimator<double>& estimator);
LinearEstimator<double> parse_estimator_factored(std::string_view text);

}  // namespace jitterlab
