#pragma once

#include <string>
#include <vector>

#include "cora/extraction.hpp"
#include "cora/train.hpp"

namespace cora {

// "%.17g" rendering; parsing the text back recovers the identical bits.
std::string format_double(double v);

// Fields containing commas, quotes, or newlines are quoted and escaped.
std::string csv_line(const std::vector<std::string>& fields);

std::string metrics_csv(const RunMetrics& metrics);

// Long format: one row per eval step of every cell.
std::string sweep_metrics_csv(const std::vector<SweepCell>& cells);

// One row per cell; failed cells keep their row with the error filled in.
std::string sweep_summary_csv(const std::vector<SweepCell>& cells);

std::string variance_report_csv(const std::vector<VarianceCountRow>& rows);
std::string variance_curves_csv(const std::vector<VarianceCurvePoint>& points);

// Writes via temp file and rename; no partial files on failure.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

}  // namespace cora
