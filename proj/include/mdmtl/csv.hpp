#pragma once

#include <mdmtl/dataset.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mdmtl {

/// RFC-4180 record reader: quoted fields, doubled-quote escapes, CRLF or LF.
/// Returns every record of the stream including the header.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

/// Quotes a field only when it contains a delimiter, quote or line break.
std::string csv_escape(const std::string& field);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_number(double x);

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t dropped_missing_outcome = 0;
};

/// Groups rows by the task column (tasks ordered by first appearance, rows in
/// file order). Every column other than task/outcome is a numeric feature.
/// Rows with an empty outcome cell are dropped and counted in `report`.
MultiTaskDataset load_csv(std::istream& in, const std::string& task_column,
                          const std::string& outcome_column, LoadReport* report = nullptr);
MultiTaskDataset load_csv(const std::filesystem::path& path, const std::string& task_column,
                          const std::string& outcome_column, LoadReport* report = nullptr);

/// Writes `task_column, outcome_column, features...` with one row per
/// observation, tasks in order. Output is a valid load_csv input.
void write_csv(std::ostream& out, const MultiTaskDataset& ds, const std::string& task_column,
               const std::string& outcome_column);
void write_csv(const std::filesystem::path& path, const MultiTaskDataset& ds,
               const std::string& task_column, const std::string& outcome_column);

}  // namespace mdmtl
