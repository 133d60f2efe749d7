#include <mdmtl/csv.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace mdmtl {

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;  // distinguishes "" (empty record) from a blank line
    char c;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        if (field_started || !record.empty()) {
            end_field();
            records.push_back(std::move(record));
        }
        record.clear();
        field_started = false;
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                field_started = true;
                end_field();
                break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field_started = true;
                field.push_back(c);
        }
    }
    if (in_quotes) throw ParseError("csv: unterminated quoted field at end of input");
    end_record();
    return records;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

std::string format_number(double x) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc{}) throw NumericalError("format_number: conversion failed");
    return std::string(buf.data(), ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
    const auto s = trim(text);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

MultiTaskDataset load_csv(std::istream& in, const std::string& task_column,
                          const std::string& outcome_column, LoadReport* report) {
    auto records = read_csv_records(in);
    if (records.empty()) throw SchemaError("csv: missing header row");
    auto header = records.front();
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    for (auto& h : header) h = trim(h);

    std::ptrdiff_t task_idx = -1, outcome_idx = -1;
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!seen.emplace(header[i], i).second) {
            throw SchemaError("csv: duplicate column '" + header[i] + "'");
        }
        if (header[i] == task_column) task_idx = static_cast<std::ptrdiff_t>(i);
        if (header[i] == outcome_column) outcome_idx = static_cast<std::ptrdiff_t>(i);
    }
    if (task_idx < 0) throw SchemaError("csv: missing task column '" + task_column + "'");
    if (outcome_idx < 0) throw SchemaError("csv: missing outcome column '" + outcome_column + "'");
    if (task_idx == outcome_idx) throw SchemaError("csv: task and outcome column are the same");

    std::vector<std::size_t> feature_cols;
    MultiTaskDataset ds;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (static_cast<std::ptrdiff_t>(i) == task_idx || static_cast<std::ptrdiff_t>(i) == outcome_idx) continue;
        feature_cols.push_back(i);
        ds.feature_names.push_back(header[i]);
    }
    const auto J = feature_cols.size();

    struct Accum {
        std::vector<double> x;
        std::vector<double> y;
    };
    std::vector<std::string> order;
    std::map<std::string, Accum> acc;
    LoadReport rep;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const auto row_no = std::to_string(r + 1);  // 1-based line, header is row 1
        if (rec.size() != header.size()) {
            throw ParseError("csv: row " + row_no + " has " + std::to_string(rec.size()) +
                             " fields, header has " + std::to_string(header.size()));
        }
        ++rep.rows_read;
        const auto label = trim(rec[static_cast<std::size_t>(task_idx)]);
        if (label.empty()) {
            throw ParseError("csv: row " + row_no + ", column '" + task_column + "': missing task value");
        }
        auto [it, inserted] = acc.try_emplace(label);
        if (inserted) order.push_back(label);
        const auto& ycell = rec[static_cast<std::size_t>(outcome_idx)];
        if (trim(ycell).empty()) {
            ++rep.dropped_missing_outcome;
            continue;
        }
        double y;
        if (!parse_double(ycell, y) || !std::isfinite(y)) {
            throw ParseError("csv: row " + row_no + ", column '" + outcome_column +
                             "': not a number: '" + ycell + "'");
        }
        for (std::size_t k = 0; k < J; ++k) {
            const auto& cell = rec[feature_cols[k]];
            double v;
            if (!parse_double(cell, v) || !std::isfinite(v)) {
                throw ParseError("csv: row " + row_no + ", column '" + ds.feature_names[k] +
                                 "': " + (trim(cell).empty() ? std::string("missing value")
                                                             : "not a number: '" + cell + "'"));
            }
            it->second.x.push_back(v);
        }
        it->second.y.push_back(y);
    }
    if (order.empty()) throw DegenerateTaskError("csv: no data rows");

    for (const auto& label : order) {
        const auto& a = acc[label];
        if (a.y.empty()) {
            throw DegenerateTaskError("csv: task '" + label +
                                      "' has no rows after dropping missing outcomes");
        }
        TaskData t;
        t.label = label;
        const auto n = static_cast<Eigen::Index>(a.y.size());
        t.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            a.x.data(), n, static_cast<Eigen::Index>(J));
        t.Y = Eigen::Map<const VectorXd>(a.y.data(), n);
        ds.tasks.push_back(std::move(t));
    }
    validate(ds);
    if (report) *report = rep;
    return ds;
}

MultiTaskDataset load_csv(const std::filesystem::path& path, const std::string& task_column,
                          const std::string& outcome_column, LoadReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    try {
        return load_csv(in, task_column, outcome_column, report);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_csv(std::ostream& out, const MultiTaskDataset& ds, const std::string& task_column,
               const std::string& outcome_column) {
    out << csv_escape(task_column) << ',' << csv_escape(outcome_column);
    for (const auto& f : ds.feature_names) out << ',' << csv_escape(f);
    out << '\n';
    for (const auto& t : ds.tasks) {
        const auto label = csv_escape(t.label);
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            out << label << ',' << format_number(t.Y(i));
            for (Eigen::Index j = 0; j < t.X.cols(); ++j) out << ',' << format_number(t.X(i, j));
            out << '\n';
        }
    }
}

void write_csv(const std::filesystem::path& path, const MultiTaskDataset& ds,
               const std::string& task_column, const std::string& outcome_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    write_csv(out, ds, task_column, outcome_column);
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace mdmtl
