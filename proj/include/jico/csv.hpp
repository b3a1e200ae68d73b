#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jico/errors.hpp"
#include "jico/grouped_data.hpp"

namespace jico {

// Dataset CSV contract: header `group,y,x1,...,xp`; group is a string label,
// everything else decimal floating point. Feature files for prediction may
// omit the y column.

namespace csv_detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_number(const std::string& s, int line_no, const std::string& what) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    double value = 0.0;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw IoError("line " + std::to_string(line_no) + ": non-numeric " + what + " '" + s +
                      "'");
    return value;
}

// 17 significant digits round-trips doubles exactly.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace csv_detail

struct LoadedDataset {
    GroupedDataset dataset;
    // Original file row (0-based, excluding the header) for every sample,
    // per group, so outputs can be emitted in input order.
    std::vector<std::vector<Index>> row_ids;
};

// `require_y` distinguishes the full dataset contract from feature-only files
// used by prediction. Feature files may still carry a y column; it is parsed
// and kept.
inline LoadedDataset load_dataset_csv(const std::string& path, bool require_y = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
    const auto header = csv_detail::split_line(line);
    if (header.empty() || header[0] != "group")
        throw IoError("'" + path + "': first header column must be 'group'");
    const bool has_y = header.size() > 1 && header[1] == "y";
    if (require_y && !has_y)
        throw IoError("'" + path + "': second header column must be 'y'");
    const std::size_t first_feature = has_y ? 2 : 1;
    const Index p = static_cast<Index>(header.size() - first_feature);
    if (p < 1) throw IoError("'" + path + "': no feature columns");

    std::vector<std::string> labels;
    std::vector<std::vector<double>> ys;
    std::vector<std::vector<std::vector<double>>> rows;  // per group
    std::vector<std::vector<Index>> row_ids;

    int line_no = 1;
    Index data_row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = csv_detail::split_line(line);
        if (fields.size() != header.size())
            throw IoError("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
        const std::string& label = fields[0];
        std::size_t gi = 0;
        for (; gi < labels.size(); ++gi)
            if (labels[gi] == label) break;
        if (gi == labels.size()) {
            labels.push_back(label);
            ys.emplace_back();
            rows.emplace_back();
            row_ids.emplace_back();
        }
        if (has_y) ys[gi].push_back(csv_detail::parse_number(fields[1], line_no, "response"));
        std::vector<double> feats(p);
        for (Index j = 0; j < p; ++j)
            feats[j] = csv_detail::parse_number(fields[first_feature + j], line_no, "feature");
        rows[gi].push_back(std::move(feats));
        row_ids[gi].push_back(data_row++);
    }
    if (labels.empty()) throw IoError("'" + path + "': no data rows");

    LoadedDataset out;
    for (std::size_t g = 0; g < labels.size(); ++g) {
        Group grp;
        grp.label = labels[g];
        grp.X.resize(static_cast<Index>(rows[g].size()), p);
        for (std::size_t i = 0; i < rows[g].size(); ++i)
            for (Index j = 0; j < p; ++j) grp.X(static_cast<Index>(i), j) = rows[g][i][j];
        if (has_y) {
            grp.y.resize(static_cast<Index>(ys[g].size()));
            for (std::size_t i = 0; i < ys[g].size(); ++i) grp.y(static_cast<Index>(i)) = ys[g][i];
        } else {
            grp.y = VectorXd::Zero(grp.X.rows());
        }
        out.dataset.groups.push_back(std::move(grp));
        out.row_ids.push_back(std::move(row_ids[g]));
    }
    return out;
}

// All output files are written to a temporary name and renamed into place.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp + "'");
        out << content;
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline void write_dataset_csv(const std::string& path, const GroupedDataset& dataset) {
    dataset.validate();
    std::ostringstream out;
    out << "group,y";
    for (Index j = 0; j < dataset.n_cols(); ++j) out << ",x" << (j + 1);
    out << "\n";
    for (const auto& grp : dataset.groups) {
        for (Index i = 0; i < grp.X.rows(); ++i) {
            out << grp.label << "," << csv_detail::format_number(grp.y[i]);
            for (Index j = 0; j < grp.X.cols(); ++j)
                out << "," << csv_detail::format_number(grp.X(i, j));
            out << "\n";
        }
    }
    atomic_write(path, out.str());
}

inline void write_matrix_csv(const std::string& path, const MatrixXd& M) {
    std::ostringstream out;
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            if (j > 0) out << ",";
            out << csv_detail::format_number(M(i, j));
        }
        out << "\n";
    }
    atomic_write(path, out.str());
}

inline MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = csv_detail::split_line(line);
        std::vector<double> row;
        for (const auto& f : fields)
            row.push_back(csv_detail::parse_number(f, line_no, "entry"));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return MatrixXd(0, 0);
    MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw IoError("'" + path + "': ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return M;
}

}  // namespace jico
