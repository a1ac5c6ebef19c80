#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "waffle/util/errors.hpp"

namespace waffle {

// One labeled example: single-sentence or sentence-pair task.
struct TextExample {
    std::vector<std::string> segments;  // 1 or 2
    int label = 0;
};

using Dataset = std::vector<TextExample>;

namespace detail {
inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(start));
            break;
        }
        cols.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    if (!cols.empty() && !cols.back().empty() && cols.back().back() == '\r') cols.back().pop_back();
    return cols;
}
}  // namespace detail

// TSV `label TAB text` or `label TAB text1 TAB text2`; column count must be
// uniform across the file.
inline Dataset load_dataset(const std::string& path, int n_classes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t column_count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cols = detail::split_tabs(line);
        if (cols.size() < 2 || cols.size() > 3)
            throw ParseError(path, line_no, "expected 2 or 3 tab-separated columns, got " +
                                                std::to_string(cols.size()));
        if (column_count == 0) {
            column_count = cols.size();
        } else if (cols.size() != column_count) {
            throw ParseError(path, line_no, "ragged column count: expected " +
                                                std::to_string(column_count) + ", got " +
                                                std::to_string(cols.size()));
        }
        int label;
        try {
            std::size_t consumed = 0;
            label = std::stoi(cols[0], &consumed);
            if (consumed != cols[0].size()) throw std::invalid_argument(cols[0]);
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "non-integer label '" + cols[0] + "'");
        }
        if (label < 0 || label >= n_classes)
            throw ParseError(path, line_no, "label " + std::to_string(label) +
                                                " out of range [0, " + std::to_string(n_classes) + ")");
        TextExample ex;
        ex.label = label;
        for (std::size_t c = 1; c < cols.size(); ++c) ex.segments.push_back(cols[c]);
        out.push_back(std::move(ex));
    }
    return out;
}

inline void save_dataset(const Dataset& data, const std::string& path, const std::string& header_comment = "") {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset: " + path);
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    for (const auto& ex : data) {
        out << ex.label;
        for (const auto& seg : ex.segments) out << '\t' << seg;
        out << '\n';
    }
}

}  // namespace waffle
