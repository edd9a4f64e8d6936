#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace ergo {

/// Shortest round-trip decimal form of a double (stable across runs).
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out << body;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for read: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_f64_file(const std::filesystem::path& path, const std::vector<double>& data) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              std::streamsize(data.size() * sizeof(double)));
}

inline std::vector<double> read_f64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ConfigError("cannot open for read: " + path.string());
    const auto bytes = in.tellg();
    if (bytes % sizeof(double) != 0)
        throw ConfigError("binary float64 file has odd size: " + path.string());
    std::vector<double> data(std::size_t(bytes) / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), bytes);
    return data;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    return nlohmann::json::parse(read_text_file(path));
}

/// Column-oriented CSV writer; every cell is rendered with fmt_g17.
class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != header_.size()) throw SizeError("CsvTable: row width mismatch");
        rows_.push_back(row);
    }

    std::string to_string() const {
        std::ostringstream ss;
        for (std::size_t i = 0; i < header_.size(); ++i)
            ss << header_[i] << (i + 1 < header_.size() ? "," : "\n");
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i)
                ss << fmt_g17(row[i]) << (i + 1 < row.size() ? "," : "\n");
        }
        return ss.str();
    }

    void save(const std::filesystem::path& path) const { write_text_file(path, to_string()); }

    std::size_t n_rows() const { return rows_.size(); }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;   // row-major
};

inline CsvData read_csv(const std::filesystem::path& path) {
    CsvData data;
    std::istringstream in(read_text_file(path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (first) {
            while (std::getline(ls, cell, ',')) data.header.push_back(cell);
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != data.header.size())
            throw ConfigError("csv row width mismatch in " + path.string());
        data.rows.push_back(std::move(row));
    }
    return data;
}

/// Minimal SVG line plot: one or more polylines over a shared axis box.
class SvgPlot {
  public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel, bool log_y = false)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)),
          log_y_(log_y) {}

    void add_series(const std::string& name, const std::vector<double>& x,
                    const std::vector<double>& y) {
        if (x.size() != y.size()) throw SizeError("SvgPlot: series length mismatch");
        series_.push_back({name, x, y});
    }

    void save(const std::filesystem::path& path) const {
        const double W = 720, H = 480, mL = 70, mR = 160, mT = 40, mB = 50;
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                double yv = s.y[i];
                if (log_y_) {
                    if (yv <= 0) continue;
                    yv = std::log10(yv);
                }
                xmin = std::min(xmin, s.x[i]); xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, yv); ymax = std::max(ymax, yv);
            }
        if (xmin > xmax) { xmin = 0; xmax = 1; }
        if (ymin > ymax) { ymin = 0; ymax = 1; }
        if (xmax - xmin < 1e-12) xmax = xmin + 1;
        if (ymax - ymin < 1e-12) ymax = ymin + 1;
        auto px = [&](double x) { return mL + (x - xmin) / (xmax - xmin) * (W - mL - mR); };
        auto py = [&](double yv) {
            if (log_y_) yv = std::log10(std::max(yv, 1e-300));
            return H - mB - (yv - ymin) / (ymax - ymin) * (H - mT - mB);
        };
        static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
        std::ostringstream ss;
        ss << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
        ss << "<rect width='100%' height='100%' fill='white'/>\n";
        ss << "<rect x='" << mL << "' y='" << mT << "' width='" << (W - mL - mR)
           << "' height='" << (H - mT - mB) << "' fill='none' stroke='black'/>\n";
        ss << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>"
           << title_ << "</text>\n";
        ss << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='13'>"
           << xlabel_ << "</text>\n";
        ss << "<text x='18' y='" << H / 2 << "' font-size='13' transform='rotate(-90 18 "
           << H / 2 << ")' text-anchor='middle'>" << ylabel_ << (log_y_ ? " (log10)" : "")
           << "</text>\n";
        for (int t = 0; t <= 4; ++t) {
            const double fx = xmin + (xmax - xmin) * t / 4.0;
            const double fy = ymin + (ymax - ymin) * t / 4.0;
            ss << "<text x='" << px(fx) << "' y='" << H - mB + 18
               << "' text-anchor='middle' font-size='11'>" << fmt_short(fx) << "</text>\n";
            ss << "<text x='" << mL - 8 << "' y='" << H - mB - (H - mT - mB) * t / 4.0 + 4
               << "' text-anchor='end' font-size='11'>" << fmt_short(fy) << "</text>\n";
        }
        int color = 0;
        for (const auto& s : series_) {
            ss << "<polyline fill='none' stroke='" << palette[color % 5]
               << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (log_y_ && s.y[i] <= 0) continue;
                ss << px(s.x[i]) << "," << py(s.y[i]) << " ";
            }
            ss << "'/>\n";
            ss << "<text x='" << W - mR + 10 << "' y='" << mT + 16 + 18 * color
               << "' font-size='12' fill='" << palette[color % 5] << "'>" << s.name
               << "</text>\n";
            ++color;
        }
        ss << "</svg>\n";
        write_text_file(path, ss.str());
    }

  private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
    };
    static std::string fmt_short(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        return buf;
    }
    std::string title_, xlabel_, ylabel_;
    bool log_y_;
    std::vector<Series> series_;
};

} // namespace ergo
