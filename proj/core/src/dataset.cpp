#include "spikeforest/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spikeforest {

Dataset::Dataset(std::vector<double> x_row_major, std::vector<double> y, int n, int p)
    : x_(std::move(x_row_major)), y_(std::move(y)), n_(n), p_(p) {
    if (n_ < 1 || p_ < 1) throw std::invalid_argument("Dataset: need n >= 1 and p >= 1");
    if (x_.size() != static_cast<std::size_t>(n_) * p_)
        throw std::invalid_argument("Dataset: covariate matrix has wrong size");
    if (y_.size() != static_cast<std::size_t>(n_))
        throw std::invalid_argument("Dataset: response length differs from n");
    for (double v : x_) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("Dataset: covariate outside [0,1]; rescale first");
    }
}

Dataset Dataset::with_responses(std::vector<double> y) const {
    return Dataset(x_, std::move(y), n_, p_);
}

double empirical_norm(std::span<const double> f_values, std::span<const double> g_values) {
    if (f_values.size() != g_values.size() || f_values.empty())
        throw std::invalid_argument("empirical_norm: vectors must have equal positive length");
    double s = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i) {
        const double d = f_values[i] - g_values[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(f_values.size()));
}

double empirical_norm(std::span<const double> f_values) {
    if (f_values.empty()) throw std::invalid_argument("empirical_norm: empty vector");
    double s = 0.0;
    for (double v : f_values) s += v * v;
    return std::sqrt(s / static_cast<double>(f_values.size()));
}

std::vector<ColumnRescale> rescale_columns(std::vector<double>& x, int n, int p) {
    std::vector<ColumnRescale> report(p);
    for (int j = 0; j < p; ++j) {
        double lo = x[j], hi = x[j];
        for (int i = 1; i < n; ++i) {
            const double v = x[static_cast<std::size_t>(i) * p + j];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report[j].min = lo;
        report[j].max = hi;
        if (hi == lo) {
            report[j].constant = true;
            report[j].applied = true;
            for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i) * p + j] = 0.5;
        } else if (lo < 0.0 || hi > 1.0) {
            report[j].applied = true;
            for (int i = 0; i < n; ++i) {
                double& v = x[static_cast<std::size_t>(i) * p + j];
                v = (v - lo) / (hi - lo);
            }
        }
    }
    return report;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

CsvLoadResult load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);
    if (header.size() < 2 || header.back() != "y")
        throw std::runtime_error("load_csv: header must be x1..xp,y");
    const int p = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < p; ++j) {
        if (header[j] != "x" + std::to_string(j + 1))
            throw std::runtime_error("load_csv: expected column x" + std::to_string(j + 1) +
                                     ", found " + header[j]);
    }
    std::vector<double> x;
    std::vector<double> y;
    int n = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_csv: row " + std::to_string(n + 2) +
                                     " has wrong number of cells");
        for (int j = 0; j < p; ++j) x.push_back(std::stod(cells[j]));
        y.push_back(std::stod(cells[p]));
        ++n;
    }
    if (n == 0) throw std::runtime_error("load_csv: no data rows in " + path);
    auto report = rescale_columns(x, n, p);
    return CsvLoadResult{Dataset(std::move(x), std::move(y), n, p), std::move(report)};
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    for (int j = 0; j < data.p(); ++j) out << "x" << (j + 1) << ",";
    out << "y\n";
    char buf[40];
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.p(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data.x(i, j));
            out << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", data.y()[i]);
        out << buf << "\n";
    }
}

}  // namespace spikeforest
