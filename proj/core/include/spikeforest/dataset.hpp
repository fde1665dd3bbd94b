#pragma once

#include <span>
#include <string>
#include <vector>

namespace spikeforest {

// Fixed-design regression data. Covariates live in [0,1]^p, responses are
// unrestricted reals. Immutable after construction and safe to share across
// concurrently running chains.
class Dataset {
  public:
    Dataset(std::vector<double> x_row_major, std::vector<double> y, int n, int p);

    int n() const { return n_; }
    int p() const { return p_; }
    double x(int row, int col) const { return x_[static_cast<std::size_t>(row) * p_ + col]; }
    std::span<const double> row(int i) const { return {x_.data() + static_cast<std::size_t>(i) * p_, static_cast<std::size_t>(p_)}; }
    const std::vector<double>& y() const { return y_; }
    const std::vector<double>& x_flat() const { return x_; }

    Dataset with_responses(std::vector<double> y) const;

  private:
    std::vector<double> x_;  // row major, n x p
    std::vector<double> y_;
    int n_ = 0;
    int p_ = 0;
};

// sqrt( (1/n) * sum_i (f_i - g_i)^2 )
double empirical_norm(std::span<const double> f_values, std::span<const double> g_values);

// ||f||_n against the zero function.
double empirical_norm(std::span<const double> f_values);

struct ColumnRescale {
    double min = 0.0;
    double max = 1.0;
    bool applied = false;  // false when the column was already inside [0,1]
    bool constant = false;  // constant columns map to 0.5
};

// Affine min-max rescale of each column onto [0,1], in place on the flat
// row-major matrix. Constant columns map to 0.5.
std::vector<ColumnRescale> rescale_columns(std::vector<double>& x_row_major, int n, int p);

struct CsvLoadResult {
    Dataset data;
    std::vector<ColumnRescale> rescaling;
};

// CSV with a header row "x1,...,xp,y"; comma separator, decimal point.
// Out-of-range covariates are rescaled per column and reported.
CsvLoadResult load_csv(const std::string& path);

void save_csv(const Dataset& data, const std::string& path);

}  // namespace spikeforest
