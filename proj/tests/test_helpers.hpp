#pragma once

#include <vector>

#include "spikeforest/dataset.hpp"

namespace spikeforest::testing {

// 1-D dataset from raw x values, responses default to zero.
inline Dataset make_1d(std::vector<double> xs, std::vector<double> ys = {}) {
    if (ys.empty()) ys.assign(xs.size(), 0.0);
    const int n = static_cast<int>(xs.size());
    return Dataset(std::move(xs), std::move(ys), n, 1);
}

inline Dataset make_2d(std::vector<std::pair<double, double>> pts,
                       std::vector<double> ys = {}) {
    std::vector<double> flat;
    for (auto [a, b] : pts) {
        flat.push_back(a);
        flat.push_back(b);
    }
    if (ys.empty()) ys.assign(pts.size(), 0.0);
    return Dataset(std::move(flat), std::move(ys), static_cast<int>(pts.size()), 2);
}

}  // namespace spikeforest::testing
