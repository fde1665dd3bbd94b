#pragma once

#include <span>

#include "spikeforest/tree.hpp"

namespace spikeforest {

// Median tree over the coordinates in `subset`: all nodes at the same depth
// split along the same axis, cycling through the subset in ascending index
// order, s rounds per variable. Splits happen at the lower median of the
// in-node points, ties broken by original row index, so the construction is
// deterministic. Produces K = 2^(s*|subset|) leaves.
TreePartition build_kd_tree(const Dataset& data, std::span<const int> subset, int rounds);

// (M,S)-regularity: for each feasible s in 1..s_max the k-d tree must satisfy
// max_k diam(cell_k; S) < M * sum_k mu(cell_k) * diam(cell_k; S).
// Levels where every cell diameter is zero are skipped.
bool regularity_check(const Dataset& data, std::span<const int> subset, double M, int s_max);

}  // namespace spikeforest
