#pragma once

#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "spikeforest/tree.hpp"

namespace spikeforest {

using BigInt = boost::multiprecision::cpp_int;

// Number of ordered split sequences with K-1 splits at observed values along
// q coordinate directions: q^(K-1) * n! / (n-K+1)!. Exact integers.
BigInt partitioning_number(int n, int q, int K);

// log of the same quantity; -infinity when it is zero (q = 0, K > 1).
double log_partitioning_number(int n, int q, int K);

// All distinct valid tree objects with K leaves on the dataset, splitting at
// in-node observed values, using every axis of `subset` at least once and no
// axis outside it. Distinct objects may induce the same point grouping.
std::vector<TreePartition> enumerate_valid_tree_objects(const Dataset& data,
                                                        std::span<const int> subset, int K,
                                                        int cbar,
                                                        long long sequence_cap = 1000000);

struct EnumeratedPartition {
    TreePartition representative;
    std::vector<std::vector<int>> signature;  // induced grouping of row indices
    long long object_count = 0;
    double log_sequence_multiplicity = 0.0;  // log sum over objects of their sequence counts
};

// Distinct partitions induced by the valid tree objects, in canonical
// (signature-sorted) order.
std::vector<EnumeratedPartition> enumerate_valid_trees(const Dataset& data,
                                                       std::span<const int> subset, int K,
                                                       int cbar,
                                                       long long sequence_cap = 1000000);

}  // namespace spikeforest
