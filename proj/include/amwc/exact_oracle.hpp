#pragma once

#include "amwc/graph.hpp"

namespace amwc {

// Exact minimizer by exhaustive enumeration of node partitions, with an
// assignment search over block classes that allows at most one block per
// non-partitionable class. Intended as test ground truth; refuses instances
// with more than 10 nodes or 4 classes.
Labeling brute_force(const CostGraph& g);

inline constexpr int kOracleMaxNodes = 10;
inline constexpr int kOracleMaxClasses = 4;

}  // namespace amwc
