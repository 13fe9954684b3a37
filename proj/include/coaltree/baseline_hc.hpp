#pragma once

#include "coaltree/coalescent.hpp"
#include "coaltree/dataset.hpp"

namespace coaltree {

// Average-link agglomerative clustering with Euclidean distances; linkage
// distances double as merge times.  Ties break on the smallest (left, right)
// node-id pair.
Dendrogram average_link(const Dataset& data);

}  // namespace coaltree
