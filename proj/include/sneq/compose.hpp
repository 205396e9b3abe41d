#pragma once

#include <vector>

#include "sneq/layers.hpp"
#include "sneq/tensor.hpp"

namespace sneq {

/// Activation attached to a subset of the global objects.  The domain is a
/// strictly increasing list of 1-based global ids; the tensor's local index
/// set is the positions 0..|domain|-1 in that order.
struct DomainActivation {
    std::vector<int> domain;
    EquivariantTensor tensor;

    DomainActivation(std::vector<int> domain, EquivariantTensor tensor);
};

/// Reindex the child's entries into a tensor over the parent domain: entry at
/// local indices (i, j, ...) lands at the parent positions of the child's
/// global ids; everything else is `fill`.  Orders 0-3.
EquivariantTensor promote(const DomainActivation& child, const std::vector<int>& parent_domain,
                          double fill = 0.0);

/// Elementwise sum of the children's zero-filled promotions.
EquivariantTensor aggregate_sum(const std::vector<DomainActivation>& children,
                                const std::vector<int>& parent_domain);

/// Elementwise product of the children's one-filled promotions, so objects a
/// child does not cover act neutrally.
EquivariantTensor aggregate_product(const std::vector<DomainActivation>& children,
                                    const std::vector<int>& parent_domain);

/// The activation after relabeling the global objects by sigma (0-based over
/// ids-1): domain becomes the sorted image, the tensor is permuted to match.
DomainActivation relabel(const Permutation& sigma, const DomainActivation& activation);

/// Vertex-neighborhood message passing built from the pieces above: layer l
/// gives vertex v the radius-l neighborhood (center included) as domain, sums
/// the promoted previous-layer activations of v and its neighbors, and feeds
/// the sum through a width-preserving equivariant layer.  The start is an
/// all-ones order-1 activation on {v}.  All weights must be first_to_first;
/// with no layers the initial activations are returned.
std::vector<DomainActivation> neighborhood_network(const EquivariantTensor& adjacency,
                                                   const std::vector<LayerWeights>& weights,
                                                   Nonlinearity xi);

/// Invariant per-vertex features: each order-1 activation pooled over its
/// domain.  Row v = features of vertex v+1.
Matrix readout_features(const std::vector<DomainActivation>& activations);

}  // namespace sneq
