#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sneq/layers.hpp"
#include "sneq/partitions.hpp"
#include "sneq/tensor.hpp"

namespace sneq {

/// A pair of actions sharing the same n.  Asks for the space of linear maps
/// X with P_out(sigma) X = X P_in(sigma) for every sigma — the maps a layer
/// between these two actions is allowed to use.
struct CommutantProblem {
    ActionSpec spec_in;
    ActionSpec spec_out;

    CommutantProblem(ActionSpec in, ActionSpec out);
    int n() const { return spec_in.n; }
};

/// The index tuples forming the action's coordinate space, in lexicographic
/// order of the full tuple.  Strata keep only tuples matching their equality
/// pattern; the symmetric variant keeps the sorted representative per pair.
std::vector<std::vector<int>> action_coordinates(const ActionSpec& spec);

/// The permutation matrix of sigma on the coordinate space, stored as the
/// image position of each coordinate.
std::vector<int> coordinate_action(const ActionSpec& spec, const Permutation& sigma);

/// Orbit-count oracle for unrestricted tuple actions: equivariant maps
/// correspond to equality patterns on the k_in + k_out index slots, i.e. set
/// partitions with at most n blocks.
std::int64_t commutant_dim_orbit(int k_in, int k_out, int n);

/// Variant-aware orbit count: honours forced/forbidden slot equalities of
/// stratum actions and quotients by the slot swap of symmetric actions.
std::int64_t commutant_dim_orbit(const CommutantProblem& problem);

/// Nullspace oracle: dimension of the solution space of the constraints
/// coming from the generators (1 2) and (1 2 ... n), computed by Gaussian
/// elimination over doubles with rank tolerance 1e-9 relative to the largest
/// pivot.  Refuses problems with more than 20000 unknowns.
int commutant_dim_nullspace(const CommutantProblem& problem);

/// Same elimination carried out over exact rationals (n <= 4 only).
int commutant_dim_nullspace_exact(const CommutantProblem& problem);

/// Nullspace dimension when `extra` seeded random permutations are appended
/// to the generating set.  Must never differ from commutant_dim_nullspace.
int commutant_dim_nullspace_extended(const CommutantProblem& problem, int extra,
                                     std::uint64_t seed);

/// Outcome of checking a layer's term basis against the commutant:
///  - exact: terms independent, rank equals the commutant dimension, and
///    every materialized term commutes with both generators (< 1e-9);
///  - deficient: the terms fail to span the commutant;
///  - excess: the terms span it but are linearly dependent (degenerate n).
struct SpanVerdict {
    enum class Status { exact, deficient, excess };

    Status status = Status::deficient;
    int rank = 0;
    int dim = 0;
    int term_count = 0;
    double max_residual = 0.0;

    std::string to_string() const;
};

/// The commutant problem a layer kind solves at a given n.
CommutantProblem layer_problem(LayerKind kind, int n);

SpanVerdict basis_spans_commutant(LayerKind kind, int n, bool exact_arithmetic = false);

/// Convenience overload for the full-diagonal layer of the given orders.
SpanVerdict basis_spans_commutant(int order_in, int order_out, int n);

}  // namespace sneq
