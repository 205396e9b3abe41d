#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sneq/tensor.hpp"

namespace sneq {

enum class LayerKind {
    first_to_first,              // order-1 -> order-1, 2 basis maps
    second_to_second_zero_diag,  // order-2 -> order-2 on zero-diagonal tensors, 7
    second_to_second,            // order-2 -> order-2 with full diagonal, 15
    second_to_first,             // order-2 -> order-1 pooling, 5
    third_to_third,              // order-3 -> order-3 with all strata, 203
};

struct LayerShape {
    int order_in;
    int order_out;
    bool full_diagonal;
};

LayerShape layer_shape(LayerKind kind);
LayerKind layer_kind(int order_in, int order_out, bool full_diagonal);
std::string layer_name(LayerKind kind);

/// One linear equivariant basis map, encoded as a set partition of the
/// order_out + order_in index slots.  Its matrix has a 1 at (out-tuple,
/// in-tuple) exactly when index values agree within every block of the
/// partition.  Blocks joining output and input slots copy values, blocks of
/// input slots only are summed over, blocks of output slots only broadcast,
/// and the partition of the output slots alone names the output stratum the
/// term parameterizes.
struct BasisTerm {
    int order_out = 0;
    int order_in = 0;
    std::vector<int> out_blocks;  // block id per output slot
    std::vector<int> in_blocks;   // block id per input slot
    int block_count = 0;

    /// Output-stratum rank: 0 = all output indices independent; for order-2
    /// output 1 = diagonal; for order-3 output 1..3 = one merged pair in
    /// (1,2) < (1,3) < (2,3) order, 4 = all three merged.
    int stratum() const;

    /// Number of blocks linking output to input slots (copied indices).
    int contraction_order() const;

    /// Number of summed (input-only) blocks.
    int sum_block_count() const;

    /// Same partition with the output/input roles swapped; materializes to
    /// the transposed matrix.
    BasisTerm adjoint() const;

    /// Stable text form, e.g. "off-diag: f_{j,i}", "diag: f_{i,*}".
    std::string descriptor() const;

    bool operator==(const BasisTerm&) const = default;
};

/// The canonical ordered basis of the given layer kind.  Term counts:
/// (1,1): 2; (2,2) zero-diagonal: 7; (2,2) full: 15; (2,1): 5; (3,3): 203.
/// Terms are sorted by (output stratum, contraction order descending,
/// contraction pattern, placement of copied indices) — see descriptor().
std::vector<BasisTerm> basis_terms(int order_in, int order_out, bool full_diagonal);
const std::vector<BasisTerm>& basis_terms(LayerKind kind);  // cached

/// Descriptor lines of the layer's terms in canonical order.
std::vector<std::string> describe_layer(LayerKind kind);

enum class Nonlinearity { identity, relu, sigmoid, tanh };

double apply_nonlinearity(Nonlinearity xi, double x);
/// Derivative evaluated at the pre-activation value.
double nonlinearity_derivative(Nonlinearity xi, double x);
std::string nonlinearity_name(Nonlinearity xi);

/// Small dense row-major matrix (channel mixing, oracle ranks).
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

/// Weights of one equivariant layer: a c_in x c_out mixing matrix per basis
/// term (canonical order), a per-output-channel bias added uniformly, and —
/// for full-diagonal order-2 layers only — an extra per-channel bias on the
/// diagonal stratum.  Empty bias vectors mean "no bias".
struct LayerWeights {
    LayerKind kind = LayerKind::first_to_first;
    int channels_in = 0;
    int channels_out = 0;
    std::vector<Matrix> term_weights;
    std::vector<double> bias;
    std::vector<double> diag_bias;

    static LayerWeights zeros(LayerKind kind, int channels_in, int channels_out, bool with_bias);
};

struct LayerOptions {
    /// Divide every summed index by n (and the double sum by n^2, etc.).
    /// Off by default: plain sums are the reference semantics.
    bool normalize_sums = false;
};

/// Apply one basis map to all channels: out = scale * (term matrix) * f.
EquivariantTensor apply_term(const BasisTerm& term, const EquivariantTensor& f,
                             double scale = 1.0);

/// Scale factor the options assign to a term (1 or n^-sum_blocks).
double term_scale(const BasisTerm& term, int n, const LayerOptions& opts);

/// Affine part of the layer (no nonlinearity).
EquivariantTensor apply_layer_linear(const LayerWeights& w, const EquivariantTensor& f_in,
                                     const LayerOptions& opts = {});

/// out = xi( sum_terms apply_term(f) * W_term + bias ).  Zero-diagonal layers
/// ignore the input diagonal and force the output diagonal to exactly zero.
EquivariantTensor apply_layer(const LayerWeights& w, Nonlinearity xi,
                              const EquivariantTensor& f_in, const LayerOptions& opts = {});

/// Order-2 -> order-1 pooling layer (kind second_to_first).
EquivariantTensor pool_2_to_1(const LayerWeights& w, Nonlinearity xi,
                              const EquivariantTensor& f_in, const LayerOptions& opts = {});

/// Rank-one lift per channel: out[i,j,c] = f[i,c] * f[j,c].
EquivariantTensor lift_1_to_2(const EquivariantTensor& f);

/// Invariant readout: per-channel sum over the index.
EquivariantTensor pool_1_to_0(const EquivariantTensor& f);

/// Single-channel matrix of one basis map: n^order_out rows by n^order_in
/// columns, both sides in row-major flat index order.
Matrix materialize_term(const BasisTerm& term, int n);

}  // namespace sneq
