#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sneq {

/// Integer partition of n: non-increasing positive parts.
class Partition {
public:
    explicit Partition(std::vector<int> parts);

    int n() const { return n_; }
    const std::vector<int>& parts() const { return parts_; }
    std::string to_string() const;  // "(3,1,1)"

    bool operator==(const Partition&) const = default;

private:
    std::vector<int> parts_;
    int n_ = 0;
};

/// All partitions of n, ordered inverse-lexicographically:
/// (n) < (n-1,1) < (n-2,2) < (n-2,1,1) < ...
/// i.e. part sequences compared in descending lexicographic order.
/// Capped at n <= 12.
std::vector<Partition> integer_partitions(int n);

/// Dimension of the irreducible S_n representation labelled by lambda,
/// i.e. the number of standard Young tableaux of that shape, via the
/// hook length formula.
std::int64_t irrep_dimension(const Partition& lambda);

/// The supported permutation-action variants.  The order-3 strata are the
/// index-equality classes of a cubic tensor, each an invariant subspace.
enum class ActionVariant {
    order1,
    order2_zero_diag,
    order2_symmetric_zero_diag,
    order2_full,
    order3_full,
    order3_distinct,
    order3_two_equal_12,
    order3_two_equal_13,
    order3_two_equal_23,
    order3_all_equal,
};

int action_order(ActionVariant v);
std::string action_name(ActionVariant v);

/// Which permutation action a tensor (or tensor stratum) transforms under.
struct ActionSpec {
    int n;
    ActionVariant variant;

    ActionSpec(int n, ActionVariant variant);
    int order() const { return action_order(variant); }
};

/// Irrep multiplicities of an action, aligned with the inverse-lexicographic
/// partition order of integer_partitions(n).  Entries past the stored prefix
/// are implicitly zero.
class TypeVector {
public:
    TypeVector(int n, std::vector<std::int64_t> multiplicities);

    int n() const { return n_; }
    std::size_t size() const { return mults_.size(); }
    std::int64_t multiplicity(std::size_t i) const;
    const std::vector<std::int64_t>& multiplicities() const { return mults_; }
    std::string to_string() const;  // "(1,2,1,1)"

    bool operator==(const TypeVector&) const = default;

private:
    int n_;
    std::vector<std::int64_t> mults_;
};

/// Entrywise sum; both operands must share n.  Used to combine the types of
/// the order-3 strata into the type of the full cubic action.
TypeVector operator+(const TypeVector& a, const TypeVector& b);

/// Closed-form decomposition of the action into irreps.  Valid only in the
/// stable regime n >= 2*order, where every referenced partition exists;
/// smaller n raises, and callers should fall back on the commutant oracle.
/// The combined order3_full variant is deliberately not tabulated: request
/// the per-stratum types and sum them.
TypeVector action_type(const ActionSpec& spec);

/// Number of independent equivariant linear maps between spaces of the given
/// types: the sum over aligned irreps of the product of multiplicities.
std::int64_t param_count(const TypeVector& in_type, const TypeVector& out_type);

/// Total dimension of the space carrying a type: sum of mult * irrep dim.
std::int64_t type_dimension(const TypeVector& type, int n);

}  // namespace sneq
