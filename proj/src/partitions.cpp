#include "sneq/partitions.hpp"

#include <sstream>
#include <stdexcept>

namespace sneq {

Partition::Partition(std::vector<int> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw std::invalid_argument("Partition: needs at least one part");
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (parts_[i] < 1) throw std::invalid_argument("Partition: parts must be positive");
        if (i > 0 && parts_[i] > parts_[i - 1])
            throw std::invalid_argument("Partition: parts must be non-increasing");
        n_ += parts_[i];
    }
}

std::string Partition::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) os << ',';
        os << parts_[i];
    }
    os << ')';
    return os.str();
}

namespace {

void emit_partitions(int remaining, int max_part, std::vector<int>& prefix,
                     std::vector<Partition>& out) {
    if (remaining == 0) {
        out.emplace_back(prefix);
        return;
    }
    // Largest first part first gives descending lexicographic order overall.
    for (int p = std::min(max_part, remaining); p >= 1; --p) {
        prefix.push_back(p);
        emit_partitions(remaining - p, p, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

std::vector<Partition> integer_partitions(int n) {
    if (n < 1 || n > 12) throw std::out_of_range("integer_partitions: n must be in 1..12");
    std::vector<Partition> out;
    std::vector<int> prefix;
    emit_partitions(n, n, prefix, out);
    return out;
}

std::int64_t irrep_dimension(const Partition& lambda) {
    const int n = lambda.n();
    if (n > 20) throw std::out_of_range("irrep_dimension: n must be <= 20");
    const auto& parts = lambda.parts();
    // Column lengths of the conjugate shape.
    std::vector<int> conj(static_cast<std::size_t>(parts[0]), 0);
    for (int row_len : parts)
        for (int j = 0; j < row_len; ++j) ++conj[j];

    std::int64_t hook_product = 1;
    for (std::size_t i = 0; i < parts.size(); ++i)
        for (int j = 0; j < parts[i]; ++j) {
            const int arm = parts[i] - j - 1;
            const int leg = conj[j] - static_cast<int>(i) - 1;
            hook_product *= arm + leg + 1;
        }

    std::int64_t fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;
    return fact / hook_product;  // exact: the hook product divides n!
}

int action_order(ActionVariant v) {
    switch (v) {
        case ActionVariant::order1: return 1;
        case ActionVariant::order2_zero_diag:
        case ActionVariant::order2_symmetric_zero_diag:
        case ActionVariant::order2_full: return 2;
        default: return 3;
    }
}

std::string action_name(ActionVariant v) {
    switch (v) {
        case ActionVariant::order1: return "order1";
        case ActionVariant::order2_zero_diag: return "order2_zero_diag";
        case ActionVariant::order2_symmetric_zero_diag: return "order2_symmetric_zero_diag";
        case ActionVariant::order2_full: return "order2_full";
        case ActionVariant::order3_full: return "order3_full";
        case ActionVariant::order3_distinct: return "order3_distinct";
        case ActionVariant::order3_two_equal_12: return "order3_two_equal_12";
        case ActionVariant::order3_two_equal_13: return "order3_two_equal_13";
        case ActionVariant::order3_two_equal_23: return "order3_two_equal_23";
        case ActionVariant::order3_all_equal: return "order3_all_equal";
    }
    return "?";
}

ActionSpec::ActionSpec(int n_, ActionVariant variant_) : n(n_), variant(variant_) {
    const int k = action_order(variant);
    if (n < 1) throw std::invalid_argument("ActionSpec: n must be positive");
    if (k == 2 && n < 2) throw std::invalid_argument("ActionSpec: order-2 variants need n >= 2");
    if (k == 3 && n < 3) throw std::invalid_argument("ActionSpec: order-3 variants need n >= 3");
}

TypeVector::TypeVector(int n, std::vector<std::int64_t> multiplicities)
    : n_(n), mults_(std::move(multiplicities)) {
    if (n < 1) throw std::invalid_argument("TypeVector: n must be positive");
    for (auto m : mults_)
        if (m < 0) throw std::invalid_argument("TypeVector: multiplicities must be >= 0");
}

std::int64_t TypeVector::multiplicity(std::size_t i) const {
    return i < mults_.size() ? mults_[i] : 0;
}

std::string TypeVector::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < mults_.size(); ++i) {
        if (i) os << ',';
        os << mults_[i];
    }
    os << ')';
    return os.str();
}

TypeVector operator+(const TypeVector& a, const TypeVector& b) {
    if (a.n() != b.n()) throw std::invalid_argument("TypeVector sum: mismatched n");
    std::vector<std::int64_t> m(std::max(a.size(), b.size()));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.multiplicity(i) + b.multiplicity(i);
    return TypeVector(a.n(), std::move(m));
}

TypeVector action_type(const ActionSpec& spec) {
    if (spec.variant == ActionVariant::order3_full)
        throw std::invalid_argument(
            "action_type: no closed form for the combined cubic action; "
            "sum the per-stratum types instead");
    const int k = spec.order();
    if (spec.n < 2 * k)
        throw std::invalid_argument(
            "action_type: closed-form table needs n >= 2*order; "
            "use the commutant oracle for smaller n");

    std::vector<std::int64_t> m;
    switch (spec.variant) {
        case ActionVariant::order1: m = {1, 1}; break;
        case ActionVariant::order2_zero_diag: m = {1, 2, 1, 1}; break;
        case ActionVariant::order2_symmetric_zero_diag: m = {1, 2, 1}; break;
        case ActionVariant::order2_full: m = {2, 3, 1, 1}; break;
        case ActionVariant::order3_distinct: m = {1, 3, 3, 3, 1, 2, 1}; break;
        case ActionVariant::order3_two_equal_12:
        case ActionVariant::order3_two_equal_13:
        case ActionVariant::order3_two_equal_23: m = {1, 2, 1, 1, 0, 0, 0}; break;
        case ActionVariant::order3_all_equal: m = {1, 1, 0, 0, 0, 0, 0}; break;
        default: break;
    }
    return TypeVector(spec.n, std::move(m));
}

std::int64_t param_count(const TypeVector& in_type, const TypeVector& out_type) {
    if (in_type.n() != out_type.n())
        throw std::invalid_argument("param_count: type vectors over different n");
    std::int64_t total = 0;
    const std::size_t len = std::min(in_type.size(), out_type.size());
    for (std::size_t i = 0; i < len; ++i)
        total += in_type.multiplicity(i) * out_type.multiplicity(i);
    return total;
}

std::int64_t type_dimension(const TypeVector& type, int n) {
    if (type.n() != n) throw std::invalid_argument("type_dimension: n mismatch");
    const auto partitions = integer_partitions(n);
    if (type.size() > partitions.size())
        throw std::invalid_argument("type_dimension: more multiplicities than partitions");
    std::int64_t total = 0;
    for (std::size_t i = 0; i < type.size(); ++i)
        total += type.multiplicity(i) * irrep_dimension(partitions[i]);
    return total;
}

}  // namespace sneq
