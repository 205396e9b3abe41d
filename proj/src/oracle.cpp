#include "sneq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <type_traits>
#include <utility>

#include "sneq/rng.hpp"

namespace sneq {
namespace {

// ---------------------------------------------------------------------------
// Exact rational scalar for the n <= 4 cross-checks.  Always normalized;
// every narrowing from the 128-bit intermediates is range-checked.

std::int64_t checked_narrow(__int128 v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw std::overflow_error("exact elimination: rational overflow");
    return static_cast<std::int64_t>(v);
}

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t v) : num(v) {}  // NOLINT: implicit by design

    static Fraction make(__int128 n, __int128 d) {
        if (d == 0) throw std::domain_error("exact elimination: division by zero");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        if (n == 0) return {};
        const __int128 g = gcd128(n, d);
        Fraction f;
        f.num = checked_narrow(n / g);
        f.den = checked_narrow(d / g);
        return f;
    }

    friend Fraction operator+(const Fraction& a, const Fraction& b) {
        return make(static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den,
                    static_cast<__int128>(a.den) * b.den);
    }
    friend Fraction operator-(const Fraction& a, const Fraction& b) {
        return make(static_cast<__int128>(a.num) * b.den - static_cast<__int128>(b.num) * a.den,
                    static_cast<__int128>(a.den) * b.den);
    }
    friend Fraction operator*(const Fraction& a, const Fraction& b) {
        return make(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
    }
    friend Fraction operator/(const Fraction& a, const Fraction& b) {
        return make(static_cast<__int128>(a.num) * b.den, static_cast<__int128>(a.den) * b.num);
    }
};

template <class S>
bool is_zero(const S& v) {
    if constexpr (std::is_same_v<S, double>)
        return v == 0.0;
    else
        return v.num == 0;
}

// ---------------------------------------------------------------------------
// Slot-level description of each action variant: which index slots are forced
// equal, which are forbidden from being equal, and whether unordered slot
// pairs are identified.

struct SlotPattern {
    int order = 0;
    std::vector<std::pair<int, int>> forced;
    std::vector<std::pair<int, int>> banned;
    bool symmetric = false;
};

SlotPattern slot_pattern(ActionVariant v) {
    switch (v) {
        case ActionVariant::order1: return {1, {}, {}, false};
        case ActionVariant::order2_full: return {2, {}, {}, false};
        case ActionVariant::order2_zero_diag: return {2, {}, {{0, 1}}, false};
        case ActionVariant::order2_symmetric_zero_diag: return {2, {}, {{0, 1}}, true};
        case ActionVariant::order3_full: return {3, {}, {}, false};
        case ActionVariant::order3_distinct: return {3, {}, {{0, 1}, {0, 2}, {1, 2}}, false};
        case ActionVariant::order3_two_equal_12: return {3, {{0, 1}}, {{0, 2}, {1, 2}}, false};
        case ActionVariant::order3_two_equal_13: return {3, {{0, 2}}, {{0, 1}, {1, 2}}, false};
        case ActionVariant::order3_two_equal_23: return {3, {{1, 2}}, {{0, 1}, {0, 2}}, false};
        case ActionVariant::order3_all_equal: return {3, {{0, 1}, {1, 2}}, {}, false};
    }
    throw std::invalid_argument("slot_pattern: unknown variant");
}

bool tuple_matches(const std::vector<int>& t, const SlotPattern& p) {
    for (const auto& [a, b] : p.forced)
        if (t[static_cast<std::size_t>(a)] != t[static_cast<std::size_t>(b)]) return false;
    for (const auto& [a, b] : p.banned)
        if (t[static_cast<std::size_t>(a)] == t[static_cast<std::size_t>(b)]) return false;
    if (p.symmetric)
        for (std::size_t s = 1; s < t.size(); ++s)
            if (t[s - 1] > t[s]) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Set-partition enumeration as restricted growth strings.

void for_each_rgs(int k, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> a(static_cast<std::size_t>(k), 0);
    const std::function<void(int, int)> rec = [&](int pos, int max_label) {
        if (pos == k) {
            fn(a);
            return;
        }
        for (int v = 0; v <= max_label + 1; ++v) {
            a[static_cast<std::size_t>(pos)] = v;
            rec(pos + 1, std::max(max_label, v));
        }
    };
    rec(0, -1);
}

std::vector<int> canonical_rgs(const std::vector<int>& labels) {
    std::vector<int> out(labels.size());
    std::map<int, int> relabel;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, fresh] = relabel.emplace(labels[i], static_cast<int>(relabel.size()));
        out[i] = it->second;
        (void)fresh;
    }
    return out;
}

std::vector<Permutation> standard_generators(int n) {
    std::vector<int> transposition(static_cast<std::size_t>(n));
    std::vector<int> cycle(static_cast<std::size_t>(n));
    std::iota(transposition.begin(), transposition.end(), 0);
    if (n >= 2) std::swap(transposition[0], transposition[1]);
    for (int i = 0; i < n; ++i) cycle[static_cast<std::size_t>(i)] = (i + 1) % n;
    return {Permutation(std::move(transposition)), Permutation(std::move(cycle))};
}

std::int64_t unknown_count(const CommutantProblem& p) {
    const auto d_out = static_cast<std::int64_t>(action_coordinates(p.spec_out).size());
    const auto d_in = static_cast<std::int64_t>(action_coordinates(p.spec_in).size());
    return d_out * d_in;
}

void check_problem_size(const CommutantProblem& p) {
    if (unknown_count(p) > 20000) {
        std::ostringstream os;
        os << "commutant problem too large: " << unknown_count(p) << " unknowns (limit 20000)";
        throw std::invalid_argument(os.str());
    }
}

// ---------------------------------------------------------------------------
// Sparse Gaussian elimination on rows keyed by column index.  The constraint
// rows are two-entry +/-1 differences and stay sparse under elimination.

template <class S>
class SparseEliminator {
public:
    void add(std::map<int, S> row) {
        while (!row.empty()) {
            const int col = row.begin()->first;
            const S lead = row.begin()->second;
            if (is_zero(lead)) {
                row.erase(row.begin());
                continue;
            }
            auto it = rows_.find(col);
            if (it == rows_.end()) {
                if constexpr (std::is_same_v<S, double>) {
                    if (std::abs(lead) <= 1e-9 * max_pivot_) {
                        row.erase(row.begin());
                        continue;
                    }
                    max_pivot_ = std::max(max_pivot_, std::abs(lead));
                }
                for (auto& [c, v] : row) v = v / lead;
                rows_.emplace(col, std::move(row));
                ++rank_;
                return;
            }
            row.erase(row.begin());
            for (const auto& [c, v] : it->second) {
                if (c == col) continue;
                auto slot = row.find(c);
                if (slot == row.end()) slot = row.emplace(c, S{}).first;
                slot->second = slot->second - lead * v;
                if (is_zero(slot->second)) row.erase(slot);
            }
        }
    }

    int rank() const { return rank_; }

private:
    std::map<int, std::map<int, S>> rows_;  // pivot column -> row, pivot coefficient 1
    double max_pivot_ = 0.0;
    int rank_ = 0;
};

// Dense rank of a list of coefficient rows, same tolerance convention.
template <class S>
int dense_rank(std::vector<std::vector<S>> rows) {
    struct Echelon {
        std::size_t pivot;
        std::vector<S> row;
    };
    std::vector<Echelon> echelon;
    double max_pivot = 0.0;
    for (auto& r : rows) {
        for (const auto& e : echelon) {
            const S f = r[e.pivot];
            if (is_zero(f)) continue;
            for (std::size_t j = 0; j < r.size(); ++j) r[j] = r[j] - f * e.row[j];
        }
        std::size_t p = r.size();
        if constexpr (std::is_same_v<S, double>) {
            double best = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j)
                if (std::abs(r[j]) > best) {
                    best = std::abs(r[j]);
                    p = j;
                }
            if (p == r.size() || best <= 1e-9 * max_pivot) continue;
            max_pivot = std::max(max_pivot, best);
        } else {
            for (std::size_t j = 0; j < r.size(); ++j)
                if (!is_zero(r[j])) {
                    p = j;
                    break;
                }
            if (p == r.size()) continue;
        }
        const S lead = r[p];
        for (auto& v : r) v = v / lead;
        echelon.push_back({p, std::move(r)});
    }
    return static_cast<int>(echelon.size());
}

template <class S>
int nullspace_dim(const CommutantProblem& p, const std::vector<Permutation>& generators) {
    check_problem_size(p);
    const auto d_out = static_cast<int>(action_coordinates(p.spec_out).size());
    const auto d_in = static_cast<int>(action_coordinates(p.spec_in).size());
    SparseEliminator<S> elim;
    for (const auto& sigma : generators) {
        const auto img_out = coordinate_action(p.spec_out, sigma);
        const auto img_in = coordinate_action(p.spec_in, sigma);
        for (int r = 0; r < d_out; ++r)
            for (int c = 0; c < d_in; ++c) {
                const int u1 = r * d_in + c;
                const int u2 = img_out[static_cast<std::size_t>(r)] * d_in +
                               img_in[static_cast<std::size_t>(c)];
                if (u1 == u2) continue;
                elim.add({{u1, S{1}}, {u2, S{0} - S{1}}});
            }
    }
    return d_out * d_in - elim.rank();
}

std::size_t flat_index(const std::vector<int>& tuple, int n) {
    std::size_t f = 0;
    for (int v : tuple) f = f * static_cast<std::size_t>(n) + static_cast<std::size_t>(v);
    return f;
}

template <class S>
std::vector<std::vector<S>> restricted_term_rows(LayerKind kind, int n,
                                                 const std::vector<std::vector<int>>& coords_out,
                                                 const std::vector<std::vector<int>>& coords_in) {
    std::vector<std::vector<S>> rows;
    for (const auto& term : basis_terms(kind)) {
        const Matrix m = materialize_term(term, n);
        std::vector<S> row;
        row.reserve(coords_out.size() * coords_in.size());
        for (const auto& out_t : coords_out)
            for (const auto& in_t : coords_in)
                row.push_back(S{static_cast<std::int64_t>(
                    m(static_cast<int>(flat_index(out_t, n)), static_cast<int>(flat_index(in_t, n))))});
        rows.push_back(std::move(row));
    }
    return rows;
}

template <>
std::vector<std::vector<double>> restricted_term_rows<double>(
    LayerKind kind, int n, const std::vector<std::vector<int>>& coords_out,
    const std::vector<std::vector<int>>& coords_in) {
    std::vector<std::vector<double>> rows;
    for (const auto& term : basis_terms(kind)) {
        const Matrix m = materialize_term(term, n);
        std::vector<double> row;
        row.reserve(coords_out.size() * coords_in.size());
        for (const auto& out_t : coords_out)
            for (const auto& in_t : coords_in)
                row.push_back(m(static_cast<int>(flat_index(out_t, n)),
                                static_cast<int>(flat_index(in_t, n))));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

CommutantProblem::CommutantProblem(ActionSpec in, ActionSpec out) : spec_in(in), spec_out(out) {
    if (spec_in.n != spec_out.n)
        throw std::invalid_argument("CommutantProblem: actions must share the same n");
}

std::vector<std::vector<int>> action_coordinates(const ActionSpec& spec) {
    const SlotPattern pattern = slot_pattern(spec.variant);
    std::vector<std::vector<int>> coords;
    std::vector<int> t(static_cast<std::size_t>(pattern.order), 0);
    while (true) {
        if (tuple_matches(t, pattern)) coords.push_back(t);
        int pos = pattern.order - 1;
        while (pos >= 0) {
            if (++t[static_cast<std::size_t>(pos)] < spec.n) break;
            t[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return coords;
}

std::vector<int> coordinate_action(const ActionSpec& spec, const Permutation& sigma) {
    if (sigma.n() != spec.n) throw std::invalid_argument("coordinate_action: size mismatch");
    const SlotPattern pattern = slot_pattern(spec.variant);
    const auto coords = action_coordinates(spec);
    std::map<std::vector<int>, int> index;
    for (std::size_t i = 0; i < coords.size(); ++i) index.emplace(coords[i], static_cast<int>(i));
    std::vector<int> image(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        std::vector<int> u(coords[i].size());
        for (std::size_t s = 0; s < u.size(); ++s) u[s] = sigma.image(coords[i][s]);
        if (pattern.symmetric) std::sort(u.begin(), u.end());
        image[i] = index.at(u);
    }
    return image;
}

std::int64_t commutant_dim_orbit(int k_in, int k_out, int n) {
    if (k_in < 1 || k_out < 1 || k_in + k_out > 6)
        throw std::invalid_argument("commutant_dim_orbit: orders out of range (1 <= k, k_in+k_out <= 6)");
    if (n < 1) throw std::invalid_argument("commutant_dim_orbit: n must be positive");
    std::int64_t count = 0;
    for_each_rgs(k_in + k_out, [&](const std::vector<int>& a) {
        if (*std::max_element(a.begin(), a.end()) + 1 <= n) ++count;
    });
    return count;
}

std::int64_t commutant_dim_orbit(const CommutantProblem& problem) {
    const SlotPattern out_p = slot_pattern(problem.spec_out.variant);
    const SlotPattern in_p = slot_pattern(problem.spec_in.variant);
    const int k_out = out_p.order, k = k_out + in_p.order;
    const int n = problem.n();

    std::vector<std::pair<int, int>> forced = out_p.forced, banned = out_p.banned;
    for (auto [a, b] : in_p.forced) forced.emplace_back(a + k_out, b + k_out);
    for (auto [a, b] : in_p.banned) banned.emplace_back(a + k_out, b + k_out);

    // Slot relabelings identifying partitions of symmetric variants.
    std::vector<std::vector<int>> swap_group;
    {
        std::vector<int> id(static_cast<std::size_t>(k));
        std::iota(id.begin(), id.end(), 0);
        swap_group.push_back(id);
        const auto add_swap = [&](int a, int b) {
            const std::size_t count = swap_group.size();
            for (std::size_t g = 0; g < count; ++g) {
                auto s = swap_group[g];
                std::swap(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
                swap_group.push_back(std::move(s));
            }
        };
        if (out_p.symmetric) add_swap(0, 1);
        if (in_p.symmetric) add_swap(k_out, k_out + 1);
    }

    std::set<std::vector<int>> orbits;
    std::int64_t count = 0;
    for_each_rgs(k, [&](const std::vector<int>& a) {
        if (*std::max_element(a.begin(), a.end()) + 1 > n) return;
        for (auto [p, q] : forced)
            if (a[static_cast<std::size_t>(p)] != a[static_cast<std::size_t>(q)]) return;
        for (auto [p, q] : banned)
            if (a[static_cast<std::size_t>(p)] == a[static_cast<std::size_t>(q)]) return;
        if (swap_group.size() == 1) {
            ++count;
            return;
        }
        std::vector<int> best;
        for (const auto& g : swap_group) {
            std::vector<int> relabeled(a.size());
            for (std::size_t s = 0; s < a.size(); ++s) relabeled[s] = a[g[s]];
            auto canon = canonical_rgs(relabeled);
            if (best.empty() || canon < best) best = std::move(canon);
        }
        orbits.insert(std::move(best));
    });
    return swap_group.size() == 1 ? count : static_cast<std::int64_t>(orbits.size());
}

int commutant_dim_nullspace(const CommutantProblem& problem) {
    return nullspace_dim<double>(problem, standard_generators(problem.n()));
}

int commutant_dim_nullspace_exact(const CommutantProblem& problem) {
    if (problem.n() > 4)
        throw std::invalid_argument("commutant_dim_nullspace_exact: exact arithmetic limited to n <= 4");
    return nullspace_dim<Fraction>(problem, standard_generators(problem.n()));
}

int commutant_dim_nullspace_extended(const CommutantProblem& problem, int extra, std::uint64_t seed) {
    auto generators = standard_generators(problem.n());
    for (int i = 0; i < extra; ++i)
        generators.push_back(random_permutation(problem.n(), derive_seed(seed, static_cast<std::uint64_t>(i))));
    return nullspace_dim<double>(problem, generators);
}

std::string SpanVerdict::to_string() const {
    std::ostringstream os;
    switch (status) {
        case Status::exact: os << "exact"; break;
        case Status::deficient: os << "deficient(rank=" << rank << ")"; break;
        case Status::excess: os << "excess(rank=" << rank << ")"; break;
    }
    return os.str();
}

CommutantProblem layer_problem(LayerKind kind, int n) {
    switch (kind) {
        case LayerKind::first_to_first:
            return {ActionSpec(n, ActionVariant::order1), ActionSpec(n, ActionVariant::order1)};
        case LayerKind::second_to_second_zero_diag:
            return {ActionSpec(n, ActionVariant::order2_zero_diag),
                    ActionSpec(n, ActionVariant::order2_zero_diag)};
        case LayerKind::second_to_second:
            return {ActionSpec(n, ActionVariant::order2_full), ActionSpec(n, ActionVariant::order2_full)};
        case LayerKind::second_to_first:
            return {ActionSpec(n, ActionVariant::order2_full), ActionSpec(n, ActionVariant::order1)};
        case LayerKind::third_to_third:
            return {ActionSpec(n, ActionVariant::order3_full), ActionSpec(n, ActionVariant::order3_full)};
    }
    throw std::invalid_argument("layer_problem: unknown kind");
}

SpanVerdict basis_spans_commutant(LayerKind kind, int n, bool exact_arithmetic) {
    const CommutantProblem problem = layer_problem(kind, n);
    check_problem_size(problem);

    const auto coords_out = action_coordinates(problem.spec_out);
    const auto coords_in = action_coordinates(problem.spec_in);

    SpanVerdict v;
    v.dim = exact_arithmetic ? commutant_dim_nullspace_exact(problem) : commutant_dim_nullspace(problem);
    v.term_count = static_cast<int>(basis_terms(kind).size());

    const auto double_rows = restricted_term_rows<double>(kind, n, coords_out, coords_in);
    if (exact_arithmetic)
        v.rank = dense_rank(restricted_term_rows<Fraction>(kind, n, coords_out, coords_in));
    else
        v.rank = dense_rank(double_rows);

    const int d_in = static_cast<int>(coords_in.size());
    for (const auto& sigma : standard_generators(n)) {
        const auto img_out = coordinate_action(problem.spec_out, sigma);
        const auto img_in = coordinate_action(problem.spec_in, sigma);
        for (const auto& row : double_rows)
            for (std::size_t r = 0; r < coords_out.size(); ++r)
                for (std::size_t c = 0; c < coords_in.size(); ++c) {
                    const double a = row[r * static_cast<std::size_t>(d_in) + c];
                    const double b = row[static_cast<std::size_t>(img_out[r]) * static_cast<std::size_t>(d_in) +
                                         static_cast<std::size_t>(img_in[c])];
                    v.max_residual = std::max(v.max_residual, std::abs(a - b));
                }
    }

    if (v.rank < v.dim)
        v.status = SpanVerdict::Status::deficient;
    else if (v.rank == v.dim && v.rank == v.term_count && v.max_residual < 1e-9)
        v.status = SpanVerdict::Status::exact;
    else
        v.status = SpanVerdict::Status::excess;
    return v;
}

SpanVerdict basis_spans_commutant(int order_in, int order_out, int n) {
    return basis_spans_commutant(layer_kind(order_in, order_out, true), n, false);
}

}  // namespace sneq
