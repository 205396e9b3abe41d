#include "sneq/compose.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sneq/rng.hpp"

using namespace sneq;

namespace {

EquivariantTensor vec(std::vector<double> values) {
    EquivariantTensor t(static_cast<int>(values.size()), 1, 1);
    for (std::size_t i = 0; i < values.size(); ++i) t.at(static_cast<int>(i), 0) = values[i];
    return t;
}

double max_abs_diff(const EquivariantTensor& a, const EquivariantTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i) m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

// Position permutation a global relabeling induces on an ordered id list.
Permutation induced_on(const std::vector<int>& domain, const Permutation& sigma) {
    std::vector<int> new_domain(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) new_domain[i] = sigma.image(domain[i] - 1) + 1;
    std::sort(new_domain.begin(), new_domain.end());
    std::vector<int> images(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) {
        const int id = sigma.image(domain[i] - 1) + 1;
        images[i] = static_cast<int>(std::lower_bound(new_domain.begin(), new_domain.end(), id) -
                                     new_domain.begin());
    }
    return Permutation(std::move(images));
}

std::vector<int> sorted_image(const std::vector<int>& domain, const Permutation& sigma) {
    std::vector<int> out(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) out[i] = sigma.image(domain[i] - 1) + 1;
    std::sort(out.begin(), out.end());
    return out;
}

DomainActivation random_activation(std::vector<int> domain, int order, int channels,
                                   std::uint64_t seed) {
    auto t = random_tensor(static_cast<int>(domain.size()), order, channels, seed);
    return {std::move(domain), std::move(t)};
}

}  // namespace

TEST_CASE("domain activations validate their invariants") {
    CHECK_NOTHROW(DomainActivation({1, 3, 7}, EquivariantTensor(3, 1, 2)));
    CHECK_THROWS_AS(DomainActivation({1, 1}, EquivariantTensor(2, 1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(DomainActivation({3, 1}, EquivariantTensor(2, 1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(DomainActivation({0, 1}, EquivariantTensor(2, 1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(DomainActivation({1, 2}, EquivariantTensor(3, 1, 1)), std::invalid_argument);
}

TEST_CASE("promotion worked examples") {
    // Identity promotion.
    const auto same = random_activation({1, 2, 3}, 2, 2, 17);
    CHECK(promote(same, {1, 2, 3}) == same.tensor);

    // Order-1 placement.
    const DomainActivation single({3}, vec({5}));
    const auto placed = promote(single, {1, 2, 3});
    CHECK(placed.at(0, 0) == 0.0);
    CHECK(placed.at(1, 0) == 0.0);
    CHECK(placed.at(2, 0) == 5.0);

    // Order-2 placement.
    EquivariantTensor m(2, 2, 1);
    m.at(0, 1, 0) = 1.0;
    m.at(1, 0, 0) = 2.0;
    const DomainActivation pair({2, 4}, m);
    const auto lifted = promote(pair, {1, 2, 3, 4});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double want = 0.0;
            if (i == 1 && j == 3) want = 1.0;
            if (i == 3 && j == 1) want = 2.0;
            CHECK(lifted.at(i, j, 0) == want);
        }

    // Containment violation.
    CHECK_THROWS_AS(promote(single, {1, 2}), std::invalid_argument);

    // Fill value reaches every unpromoted entry.
    const auto filled = promote(single, {1, 2, 3}, -1.5);
    CHECK(filled.at(0, 0) == -1.5);
    CHECK(filled.at(1, 0) == -1.5);
    CHECK(filled.at(2, 0) == 5.0);

    // Order-0 activations promote to a copy.
    EquivariantTensor scalar(2, 0, 3);
    scalar.at(0) = 4.0;
    scalar.at(2) = -1.0;
    const auto promoted_scalar = promote(DomainActivation({2, 5}, scalar), {1, 2, 5});
    CHECK(promoted_scalar.raw() == scalar.raw());
    CHECK(promoted_scalar.n() == 3);
}

TEST_CASE("promotion respects relabeling") {
    const int n = 6;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const auto sigma = random_permutation(n, derive_seed(1000, trial));
        const std::vector<int> parent = {1, 2, 4, 6};
        const std::vector<int> child_domain = {2, 4, 6};
        const int order = 1 + static_cast<int>(trial % 3);
        const auto child = random_activation(child_domain, order, 2, derive_seed(2000, trial));

        const auto lhs = promote(relabel(sigma, child), sorted_image(parent, sigma));
        const auto rhs = act(induced_on(parent, sigma), promote(child, parent));
        CHECK(max_abs_diff(lhs, rhs) == 0.0);
    }
}

TEST_CASE("sum aggregation worked examples") {
    const auto whole = random_activation({1, 2, 3}, 1, 2, 5);
    CHECK(aggregate_sum({whole}, {1, 2, 3}) == promote(whole, {1, 2, 3}));

    // Disjoint order-1 children concatenate by position.
    const DomainActivation a({1}, vec({2}));
    const DomainActivation b({3}, vec({7}));
    const auto cat = aggregate_sum({a, b}, {1, 2, 3});
    CHECK(cat.at(0, 0) == 2.0);
    CHECK(cat.at(1, 0) == 0.0);
    CHECK(cat.at(2, 0) == 7.0);

    // Identical children double.
    const auto twice = aggregate_sum({whole, whole}, {1, 2, 3});
    for (std::size_t i = 0; i < twice.raw().size(); ++i)
        CHECK(twice.raw()[i] == 2.0 * promote(whole, {1, 2, 3}).raw()[i]);

    CHECK_THROWS_AS(aggregate_sum({}, {1, 2}), std::invalid_argument);
    const auto order2 = random_activation({1}, 2, 2, 6);
    CHECK_THROWS_AS(aggregate_sum({whole, order2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("product aggregation worked examples") {
    // One child: promotion with neutral fill.
    const DomainActivation lone({2}, vec({4}));
    const auto prod1 = aggregate_product({lone}, {1, 2, 3});
    CHECK(prod1.at(0, 0) == 1.0);
    CHECK(prod1.at(1, 0) == 4.0);
    CHECK(prod1.at(2, 0) == 1.0);

    // All-ones child is the multiplicative identity.
    const DomainActivation ones({1, 2, 3}, vec({1, 1, 1}));
    const auto other = random_activation({1, 3}, 1, 1, 9);
    CHECK(aggregate_product({ones, other}, {1, 2, 3}) == promote(other, {1, 2, 3}, 1.0));

    // Overlap multiplies pointwise: 2 * 3 = 6 at the shared id.
    const DomainActivation left({2}, vec({2}));
    const DomainActivation right({1, 2}, vec({5, 3}));
    const auto prod = aggregate_product({left, right}, {1, 2, 3});
    CHECK(prod.at(0, 0) == 5.0);
    CHECK(prod.at(1, 0) == 6.0);
    CHECK(prod.at(2, 0) == 1.0);
}

TEST_CASE("aggregation commutes with relabeling") {
    const int n = 7;
    const std::vector<int> parent = {1, 2, 3, 5, 7};
    for (std::uint64_t trial = 0; trial < 15; ++trial) {
        const auto sigma = random_permutation(n, derive_seed(31, trial));
        const int order = 1 + static_cast<int>(trial % 2);
        std::vector<DomainActivation> children;
        children.push_back(random_activation({1, 3, 5}, order, 2, derive_seed(32, trial)));
        children.push_back(random_activation({2, 3}, order, 2, derive_seed(33, trial)));
        children.push_back(random_activation({5, 7}, order, 2, derive_seed(34, trial)));

        std::vector<DomainActivation> relabeled;
        for (const auto& c : children) relabeled.push_back(relabel(sigma, c));
        const auto new_parent = sorted_image(parent, sigma);
        const auto tau = induced_on(parent, sigma);

        CHECK(aggregate_sum(relabeled, new_parent) == act(tau, aggregate_sum(children, parent)));
        CHECK(max_abs_diff(aggregate_product(relabeled, new_parent),
                           act(tau, aggregate_product(children, parent))) < 1e-12);
    }
}

TEST_CASE("relabeling an activation permutes its domain and entries together") {
    const DomainActivation a({1, 3}, vec({10, 20}));
    // 1 -> 2, 2 -> 3, 3 -> 1.
    const auto sigma = Permutation::from_one_based({2, 3, 1});
    const auto moved = relabel(sigma, a);
    CHECK(moved.domain == std::vector<int>{1, 2});
    CHECK(moved.tensor.at(0, 0) == 20.0);  // id 3's value, now id 1
    CHECK(moved.tensor.at(1, 0) == 10.0);  // id 1's value, now id 2
}

TEST_CASE("neighborhood domains grow with the layer count") {
    EquivariantTensor empty(4, 2, 1);
    const auto w = LayerWeights::zeros(LayerKind::first_to_first, 1, 1, false);
    const auto acts1 = neighborhood_network(empty, {w}, Nonlinearity::identity);
    REQUIRE(acts1.size() == 4);
    for (int v = 0; v < 4; ++v) CHECK(acts1[static_cast<std::size_t>(v)].domain == std::vector<int>{v + 1});

    EquivariantTensor path(3, 2, 1);
    path.at(0, 1, 0) = path.at(1, 0, 0) = 1.0;
    path.at(1, 2, 0) = path.at(2, 1, 0) = 1.0;
    const auto acts = neighborhood_network(path, {w}, Nonlinearity::identity);
    CHECK(acts[0].domain == std::vector<int>{1, 2});
    CHECK(acts[1].domain == std::vector<int>{1, 2, 3});
    CHECK(acts[2].domain == std::vector<int>{2, 3});

    const auto acts2 = neighborhood_network(path, {w, w}, Nonlinearity::identity);
    CHECK(acts2[0].domain == std::vector<int>{1, 2, 3});
    CHECK(acts2[2].domain == std::vector<int>{1, 2, 3});

    const auto acts0 = neighborhood_network(path, {}, Nonlinearity::identity);
    CHECK(acts0[1].domain == std::vector<int>{2});
    CHECK(acts0[1].tensor.at(0, 0) == 1.0);
}

TEST_CASE("one round of message passing on a path, by hand") {
    EquivariantTensor path(3, 2, 1);
    path.at(0, 1, 0) = path.at(1, 0, 0) = 1.0;
    path.at(1, 2, 0) = path.at(2, 1, 0) = 1.0;

    // out_i = 1 * f_i + 10 * sum(f); every incoming activation is the scalar 1.
    auto w = LayerWeights::zeros(LayerKind::first_to_first, 1, 1, false);
    w.term_weights[0](0, 0) = 1.0;
    w.term_weights[1](0, 0) = 10.0;
    const auto feats = readout_features(neighborhood_network(path, {w}, Nonlinearity::identity));
    REQUIRE(feats.rows == 3);
    REQUIRE(feats.cols == 1);
    // End vertices: domain {v, middle}, aggregated ones (1,1): per-entry 1 + 10*2 = 21, pooled 42.
    CHECK(feats(0, 0) == 42.0);
    CHECK(feats(2, 0) == 42.0);
    // Middle: domain {1,2,3}, aggregated (1,1,1): per-entry 1 + 10*3 = 31, pooled 93.
    CHECK(feats(1, 0) == 93.0);
}

TEST_CASE("network rejects malformed inputs") {
    EquivariantTensor adj(3, 2, 1);
    adj.at(0, 1, 0) = 1.0;  // not symmetric
    const auto w = LayerWeights::zeros(LayerKind::first_to_first, 1, 1, false);
    CHECK_THROWS_AS(neighborhood_network(adj, {w}, Nonlinearity::identity), std::invalid_argument);

    EquivariantTensor diag(3, 2, 1);
    diag.at(1, 1, 0) = 1.0;
    CHECK_THROWS_AS(neighborhood_network(diag, {w}, Nonlinearity::identity), std::invalid_argument);

    EquivariantTensor weighted(3, 2, 1);
    weighted.at(0, 1, 0) = weighted.at(1, 0, 0) = 0.5;
    CHECK_THROWS_AS(neighborhood_network(weighted, {w}, Nonlinearity::identity), std::invalid_argument);

    CHECK_THROWS_AS(neighborhood_network(EquivariantTensor(3, 1, 1), {w}, Nonlinearity::identity),
                    std::invalid_argument);

    EquivariantTensor ok(3, 2, 1);
    const auto pool_w = LayerWeights::zeros(LayerKind::second_to_first, 1, 1, false);
    CHECK_THROWS_AS(neighborhood_network(ok, {pool_w}, Nonlinearity::identity), std::invalid_argument);

    const auto w23 = LayerWeights::zeros(LayerKind::first_to_first, 2, 3, false);
    const auto w13 = LayerWeights::zeros(LayerKind::first_to_first, 1, 3, false);
    CHECK_THROWS_AS(neighborhood_network(ok, {w23, w13}, Nonlinearity::identity), std::invalid_argument);

    CHECK_THROWS_AS(readout_features({random_activation({1, 2}, 2, 1, 3)}), std::invalid_argument);
}

TEST_CASE("vertex relabeling permutes the readout") {
    const int n = 6;
    RandomStream rs(606);
    EquivariantTensor adj(n, 2, 1);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rs.uniform() < 0.5) adj.at(i, j, 0) = adj.at(j, i, 0) = 1.0;

    auto w1 = LayerWeights::zeros(LayerKind::first_to_first, 2, 3, true);
    auto w2 = LayerWeights::zeros(LayerKind::first_to_first, 3, 2, true);
    for (auto* w : {&w1, &w2}) {
        for (auto& m : w->term_weights)
            for (auto& v : m.v) v = rs.normal();
        for (auto& b : w->bias) b = rs.normal();
    }

    const auto base = readout_features(neighborhood_network(adj, {w1, w2}, Nonlinearity::tanh));
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        const auto sigma = random_permutation(n, derive_seed(49, trial));
        const auto moved = readout_features(
            neighborhood_network(act(sigma, adj), {w1, w2}, Nonlinearity::tanh));
        for (int v = 0; v < n; ++v)
            for (int c = 0; c < 2; ++c)
                CHECK(moved(sigma.image(v), c) == doctest::Approx(base(v, c)).epsilon(1e-10));
    }
}
