#include "sneq/compose.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace sneq {
namespace {

std::vector<int> parent_positions(const std::vector<int>& child_domain,
                                  const std::vector<int>& parent_domain) {
    std::vector<int> pos(child_domain.size());
    for (std::size_t i = 0; i < child_domain.size(); ++i) {
        const auto it = std::find(parent_domain.begin(), parent_domain.end(), child_domain[i]);
        if (it == parent_domain.end()) {
            std::ostringstream os;
            os << "promote: child id " << child_domain[i] << " not in the parent domain";
            throw std::invalid_argument(os.str());
        }
        pos[i] = static_cast<int>(it - parent_domain.begin());
    }
    return pos;
}

void check_same_shape(const std::vector<DomainActivation>& children) {
    if (children.empty())
        throw std::invalid_argument("aggregate: at least one child activation required");
    for (const auto& c : children)
        if (c.tensor.order() != children.front().tensor.order() ||
            c.tensor.channels() != children.front().tensor.channels())
            throw std::invalid_argument("aggregate: children must share order and channel count");
}

void check_adjacency(const EquivariantTensor& adjacency) {
    if (adjacency.order() != 2 || adjacency.channels() != 1)
        throw std::invalid_argument("neighborhood_network: adjacency must be order 2, one channel");
    for (int i = 0; i < adjacency.n(); ++i)
        for (int j = 0; j < adjacency.n(); ++j) {
            const double v = adjacency.at(i, j, 0);
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("neighborhood_network: adjacency entries must be 0 or 1");
            if (v != adjacency.at(j, i, 0))
                throw std::invalid_argument("neighborhood_network: adjacency must be symmetric");
            if (i == j && v != 0.0)
                throw std::invalid_argument("neighborhood_network: adjacency diagonal must be zero");
        }
}

}  // namespace

DomainActivation::DomainActivation(std::vector<int> domain_, EquivariantTensor tensor_)
    : domain(std::move(domain_)), tensor(std::move(tensor_)) {
    for (std::size_t i = 0; i < domain.size(); ++i) {
        if (domain[i] < 1) throw std::invalid_argument("DomainActivation: ids are 1-based");
        if (i > 0 && domain[i] <= domain[i - 1])
            throw std::invalid_argument("DomainActivation: domain must be strictly increasing");
    }
    if (tensor.n() != static_cast<int>(domain.size()))
        throw std::invalid_argument("DomainActivation: tensor index set must match the domain size");
}

EquivariantTensor promote(const DomainActivation& child, const std::vector<int>& parent_domain,
                          double fill) {
    const auto pos = parent_positions(child.domain, parent_domain);
    const int order = child.tensor.order();
    const int channels = child.tensor.channels();
    EquivariantTensor out(static_cast<int>(parent_domain.size()), order, channels);
    for (double& v : out.raw()) v = fill;

    std::array<int, 3> local{}, mapped{};
    for (std::size_t e = 0; e < child.tensor.entry_count(); ++e) {
        child.tensor.unflatten(e, local.data());
        for (int s = 0; s < order; ++s) mapped[static_cast<std::size_t>(s)] = pos[static_cast<std::size_t>(local[static_cast<std::size_t>(s)])];
        const std::size_t pe = out.flatten(mapped.data());
        for (int c = 0; c < channels; ++c) out.value(pe, c) = child.tensor.value(e, c);
    }
    return out;
}

EquivariantTensor aggregate_sum(const std::vector<DomainActivation>& children,
                                const std::vector<int>& parent_domain) {
    check_same_shape(children);
    EquivariantTensor out(static_cast<int>(parent_domain.size()), children.front().tensor.order(),
                          children.front().tensor.channels());
    for (const auto& child : children) {
        const auto promoted = promote(child, parent_domain, 0.0);
        for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] += promoted.raw()[i];
    }
    return out;
}

EquivariantTensor aggregate_product(const std::vector<DomainActivation>& children,
                                    const std::vector<int>& parent_domain) {
    check_same_shape(children);
    EquivariantTensor out(static_cast<int>(parent_domain.size()), children.front().tensor.order(),
                          children.front().tensor.channels());
    for (double& v : out.raw()) v = 1.0;
    for (const auto& child : children) {
        const auto promoted = promote(child, parent_domain, 1.0);
        for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] *= promoted.raw()[i];
    }
    return out;
}

DomainActivation relabel(const Permutation& sigma, const DomainActivation& activation) {
    std::vector<int> new_domain(activation.domain.size());
    for (std::size_t i = 0; i < new_domain.size(); ++i)
        new_domain[i] = sigma.image(activation.domain[i] - 1) + 1;
    std::sort(new_domain.begin(), new_domain.end());

    std::vector<int> local(activation.domain.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
        const int image = sigma.image(activation.domain[i] - 1) + 1;
        local[i] = static_cast<int>(
            std::lower_bound(new_domain.begin(), new_domain.end(), image) - new_domain.begin());
    }
    return {std::move(new_domain), act(Permutation(std::move(local)), activation.tensor)};
}

std::vector<DomainActivation> neighborhood_network(const EquivariantTensor& adjacency,
                                                   const std::vector<LayerWeights>& weights,
                                                   Nonlinearity xi) {
    check_adjacency(adjacency);
    const int n = adjacency.n();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].kind != LayerKind::first_to_first)
            throw std::invalid_argument("neighborhood_network: all layers must be first_to_first");
        if (l > 0 && weights[l].channels_in != weights[l - 1].channels_out)
            throw std::invalid_argument("neighborhood_network: layer channel counts must chain");
    }

    const int start_channels = weights.empty() ? 1 : weights.front().channels_in;
    std::vector<DomainActivation> current;
    current.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        EquivariantTensor ones(1, 1, start_channels);
        for (double& x : ones.raw()) x = 1.0;
        current.emplace_back(std::vector<int>{v + 1}, std::move(ones));
    }

    // Radius-l balls grown one step per layer.
    std::vector<std::vector<bool>> ball(static_cast<std::size_t>(n),
                                        std::vector<bool>(static_cast<std::size_t>(n), false));
    for (int v = 0; v < n; ++v) ball[static_cast<std::size_t>(v)][static_cast<std::size_t>(v)] = true;

    for (const auto& w : weights) {
        std::vector<std::vector<bool>> next_ball = ball;
        for (int v = 0; v < n; ++v)
            for (int u = 0; u < n; ++u)
                if (adjacency.at(v, u, 0) == 1.0)
                    for (int x = 0; x < n; ++x)
                        if (ball[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)])
                            next_ball[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)] = true;
        ball = std::move(next_ball);

        std::vector<DomainActivation> next;
        next.reserve(static_cast<std::size_t>(n));
        for (int v = 0; v < n; ++v) {
            std::vector<int> domain;
            for (int x = 0; x < n; ++x)
                if (ball[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)]) domain.push_back(x + 1);

            std::vector<DomainActivation> children;
            children.push_back(current[static_cast<std::size_t>(v)]);
            for (int u = 0; u < n; ++u)
                if (adjacency.at(v, u, 0) == 1.0) children.push_back(current[static_cast<std::size_t>(u)]);

            auto summed = aggregate_sum(children, domain);
            next.emplace_back(std::move(domain), apply_layer(w, xi, summed));
        }
        current = std::move(next);
    }
    return current;
}

Matrix readout_features(const std::vector<DomainActivation>& activations) {
    if (activations.empty()) return {};
    Matrix out(static_cast<int>(activations.size()), activations.front().tensor.channels());
    for (std::size_t v = 0; v < activations.size(); ++v) {
        if (activations[v].tensor.order() != 1)
            throw std::invalid_argument("readout_features: activations must be order 1");
        const auto pooled = pool_1_to_0(activations[v].tensor);
        for (int c = 0; c < out.cols; ++c) out(static_cast<int>(v), c) = pooled.at(c);
    }
    return out;
}

}  // namespace sneq
