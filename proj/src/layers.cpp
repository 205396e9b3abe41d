#include "sneq/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sneq {

LayerShape layer_shape(LayerKind kind) {
    switch (kind) {
        case LayerKind::first_to_first: return {1, 1, true};
        case LayerKind::second_to_second_zero_diag: return {2, 2, false};
        case LayerKind::second_to_second: return {2, 2, true};
        case LayerKind::second_to_first: return {2, 1, true};
        case LayerKind::third_to_third: return {3, 3, true};
    }
    throw std::invalid_argument("layer_shape: unknown kind");
}

LayerKind layer_kind(int order_in, int order_out, bool full_diagonal) {
    if (order_in == 1 && order_out == 1) return LayerKind::first_to_first;
    if (order_in == 2 && order_out == 2)
        return full_diagonal ? LayerKind::second_to_second : LayerKind::second_to_second_zero_diag;
    if (order_in == 2 && order_out == 1) return LayerKind::second_to_first;
    if (order_in == 3 && order_out == 3) {
        if (!full_diagonal)
            throw std::invalid_argument("layer_kind: order-3 layers carry all strata");
        return LayerKind::third_to_third;
    }
    std::ostringstream os;
    os << "layer_kind: unsupported order pair (" << order_in << " -> " << order_out << ")";
    throw std::invalid_argument(os.str());
}

std::string layer_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::first_to_first: return "1to1";
        case LayerKind::second_to_second_zero_diag: return "2to2_zero_diag";
        case LayerKind::second_to_second: return "2to2";
        case LayerKind::second_to_first: return "2to1";
        case LayerKind::third_to_third: return "3to3";
    }
    return "?";
}

int BasisTerm::stratum() const {
    if (order_out <= 1) return 0;
    if (order_out == 2) return out_blocks[0] == out_blocks[1] ? 1 : 0;
    const bool e01 = out_blocks[0] == out_blocks[1];
    const bool e02 = out_blocks[0] == out_blocks[2];
    const bool e12 = out_blocks[1] == out_blocks[2];
    if (e01 && e02) return 4;
    if (e01) return 1;
    if (e02) return 2;
    if (e12) return 3;
    return 0;
}

namespace {

struct BlockInfo {
    std::vector<char> has_out, has_in;

    explicit BlockInfo(const BasisTerm& t)
        : has_out(static_cast<std::size_t>(t.block_count), 0),
          has_in(static_cast<std::size_t>(t.block_count), 0) {
        for (int b : t.out_blocks) has_out[static_cast<std::size_t>(b)] = 1;
        for (int b : t.in_blocks) has_in[static_cast<std::size_t>(b)] = 1;
    }
    bool linked(int b) const { return has_out[static_cast<std::size_t>(b)] && has_in[static_cast<std::size_t>(b)]; }
};

/// Relabel blocks in first-appearance order scanning output then input slots.
void normalize_blocks(std::vector<int>& out_blocks, std::vector<int>& in_blocks, int& block_count) {
    std::vector<int> relabel(static_cast<std::size_t>(block_count), -1);
    int next = 0;
    auto visit = [&](std::vector<int>& slots) {
        for (int& b : slots) {
            if (relabel[static_cast<std::size_t>(b)] < 0) relabel[static_cast<std::size_t>(b)] = next++;
            b = relabel[static_cast<std::size_t>(b)];
        }
    };
    visit(out_blocks);
    visit(in_blocks);
    block_count = next;
}

}  // namespace

int BasisTerm::contraction_order() const {
    const BlockInfo info(*this);
    int r = 0;
    for (int b = 0; b < block_count; ++b)
        if (info.linked(b)) ++r;
    return r;
}

int BasisTerm::sum_block_count() const {
    const BlockInfo info(*this);
    int m = 0;
    for (int b = 0; b < block_count; ++b)
        if (info.has_in[static_cast<std::size_t>(b)] && !info.has_out[static_cast<std::size_t>(b)]) ++m;
    return m;
}

BasisTerm BasisTerm::adjoint() const {
    BasisTerm a;
    a.order_out = order_in;
    a.order_in = order_out;
    a.out_blocks = in_blocks;
    a.in_blocks = out_blocks;
    a.block_count = block_count;
    normalize_blocks(a.out_blocks, a.in_blocks, a.block_count);
    return a;
}

std::string BasisTerm::descriptor() const {
    const BlockInfo info(*this);
    static const char kOutLetters[] = "ijk";
    // Letter of each block holding output slots: the letter of its first slot.
    std::vector<char> letter(static_cast<std::size_t>(block_count), 0);
    for (int s = static_cast<int>(out_blocks.size()) - 1; s >= 0; --s)
        letter[static_cast<std::size_t>(out_blocks[s])] = kOutLetters[s];

    std::string prefix;
    if (order_out == 2) prefix = stratum() == 0 ? "off-diag: " : "diag: ";
    if (order_out == 3) {
        switch (stratum()) {
            case 0: prefix = "distinct: "; break;
            case 1: prefix = "diag(i=j): "; break;
            case 2: prefix = "diag(i=k): "; break;
            case 3: prefix = "diag(j=k): "; break;
            case 4: prefix = "diag(i=j=k): "; break;
        }
    }

    // Symbols of summed blocks: '*' for a single summed slot, 'a','b',...
    // for repeated (trace-like) summed indices, in order of appearance.
    std::vector<int> in_count(static_cast<std::size_t>(block_count), 0);
    for (int b : in_blocks) ++in_count[static_cast<std::size_t>(b)];
    char next_sum_letter = 'a';
    std::vector<char> sum_symbol(static_cast<std::size_t>(block_count), 0);
    std::string body;
    for (std::size_t s = 0; s < in_blocks.size(); ++s) {
        const int b = in_blocks[s];
        char sym;
        if (info.linked(b)) {
            sym = letter[static_cast<std::size_t>(b)];
        } else if (in_count[static_cast<std::size_t>(b)] == 1) {
            sym = '*';
        } else {
            if (!sum_symbol[static_cast<std::size_t>(b)]) sum_symbol[static_cast<std::size_t>(b)] = next_sum_letter++;
            sym = sum_symbol[static_cast<std::size_t>(b)];
        }
        if (s) body += ',';
        body += sym;
    }
    return prefix + "f_{" + body + "}";
}

namespace {

/// Sort key: output stratum, contraction order (descending), the contraction
/// pattern over input slots, then where each copied index lands.
std::vector<int> term_key(const BasisTerm& t) {
    const BlockInfo info(t);
    std::vector<int> key;
    key.push_back(t.stratum());
    key.push_back(-t.contraction_order());

    // Per input slot: (0, rank among linked blocks) or (1, rank among summed
    // blocks), ranks by first appearance over input slots.
    std::vector<int> rank(static_cast<std::size_t>(t.block_count), -1);
    int next_linked = 0, next_sum = 0;
    std::vector<int> linked_order;  // block ids, first-appearance order
    for (int b : t.in_blocks) {
        if (rank[static_cast<std::size_t>(b)] < 0) {
            if (info.linked(b)) {
                rank[static_cast<std::size_t>(b)] = next_linked++;
                linked_order.push_back(b);
            } else {
                rank[static_cast<std::size_t>(b)] = next_sum++;
            }
        }
    }
    for (int b : t.in_blocks) {
        key.push_back(info.linked(b) ? 0 : 1);
        key.push_back(rank[static_cast<std::size_t>(b)]);
    }

    // Output-block rank of each linked block (output blocks ordered by their
    // first output slot).
    std::vector<int> out_rank(static_cast<std::size_t>(t.block_count), -1);
    int next_out = 0;
    for (int b : t.out_blocks)
        if (out_rank[static_cast<std::size_t>(b)] < 0) out_rank[static_cast<std::size_t>(b)] = next_out++;
    for (int b : linked_order) key.push_back(out_rank[static_cast<std::size_t>(b)]);
    return key;
}

std::vector<BasisTerm> build_terms(int order_in, int order_out, bool full_diagonal) {
    if (order_in == 3 && order_out == 3 && !full_diagonal)
        throw std::invalid_argument("basis_terms: order-3 layers carry all strata");
    const bool supported = (order_in == 1 && order_out == 1) || (order_in == 2 && order_out == 2) ||
                           (order_in == 2 && order_out == 1) || (order_in == 3 && order_out == 3);
    if (!supported) {
        std::ostringstream os;
        os << "basis_terms: unsupported order pair (" << order_in << " -> " << order_out << ")";
        throw std::invalid_argument(os.str());
    }
    const bool zero_diag = order_in == 2 && order_out == 2 && !full_diagonal;

    const int k = order_out + order_in;
    std::vector<BasisTerm> terms;
    // Enumerate set partitions of the k slots as restricted growth strings.
    std::vector<int> a(static_cast<std::size_t>(k), 0);
    while (true) {
        BasisTerm t;
        t.order_out = order_out;
        t.order_in = order_in;
        t.out_blocks.assign(a.begin(), a.begin() + order_out);
        t.in_blocks.assign(a.begin() + order_out, a.end());
        t.block_count = *std::max_element(a.begin(), a.end()) + 1;
        const bool out_merged = order_out == 2 && t.out_blocks[0] == t.out_blocks[1];
        const bool in_merged = order_in == 2 && t.in_blocks[0] == t.in_blocks[1];
        if (!(zero_diag && (out_merged || in_merged))) terms.push_back(std::move(t));

        // Next restricted growth string: a[0] = 0, a[i] <= max(a[0..i-1]) + 1.
        int i = k - 1;
        for (; i > 0; --i) {
            int prefix_max = 0;
            for (int j = 0; j < i; ++j) prefix_max = std::max(prefix_max, a[static_cast<std::size_t>(j)]);
            if (a[static_cast<std::size_t>(i)] < prefix_max + 1) break;
        }
        if (i == 0) break;
        ++a[static_cast<std::size_t>(i)];
        std::fill(a.begin() + i + 1, a.end(), 0);
    }

    std::stable_sort(terms.begin(), terms.end(), [](const BasisTerm& x, const BasisTerm& y) {
        return term_key(x) < term_key(y);
    });
    for (std::size_t i = 1; i < terms.size(); ++i)
        if (term_key(terms[i - 1]) == term_key(terms[i]))
            throw std::logic_error("basis_terms: canonical ordering is not a total order");
    return terms;
}

}  // namespace

std::vector<BasisTerm> basis_terms(int order_in, int order_out, bool full_diagonal) {
    return build_terms(order_in, order_out, full_diagonal);
}

const std::vector<BasisTerm>& basis_terms(LayerKind kind) {
    static const std::vector<BasisTerm> first = build_terms(1, 1, true);
    static const std::vector<BasisTerm> second_zero = build_terms(2, 2, false);
    static const std::vector<BasisTerm> second_full = build_terms(2, 2, true);
    static const std::vector<BasisTerm> pool = build_terms(2, 1, true);
    static const std::vector<BasisTerm> third = build_terms(3, 3, true);
    switch (kind) {
        case LayerKind::first_to_first: return first;
        case LayerKind::second_to_second_zero_diag: return second_zero;
        case LayerKind::second_to_second: return second_full;
        case LayerKind::second_to_first: return pool;
        case LayerKind::third_to_third: return third;
    }
    throw std::invalid_argument("basis_terms: unknown kind");
}

std::vector<std::string> describe_layer(LayerKind kind) {
    std::vector<std::string> lines;
    for (const auto& t : basis_terms(kind)) lines.push_back(t.descriptor());
    return lines;
}

double apply_nonlinearity(Nonlinearity xi, double x) {
    switch (xi) {
        case Nonlinearity::identity: return x;
        case Nonlinearity::relu: return x > 0.0 ? x : 0.0;
        case Nonlinearity::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Nonlinearity::tanh: return std::tanh(x);
    }
    return x;
}

double nonlinearity_derivative(Nonlinearity xi, double x) {
    switch (xi) {
        case Nonlinearity::identity: return 1.0;
        case Nonlinearity::relu: return x > 0.0 ? 1.0 : 0.0;
        case Nonlinearity::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Nonlinearity::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

std::string nonlinearity_name(Nonlinearity xi) {
    switch (xi) {
        case Nonlinearity::identity: return "identity";
        case Nonlinearity::relu: return "relu";
        case Nonlinearity::sigmoid: return "sigmoid";
        case Nonlinearity::tanh: return "tanh";
    }
    return "?";
}

LayerWeights LayerWeights::zeros(LayerKind kind, int channels_in, int channels_out, bool with_bias) {
    if (channels_in < 1 || channels_out < 1)
        throw std::invalid_argument("LayerWeights: channel counts must be positive");
    LayerWeights w;
    w.kind = kind;
    w.channels_in = channels_in;
    w.channels_out = channels_out;
    const auto& terms = basis_terms(kind);
    w.term_weights.assign(terms.size(), Matrix(channels_in, channels_out));
    if (with_bias) {
        w.bias.assign(static_cast<std::size_t>(channels_out), 0.0);
        if (kind == LayerKind::second_to_second)
            w.diag_bias.assign(static_cast<std::size_t>(channels_out), 0.0);
    }
    return w;
}

double term_scale(const BasisTerm& term, int n, const LayerOptions& opts) {
    if (!opts.normalize_sums) return 1.0;
    double s = 1.0;
    for (int i = 0; i < term.sum_block_count(); ++i) s /= static_cast<double>(n);
    return s;
}

EquivariantTensor apply_term(const BasisTerm& term, const EquivariantTensor& f, double scale) {
    if (f.order() != term.order_in)
        throw std::invalid_argument("apply_term: input order mismatch");
    const int n = f.n();
    const int C = f.channels();
    const BlockInfo info(term);

    // Output blocks in order of first output slot; linked blocks keep the
    // same order so the contraction array lines up with the scatter below.
    std::vector<int> out_block_list;
    std::vector<int> out_rank(static_cast<std::size_t>(term.block_count), -1);
    for (int b : term.out_blocks)
        if (out_rank[static_cast<std::size_t>(b)] < 0) {
            out_rank[static_cast<std::size_t>(b)] = static_cast<int>(out_block_list.size());
            out_block_list.push_back(b);
        }
    std::vector<int> linked_ranks;  // positions within out_block_list
    for (std::size_t q = 0; q < out_block_list.size(); ++q)
        if (info.linked(out_block_list[q])) linked_ranks.push_back(static_cast<int>(q));
    std::vector<int> sum_list;
    for (int b = 0; b < term.block_count; ++b)
        if (info.has_in[static_cast<std::size_t>(b)] && !info.has_out[static_cast<std::size_t>(b)])
            sum_list.push_back(b);

    const int r = static_cast<int>(linked_ranks.size());
    const int m = static_cast<int>(sum_list.size());

    // Where each input slot reads its value from during the contraction loop:
    // position 0..r-1 = linked blocks (in out_block_list order), r..r+m-1 =
    // summed blocks.
    std::vector<int> slot_source(term.in_blocks.size());
    {
        std::vector<int> source_of_block(static_cast<std::size_t>(term.block_count), -1);
        for (int q = 0; q < r; ++q)
            source_of_block[static_cast<std::size_t>(out_block_list[static_cast<std::size_t>(linked_ranks[static_cast<std::size_t>(q)])])] = q;
        for (int s = 0; s < m; ++s) source_of_block[static_cast<std::size_t>(sum_list[static_cast<std::size_t>(s)])] = r + s;
        for (std::size_t s = 0; s < term.in_blocks.size(); ++s)
            slot_source[s] = source_of_block[static_cast<std::size_t>(term.in_blocks[s])];
    }

    // Contract: g[linked values][c] = sum over summed-block values of f.
    std::size_t g_entries = 1;
    for (int q = 0; q < r; ++q) g_entries *= static_cast<std::size_t>(n);
    std::vector<double> g(g_entries * static_cast<std::size_t>(C), 0.0);

    std::vector<int> assign(static_cast<std::size_t>(r + m), 0);
    int in_idx[3];
    while (true) {
        for (std::size_t s = 0; s < term.in_blocks.size(); ++s)
            in_idx[s] = assign[static_cast<std::size_t>(slot_source[s])];
        const std::size_t fe = f.flatten(in_idx);
        std::size_t gi = 0;
        for (int q = 0; q < r; ++q) gi = gi * static_cast<std::size_t>(n) + static_cast<std::size_t>(assign[static_cast<std::size_t>(q)]);
        for (int c = 0; c < C; ++c) g[gi * static_cast<std::size_t>(C) + c] += f.value(fe, c);

        int d = r + m - 1;
        while (d >= 0 && assign[static_cast<std::size_t>(d)] == n - 1) assign[static_cast<std::size_t>(d--)] = 0;
        if (d < 0) break;
        ++assign[static_cast<std::size_t>(d)];
    }

    // Scatter: every assignment of output-block values names one output
    // entry consistent with the term's equality pattern.
    EquivariantTensor out(n, term.order_out, C);
    const int q_count = static_cast<int>(out_block_list.size());
    std::vector<int> w(static_cast<std::size_t>(q_count), 0);
    int out_idx[3];
    while (true) {
        for (std::size_t s = 0; s < term.out_blocks.size(); ++s)
            out_idx[s] = w[static_cast<std::size_t>(out_rank[static_cast<std::size_t>(term.out_blocks[s])])];
        const std::size_t oe = out.flatten(out_idx);
        std::size_t gi = 0;
        for (int q = 0; q < r; ++q)
            gi = gi * static_cast<std::size_t>(n) + static_cast<std::size_t>(w[static_cast<std::size_t>(linked_ranks[static_cast<std::size_t>(q)])]);
        for (int c = 0; c < C; ++c) out.value(oe, c) += scale * g[gi * static_cast<std::size_t>(C) + c];

        int d = q_count - 1;
        while (d >= 0 && w[static_cast<std::size_t>(d)] == n - 1) w[static_cast<std::size_t>(d--)] = 0;
        if (d < 0) break;
        ++w[static_cast<std::size_t>(d)];
    }
    return out;
}

namespace {

EquivariantTensor strip_diagonal(const EquivariantTensor& f) {
    EquivariantTensor g = f;
    for (int i = 0; i < f.n(); ++i)
        for (int c = 0; c < f.channels(); ++c) g.at(i, i, c) = 0.0;
    return g;
}

}  // namespace

EquivariantTensor apply_layer_linear(const LayerWeights& w, const EquivariantTensor& f_in,
                                     const LayerOptions& opts) {
    const LayerShape shape = layer_shape(w.kind);
    if (f_in.order() != shape.order_in)
        throw std::invalid_argument("apply_layer: input order mismatch");
    if (f_in.channels() != w.channels_in)
        throw std::invalid_argument("apply_layer: input channel mismatch");
    const auto& terms = basis_terms(w.kind);
    if (w.term_weights.size() != terms.size())
        throw std::invalid_argument("apply_layer: weight count does not match term count");

    const bool zero_diag = w.kind == LayerKind::second_to_second_zero_diag;
    const EquivariantTensor input = zero_diag ? strip_diagonal(f_in) : f_in;
    const int n = input.n();
    const int co_count = w.channels_out;

    EquivariantTensor out(n, shape.order_out, co_count);
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const EquivariantTensor feat = apply_term(terms[t], input, term_scale(terms[t], n, opts));
        const Matrix& W = w.term_weights[t];
        if (W.rows != w.channels_in || W.cols != co_count)
            throw std::invalid_argument("apply_layer: weight matrix shape mismatch");
        for (std::size_t e = 0; e < out.entry_count(); ++e)
            for (int co = 0; co < co_count; ++co) {
                double acc = 0.0;
                for (int ci = 0; ci < w.channels_in; ++ci) acc += feat.value(e, ci) * W(ci, co);
                out.value(e, co) += acc;
            }
    }

    if (!w.bias.empty()) {
        for (std::size_t e = 0; e < out.entry_count(); ++e)
            for (int co = 0; co < co_count; ++co) out.value(e, co) += w.bias[static_cast<std::size_t>(co)];
    }
    if (w.kind == LayerKind::second_to_second && !w.diag_bias.empty()) {
        for (int i = 0; i < n; ++i)
            for (int co = 0; co < co_count; ++co) out.at(i, i, co) += w.diag_bias[static_cast<std::size_t>(co)];
    }
    if (zero_diag) {
        for (int i = 0; i < n; ++i)
            for (int co = 0; co < co_count; ++co) out.at(i, i, co) = 0.0;
    }
    return out;
}

EquivariantTensor apply_layer(const LayerWeights& w, Nonlinearity xi,
                              const EquivariantTensor& f_in, const LayerOptions& opts) {
    EquivariantTensor out = apply_layer_linear(w, f_in, opts);
    if (w.kind == LayerKind::second_to_second_zero_diag) {
        // The diagonal stays exactly zero; the nonlinearity acts off it.
        for (std::size_t e = 0; e < out.entry_count(); ++e) {
            int ij[2];
            out.unflatten(e, ij);
            if (ij[0] == ij[1]) continue;
            for (int c = 0; c < out.channels(); ++c)
                out.value(e, c) = apply_nonlinearity(xi, out.value(e, c));
        }
        return out;
    }
    for (double& v : out.raw()) v = apply_nonlinearity(xi, v);
    return out;
}

EquivariantTensor pool_2_to_1(const LayerWeights& w, Nonlinearity xi,
                              const EquivariantTensor& f_in, const LayerOptions& opts) {
    if (w.kind != LayerKind::second_to_first)
        throw std::invalid_argument("pool_2_to_1: weights must be of the pooling kind");
    return apply_layer(w, xi, f_in, opts);
}

EquivariantTensor lift_1_to_2(const EquivariantTensor& f) {
    if (f.order() != 1) throw std::invalid_argument("lift_1_to_2: needs an order-1 input");
    EquivariantTensor out(f.n(), 2, f.channels());
    for (int i = 0; i < f.n(); ++i)
        for (int j = 0; j < f.n(); ++j)
            for (int c = 0; c < f.channels(); ++c) out.at(i, j, c) = f.at(i, c) * f.at(j, c);
    return out;
}

EquivariantTensor pool_1_to_0(const EquivariantTensor& f) {
    if (f.order() != 1) throw std::invalid_argument("pool_1_to_0: needs an order-1 input");
    EquivariantTensor out(f.n(), 0, f.channels());
    for (int i = 0; i < f.n(); ++i)
        for (int c = 0; c < f.channels(); ++c) out.at(c) += f.at(i, c);
    return out;
}

Matrix materialize_term(const BasisTerm& term, int n) {
    if (n < 1) throw std::invalid_argument("materialize_term: n must be positive");
    std::size_t rows = 1, cols = 1;
    for (int k = 0; k < term.order_out; ++k) rows *= static_cast<std::size_t>(n);
    for (int k = 0; k < term.order_in; ++k) cols *= static_cast<std::size_t>(n);
    Matrix M(static_cast<int>(rows), static_cast<int>(cols));

    std::vector<int> block_value(static_cast<std::size_t>(term.block_count));
    int out_idx[3], in_idx[3];
    for (std::size_t ro = 0; ro < rows; ++ro) {
        std::size_t e = ro;
        for (int k = term.order_out - 1; k >= 0; --k) {
            out_idx[k] = static_cast<int>(e % static_cast<std::size_t>(n));
            e /= static_cast<std::size_t>(n);
        }
        for (std::size_t col = 0; col < cols; ++col) {
            e = col;
            for (int k = term.order_in - 1; k >= 0; --k) {
                in_idx[k] = static_cast<int>(e % static_cast<std::size_t>(n));
                e /= static_cast<std::size_t>(n);
            }
            std::fill(block_value.begin(), block_value.end(), -1);
            bool ok = true;
            auto check = [&](int block, int v) {
                int& bv = block_value[static_cast<std::size_t>(block)];
                if (bv < 0) bv = v;
                else if (bv != v) ok = false;
            };
            for (std::size_t s = 0; s < term.out_blocks.size() && ok; ++s) check(term.out_blocks[s], out_idx[s]);
            for (std::size_t s = 0; s < term.in_blocks.size() && ok; ++s) check(term.in_blocks[s], in_idx[s]);
            if (ok) M(static_cast<int>(ro), static_cast<int>(col)) = 1.0;
        }
    }
    return M;
}

}  // namespace sneq
