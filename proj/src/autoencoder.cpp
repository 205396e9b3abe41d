#include "sneq/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "sneq/binary_io.hpp"
#include "sneq/graphs.hpp"
#include "sneq/rng.hpp"

namespace sneq {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kProbClamp = 1e-12;
constexpr std::uint64_t kInitTag = 0x1217;
constexpr std::uint64_t kNoiseTag = 0xE70C000000000000ULL;
constexpr std::uint64_t kDatasetTag = 0xDA7A000000000000ULL;

double stable_sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double softplus(double s) {
    return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

LayerOptions options_of(const AutoencoderConfig& c) { return LayerOptions{c.normalize_sums}; }

void require_finite(const EquivariantTensor& t, const char* what) {
    for (double v : t.raw())
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

EquivariantTensor channel_slice(const EquivariantTensor& t, int from, int count) {
    EquivariantTensor out(t.n(), t.order(), count);
    for (std::size_t e = 0; e < t.entry_count(); ++e)
        for (int c = 0; c < count; ++c) out.value(e, c) = t.value(e, from + c);
    return out;
}

EquivariantTensor pad_adjacency(const EquivariantTensor& a, int n_max) {
    if (a.n() == n_max) return a;
    EquivariantTensor out(n_max, 2, 1);
    for (int i = 0; i < a.n(); ++i)
        for (int j = 0; j < a.n(); ++j) out.at(i, j, 0) = a.at(i, j, 0);
    return out;
}

/// Layer shapes implied by the config, all weights zero.
WeightSet weight_shapes(const AutoencoderConfig& c) {
    WeightSet w;
    int cin = 1;
    for (int width : c.encoder_widths) {
        w.encoder.push_back(LayerWeights::zeros(LayerKind::second_to_second, cin, width, true));
        cin = width;
    }
    w.pool = LayerWeights::zeros(LayerKind::second_to_first, cin, 2 * c.latent_channels, true);
    cin = c.latent_channels;
    for (int width : c.decoder_widths) {
        w.decoder.push_back(LayerWeights::zeros(LayerKind::second_to_second, cin, width, true));
        cin = width;
    }
    w.decoder.push_back(LayerWeights::zeros(LayerKind::second_to_second, cin, 1, true));
    return w;
}

template <typename WeightSetT, typename PtrT>
std::vector<PtrT> collect_parameters(WeightSetT& w) {
    std::vector<PtrT> out;
    auto add_layer = [&out](auto& layer) {
        for (auto& mtx : layer.term_weights)
            for (auto& x : mtx.v) out.push_back(&x);
        for (auto& b : layer.bias) out.push_back(&b);
        for (auto& b : layer.diag_bias) out.push_back(&b);
    };
    for (auto& l : w.encoder) add_layer(l);
    add_layer(w.pool);
    for (auto& l : w.decoder) add_layer(l);
    return out;
}

struct LayerCache {
    EquivariantTensor input;
    EquivariantTensor pre;
};

struct ForwardPass {
    std::vector<LayerCache> enc;  // one per encoder layer, plus one for the pooling layer
    std::vector<LayerCache> dec;  // one per decoder layer, final included
    std::optional<EquivariantTensor> mean, logvar, z, sym;
    double min_relu = std::numeric_limits<double>::infinity();
};

void track_relu_min(const EquivariantTensor& pre, double* min_relu) {
    if (!min_relu) return;
    for (double v : pre.raw()) *min_relu = std::min(*min_relu, std::abs(v));
}

/// Encoder stack then pooling; returns the 2C-channel order-1 features.
/// caches (if given) receives {input, pre-activation} per layer, pooling last.
EquivariantTensor run_encoder(const Model& model, const EquivariantTensor& a,
                              std::vector<LayerCache>* caches, double* min_relu) {
    const LayerOptions opts = options_of(model.config);
    const Nonlinearity xi = model.config.hidden_activation;
    EquivariantTensor x = a;
    for (const auto& w : model.weights.encoder) {
        EquivariantTensor pre = apply_layer_linear(w, x, opts);
        if (xi == Nonlinearity::relu) track_relu_min(pre, min_relu);
        if (caches) caches->push_back({x, pre});
        for (double& v : pre.raw()) v = apply_nonlinearity(xi, v);
        x = std::move(pre);
    }
    EquivariantTensor h = apply_layer_linear(model.weights.pool, x, opts);
    if (caches) caches->push_back({std::move(x), h});
    return h;
}

/// Rank-one lift, decoder stack (hidden nonlinearity, final layer linear),
/// then symmetrization: returns the single-channel logit matrix.
EquivariantTensor run_decoder(const Model& model, const EquivariantTensor& z,
                              std::vector<LayerCache>* caches, double* min_relu) {
    const LayerOptions opts = options_of(model.config);
    const Nonlinearity xi = model.config.hidden_activation;
    EquivariantTensor y = lift_1_to_2(z);
    const auto& layers = model.weights.decoder;
    for (std::size_t idx = 0; idx < layers.size(); ++idx) {
        const bool last = idx + 1 == layers.size();
        EquivariantTensor pre = apply_layer_linear(layers[idx], y, opts);
        if (!last && xi == Nonlinearity::relu) track_relu_min(pre, min_relu);
        if (caches) caches->push_back({std::move(y), pre});
        if (!last)
            for (double& v : pre.raw()) v = apply_nonlinearity(xi, v);
        y = std::move(pre);
    }
    if (y.channels() != 1) throw std::logic_error("decoder must end in one logit channel");
    EquivariantTensor sym(y.n(), 2, 1);
    for (int i = 0; i < y.n(); ++i)
        for (int j = 0; j < y.n(); ++j) sym.at(i, j, 0) = 0.5 * (y.at(i, j, 0) + y.at(j, i, 0));
    return sym;
}

ForwardPass forward_graph(const Model& model, const EquivariantTensor& padded,
                          const EquivariantTensor* eps) {
    ForwardPass fp;
    const int latent = model.config.latent_channels;
    const EquivariantTensor h = run_encoder(model, padded, &fp.enc, &fp.min_relu);
    fp.mean = channel_slice(h, 0, latent);
    fp.logvar = channel_slice(h, latent, latent);
    EquivariantTensor z = *fp.mean;
    if (eps) {
        for (int i = 0; i < z.n(); ++i)
            for (int c = 0; c < latent; ++c)
                z.at(i, c) += std::exp(0.5 * fp.logvar->at(i, c)) * eps->at(i, c);
    }
    fp.z = z;
    fp.sym = run_decoder(model, z, &fp.dec, &fp.min_relu);
    return fp;
}

struct GraphTerms {
    double bce = 0.0;
    double kl = 0.0;
    double acc = 1.0;
};

/// Reconstruction loss from the logits, masked to the real (unpadded)
/// vertices; KL over every latent entry.  Gradient outputs are optional.
GraphTerms masked_terms(const ForwardPass& fp, const EquivariantTensor& target, int real_n,
                        double beta, EquivariantTensor* grad_sym, EquivariantTensor* grad_mean,
                        EquivariantTensor* grad_logvar) {
    GraphTerms out;
    const EquivariantTensor& sym = *fp.sym;
    long correct = 0, pairs = 0;
    for (int i = 0; i < real_n; ++i)
        for (int j = 0; j < real_n; ++j) {
            if (i == j) continue;
            const double s = sym.at(i, j, 0);
            const double t = target.at(i, j, 0);
            out.bce += softplus(s) - t * s;
            if ((s > 0.0) == (t > 0.5)) ++correct;
            ++pairs;
            if (grad_sym) grad_sym->at(i, j, 0) = stable_sigmoid(s) - t;
        }
    if (pairs > 0) out.acc = static_cast<double>(correct) / static_cast<double>(pairs);
    const EquivariantTensor& mean = *fp.mean;
    const EquivariantTensor& logvar = *fp.logvar;
    for (int i = 0; i < mean.n(); ++i)
        for (int c = 0; c < mean.channels(); ++c) {
            const double m = mean.at(i, c);
            const double lv = logvar.at(i, c);
            out.kl += 0.5 * (std::exp(lv) + m * m - 1.0 - lv);
            if (grad_mean) grad_mean->at(i, c) = beta * m;
            if (grad_logvar) grad_logvar->at(i, c) = beta * 0.5 * (std::exp(lv) - 1.0);
        }
    return out;
}

/// Parameter gradients of one affine layer application plus (optionally) the
/// gradient with respect to its input.  grad_pre is dLoss/d(affine output).
void affine_backward(const LayerWeights& w, const EquivariantTensor& input,
                     const EquivariantTensor& grad_pre, const LayerOptions& opts,
                     LayerWeights& gw, EquivariantTensor* grad_input) {
    if (w.kind == LayerKind::second_to_second_zero_diag)
        throw std::logic_error("affine_backward: zero-diagonal layers are not differentiated here");
    const auto& terms = basis_terms(w.kind);
    const int n = input.n();

    if (!w.bias.empty())
        for (std::size_t e = 0; e < grad_pre.entry_count(); ++e)
            for (int co = 0; co < w.channels_out; ++co)
                gw.bias[static_cast<std::size_t>(co)] += grad_pre.value(e, co);
    if (!w.diag_bias.empty())
        for (int i = 0; i < n; ++i)
            for (int co = 0; co < w.channels_out; ++co)
                gw.diag_bias[static_cast<std::size_t>(co)] += grad_pre.at(i, i, co);

    for (std::size_t t = 0; t < terms.size(); ++t) {
        const double scale = term_scale(terms[t], n, opts);
        const EquivariantTensor feat = apply_term(terms[t], input, scale);
        Matrix& gm = gw.term_weights[t];
        for (std::size_t e = 0; e < grad_pre.entry_count(); ++e)
            for (int ci = 0; ci < w.channels_in; ++ci) {
                const double f = feat.value(e, ci);
                if (f == 0.0) continue;
                for (int co = 0; co < w.channels_out; ++co) gm(ci, co) += f * grad_pre.value(e, co);
            }
        if (grad_input) {
            EquivariantTensor mixed(grad_pre.n(), grad_pre.order(), w.channels_in);
            const Matrix& W = w.term_weights[t];
            for (std::size_t e = 0; e < grad_pre.entry_count(); ++e)
                for (int ci = 0; ci < w.channels_in; ++ci) {
                    double acc = 0.0;
                    for (int co = 0; co < w.channels_out; ++co)
                        acc += grad_pre.value(e, co) * W(ci, co);
                    mixed.value(e, ci) = acc;
                }
            const EquivariantTensor gi = apply_term(terms[t].adjoint(), mixed, scale);
            for (std::size_t e = 0; e < grad_input->entry_count(); ++e)
                for (int ci = 0; ci < w.channels_in; ++ci)
                    grad_input->value(e, ci) += gi.value(e, ci);
        }
    }
}

void backward_graph(const Model& model, const ForwardPass& fp, const EquivariantTensor* eps,
                    const EquivariantTensor& grad_sym, const EquivariantTensor& grad_mean_direct,
                    const EquivariantTensor& grad_logvar_direct, WeightSet& gw) {
    const LayerOptions opts = options_of(model.config);
    const Nonlinearity xi = model.config.hidden_activation;
    const int n = grad_sym.n();
    const int latent = model.config.latent_channels;

    EquivariantTensor g(n, 2, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g.at(i, j, 0) = 0.5 * (grad_sym.at(i, j, 0) + grad_sym.at(j, i, 0));

    const auto& dec = model.weights.decoder;
    for (std::size_t r = dec.size(); r-- > 0;) {
        const LayerCache& cache = fp.dec[r];
        EquivariantTensor grad_pre = g;
        if (r + 1 != dec.size())
            for (std::size_t v = 0; v < grad_pre.raw().size(); ++v)
                grad_pre.raw()[v] *= nonlinearity_derivative(xi, cache.pre.raw()[v]);
        EquivariantTensor grad_input(cache.input.n(), cache.input.order(), cache.input.channels());
        affine_backward(dec[r], cache.input, grad_pre, opts, gw.decoder[r], &grad_input);
        g = std::move(grad_input);
    }

    // g is now the gradient with respect to the rank-one lift of z.
    const EquivariantTensor& z = *fp.z;
    EquivariantTensor dz(n, 1, latent);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < latent; ++c) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += (g.at(i, j, c) + g.at(j, i, c)) * z.at(j, c);
            dz.at(i, c) = acc;
        }

    EquivariantTensor dh(n, 1, 2 * latent);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < latent; ++c) {
            double dlv = grad_logvar_direct.at(i, c);
            if (eps) dlv += dz.at(i, c) * 0.5 * std::exp(0.5 * fp.logvar->at(i, c)) * eps->at(i, c);
            dh.at(i, c) = dz.at(i, c) + grad_mean_direct.at(i, c);
            dh.at(i, latent + c) = dlv;
        }

    const LayerCache& pool_cache = fp.enc.back();
    const bool has_encoder = !model.weights.encoder.empty();
    EquivariantTensor g2(pool_cache.input.n(), 2, pool_cache.input.channels());
    affine_backward(model.weights.pool, pool_cache.input, dh, opts, gw.pool,
                    has_encoder ? &g2 : nullptr);

    const auto& enc = model.weights.encoder;
    for (std::size_t r = enc.size(); r-- > 0;) {
        const LayerCache& cache = fp.enc[r];
        EquivariantTensor grad_pre = g2;
        for (std::size_t v = 0; v < grad_pre.raw().size(); ++v)
            grad_pre.raw()[v] *= nonlinearity_derivative(xi, cache.pre.raw()[v]);
        if (r == 0) {
            affine_backward(enc[r], cache.input, grad_pre, opts, gw.encoder[r], nullptr);
        } else {
            EquivariantTensor grad_input(cache.input.n(), 2, cache.input.channels());
            affine_backward(enc[r], cache.input, grad_pre, opts, gw.encoder[r], &grad_input);
            g2 = std::move(grad_input);
        }
    }
}

int thread_count_from_env() {
    const char* s = std::getenv("SNEQ_THREADS");
    if (!s || !*s) return 1;
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0' || v < 1) return 1;
    return static_cast<int>(std::min(v, 64L));
}

void check_batch(const Model& model, const std::vector<EquivariantTensor>& batch,
                 const std::vector<EquivariantTensor>& epsilons) {
    model.config.validate();
    if (batch.empty()) throw std::invalid_argument("autoencoder: batch must not be empty");
    for (const auto& graph : batch) {
        require_adjacency(graph, "autoencoder batch graph");
        if (graph.n() > model.config.n_max)
            throw std::invalid_argument("autoencoder: graph larger than n_max");
    }
    if (!epsilons.empty()) {
        if (epsilons.size() != batch.size())
            throw std::invalid_argument("autoencoder: need one noise tensor per graph");
        for (const auto& e : epsilons) {
            if (e.order() != 1 || e.channels() != model.config.latent_channels ||
                e.n() != model.config.n_max)
                throw std::invalid_argument("autoencoder: noise tensor shape mismatch");
            require_finite(e, "noise tensor");
        }
    }
}

struct PerGraph {
    WeightSet gw;
    GraphTerms terms;
};

PerGraph graph_gradients(const Model& model, const EquivariantTensor& graph,
                         const EquivariantTensor* eps) {
    const int n_max = model.config.n_max;
    const int latent = model.config.latent_channels;
    const EquivariantTensor padded = pad_adjacency(graph, n_max);
    const ForwardPass fp = forward_graph(model, padded, eps);
    EquivariantTensor gs(n_max, 2, 1);
    EquivariantTensor gm(n_max, 1, latent);
    EquivariantTensor gl(n_max, 1, latent);
    PerGraph out{weight_shapes(model.config),
                 masked_terms(fp, padded, graph.n(), model.config.beta, &gs, &gm, &gl)};
    backward_graph(model, fp, eps, gs, gm, gl, out.gw);
    return out;
}

std::vector<EquivariantTensor> epoch_noise(const AutoencoderConfig& c, std::size_t batch_size,
                                           int epoch) {
    std::vector<EquivariantTensor> eps;
    if (c.beta <= 0.0) return eps;
    const std::uint64_t epoch_seed =
        derive_seed(c.seed, kNoiseTag + static_cast<std::uint64_t>(epoch));
    eps.reserve(batch_size);
    for (std::size_t g = 0; g < batch_size; ++g) {
        RandomStream rs(derive_seed(epoch_seed, g));
        EquivariantTensor e(c.n_max, 1, c.latent_channels);
        for (int i = 0; i < c.n_max; ++i)
            for (int ch = 0; ch < c.latent_channels; ++ch) e.at(i, ch) = rs.normal();
        eps.push_back(std::move(e));
    }
    return eps;
}

}  // namespace

void AutoencoderConfig::validate() const {
    if (n_max < 1) throw std::invalid_argument("config: n_max must be positive");
    for (int w : encoder_widths)
        if (w < 1) throw std::invalid_argument("config: encoder widths must be positive");
    for (int w : decoder_widths)
        if (w < 1) throw std::invalid_argument("config: decoder widths must be positive");
    if (latent_channels < 1) throw std::invalid_argument("config: latent_channels must be positive");
    if (!std::isfinite(beta) || beta < 0.0)
        throw std::invalid_argument("config: beta must be finite and non-negative");
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
        throw std::invalid_argument("config: learning_rate must be positive");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be non-negative");
    if (batch_size < 0) throw std::invalid_argument("config: batch_size must be non-negative");
    if (!std::isfinite(early_stop_accuracy) || early_stop_accuracy < 0.0 ||
        early_stop_accuracy > 1.0)
        throw std::invalid_argument("config: early_stop_accuracy must lie in [0, 1]");
    if (dataset_graphs < 0) throw std::invalid_argument("config: dataset_graphs must be non-negative");
    if (!std::isfinite(dataset_edge_prob) || dataset_edge_prob < 0.0 || dataset_edge_prob > 1.0)
        throw std::invalid_argument("config: dataset_edge_prob must lie in [0, 1]");
    switch (hidden_activation) {
        case Nonlinearity::identity:
        case Nonlinearity::relu:
        case Nonlinearity::sigmoid:
        case Nonlinearity::tanh: break;
        default: throw std::invalid_argument("config: unknown hidden activation");
    }
}

std::vector<double*> parameter_pointers(WeightSet& w) {
    return collect_parameters<WeightSet, double*>(w);
}

std::vector<const double*> parameter_pointers(const WeightSet& w) {
    return collect_parameters<const WeightSet, const double*>(w);
}

namespace {

/// Variance the basis terms of a layer actually transfer at size n, summed
/// over the independent (stratum-0) terms.  A term with k summation blocks
/// scales variance by n^-k under normalized sums and n^k otherwise; counting
/// raw terms instead overstates fan-in severalfold and starves the latent.
double effective_fan_terms(LayerKind kind, int n, bool normalized) {
    double s = 0.0;
    for (const BasisTerm& t : basis_terms(kind))
        if (t.stratum() == 0)
            s += std::pow(static_cast<double>(n),
                          (normalized ? -1.0 : 1.0) * t.sum_block_count());
    return s;
}

/// Mirrored ("looks-linear") fill: when a channel dimension is paired, its
/// two halves carry negated copies of one random draw, so with ReLU hidden
/// units relu(x) - relu(-x) reproduces x and the stack starts exactly linear.
/// Unpaired dimensions degenerate to a plain uniform draw with the same limit.
void fill_layer_mirrored(LayerWeights& layer, int n, bool normalized, bool in_paired,
                         bool out_paired, double gain, RandomStream& rs) {
    const int ci = in_paired ? layer.channels_in / 2 : layer.channels_in;
    const int co = out_paired ? layer.channels_out / 2 : layer.channels_out;
    const double s = effective_fan_terms(layer.kind, n, normalized);
    const double limit = gain * std::sqrt(6.0 / (s * (ci + co)));
    for (Matrix& m : layer.term_weights) {
        Matrix r(ci, co);
        for (double& x : r.v) x = rs.uniform(-limit, limit);
        for (int i = 0; i < layer.channels_in; ++i)
            for (int j = 0; j < layer.channels_out; ++j) {
                double sign = 1.0;
                if (in_paired && i >= ci) sign = -sign;
                if (out_paired && j >= co) sign = -sign;
                m(i, j) = sign * r(i % ci, j % co);
            }
    }
}

bool mirrorable(int channels) { return channels > 1 && channels % 2 == 0; }

}  // namespace

WeightSet initial_weights(const AutoencoderConfig& config) {
    config.validate();
    WeightSet w = weight_shapes(config);
    RandomStream rs(derive_seed(config.seed, kInitTag));
    const int n = config.n_max;
    const bool norm = config.normalize_sums;
    double g_enc = 1.0, g_pool = 0.5, g_dec = 1.0, g_fin = 0.25;
    if (const char* env = std::getenv("SNEQ_INIT_GAINS"))  // calibration hook
        std::sscanf(env, "%lf,%lf,%lf,%lf", &g_enc, &g_pool, &g_dec, &g_fin);
    // Adjacency input and latent sample are unpaired; every even hidden width
    // is mirrored.  The pooling and final layers feed the latent and the edge
    // logits, where smaller starting scales keep early predictions responsive.
    bool prev = false;
    for (auto& layer : w.encoder) {
        const bool out = mirrorable(layer.channels_out);
        fill_layer_mirrored(layer, n, norm, prev, out, g_enc, rs);
        prev = out;
    }
    fill_layer_mirrored(w.pool, n, norm, prev, false, g_pool, rs);
    prev = false;
    for (std::size_t i = 0; i < w.decoder.size(); ++i) {
        const bool last = i + 1 == w.decoder.size();
        const bool out = !last && mirrorable(w.decoder[i].channels_out);
        fill_layer_mirrored(w.decoder[i], n, norm, prev, out, last ? g_fin : g_dec, rs);
        prev = out;
    }
    return w;
}

Model initial_model(const AutoencoderConfig& config) {
    return Model{config, initial_weights(config)};
}

Latent encode(const Model& model, const EquivariantTensor& adjacency) {
    model.config.validate();
    if (adjacency.order() != 2 || adjacency.channels() != 1)
        throw std::invalid_argument("encode: expected a single-channel order-2 tensor");
    if (adjacency.n() > model.config.n_max)
        throw std::invalid_argument("encode: graph larger than n_max");
    require_finite(adjacency, "encode input");
    for (int i = 0; i < adjacency.n(); ++i)
        for (int j = i + 1; j < adjacency.n(); ++j)
            if (std::abs(adjacency.at(i, j, 0) - adjacency.at(j, i, 0)) > 1e-9)
                throw std::invalid_argument("encode: adjacency must be symmetric");
    const EquivariantTensor h = run_encoder(model, adjacency, nullptr, nullptr);
    const int latent = model.config.latent_channels;
    return Latent{channel_slice(h, 0, latent), channel_slice(h, latent, latent)};
}

EquivariantTensor decode(const Model& model, const EquivariantTensor& z) {
    model.config.validate();
    if (z.order() != 1 || z.channels() != model.config.latent_channels)
        throw std::invalid_argument("decode: latent shape mismatch");
    if (z.n() > model.config.n_max)
        throw std::invalid_argument("decode: latent larger than n_max");
    require_finite(z, "decode input");
    EquivariantTensor out = run_decoder(model, z, nullptr, nullptr);
    for (double& v : out.raw()) v = stable_sigmoid(v);
    return out;
}

EquivariantTensor reconstruct(const Model& model, const EquivariantTensor& adjacency) {
    return decode(model, encode(model, adjacency).mean);
}

LossReport loss(const EquivariantTensor& pred, const EquivariantTensor& target,
                const EquivariantTensor& mean, const EquivariantTensor& logvar, double beta) {
    if (pred.order() != 2 || pred.channels() != 1)
        throw std::invalid_argument("loss: pred must be a single-channel order-2 tensor");
    if (target.order() != 2 || target.channels() != 1 || target.n() != pred.n())
        throw std::invalid_argument("loss: target shape mismatch");
    if (mean.order() != 1 || logvar.order() != 1 || mean.n() != logvar.n() ||
        mean.channels() != logvar.channels())
        throw std::invalid_argument("loss: latent statistics shape mismatch");
    if (!std::isfinite(beta) || beta < 0.0)
        throw std::invalid_argument("loss: beta must be finite and non-negative");
    require_finite(pred, "loss pred");
    require_finite(target, "loss target");
    require_finite(mean, "loss mean");
    require_finite(logvar, "loss logvar");

    LossReport rep;
    long correct = 0, pairs = 0;
    for (int i = 0; i < pred.n(); ++i)
        for (int j = 0; j < pred.n(); ++j) {
            if (i == j) continue;
            const double p = std::clamp(pred.at(i, j, 0), kProbClamp, 1.0 - kProbClamp);
            const double t = target.at(i, j, 0);
            rep.reconstruction -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
            if ((p > 0.5) == (t > 0.5)) ++correct;
            ++pairs;
        }
    rep.edge_accuracy = pairs > 0 ? static_cast<double>(correct) / static_cast<double>(pairs) : 1.0;
    for (int i = 0; i < mean.n(); ++i)
        for (int c = 0; c < mean.channels(); ++c) {
            const double m = mean.at(i, c);
            const double lv = logvar.at(i, c);
            rep.kl += 0.5 * (std::exp(lv) + m * m - 1.0 - lv);
        }
    rep.total = rep.reconstruction + beta * rep.kl;
    return rep;
}

GradientReport gradients(const Model& model, const std::vector<EquivariantTensor>& batch,
                         const std::vector<EquivariantTensor>& epsilons) {
    check_batch(model, batch, epsilons);
    const std::size_t B = batch.size();
    std::vector<std::optional<PerGraph>> results(B);

    auto compute = [&](std::size_t g) {
        const EquivariantTensor* eps = epsilons.empty() ? nullptr : &epsilons[g];
        results[g] = graph_gradients(model, batch[g], eps);
    };
    const int workers = std::min<int>(thread_count_from_env(), static_cast<int>(B));
    if (workers <= 1) {
        for (std::size_t g = 0; g < B; ++g) compute(g);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int k = 0; k < workers; ++k)
            pool.emplace_back([&, k] {
                for (std::size_t g = static_cast<std::size_t>(k); g < B;
                     g += static_cast<std::size_t>(workers))
                    compute(g);
            });
        for (auto& th : pool) th.join();
    }

    GradientReport out{weight_shapes(model.config), {}};
    const auto total = parameter_pointers(out.gradients);
    const double inv = 1.0 / static_cast<double>(B);
    for (std::size_t g = 0; g < B; ++g) {
        const PerGraph& pg = *results[g];
        const auto part = parameter_pointers(pg.gw);
        for (std::size_t p = 0; p < total.size(); ++p) *total[p] += *part[p];
        out.report.reconstruction += pg.terms.bce;
        out.report.kl += pg.terms.kl;
        out.report.edge_accuracy += pg.terms.acc;
    }
    for (double* p : total) *p *= inv;
    out.report.reconstruction *= inv;
    out.report.kl *= inv;
    out.report.edge_accuracy *= inv;
    out.report.total = out.report.reconstruction + model.config.beta * out.report.kl;
    return out;
}

LossReport evaluate(const Model& model, const std::vector<EquivariantTensor>& batch,
                    const std::vector<EquivariantTensor>& epsilons) {
    check_batch(model, batch, epsilons);
    LossReport rep;
    for (std::size_t g = 0; g < batch.size(); ++g) {
        const EquivariantTensor* eps = epsilons.empty() ? nullptr : &epsilons[g];
        const EquivariantTensor padded = pad_adjacency(batch[g], model.config.n_max);
        const ForwardPass fp = forward_graph(model, padded, eps);
        const GraphTerms t = masked_terms(fp, padded, batch[g].n(), model.config.beta, nullptr,
                                          nullptr, nullptr);
        rep.reconstruction += t.bce;
        rep.kl += t.kl;
        rep.edge_accuracy += t.acc;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    rep.reconstruction *= inv;
    rep.kl *= inv;
    rep.edge_accuracy *= inv;
    rep.total = rep.reconstruction + model.config.beta * rep.kl;
    return rep;
}

double min_hidden_preactivation(const Model& model, const std::vector<EquivariantTensor>& batch,
                                const std::vector<EquivariantTensor>& epsilons) {
    check_batch(model, batch, epsilons);
    double out = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < batch.size(); ++g) {
        const EquivariantTensor* eps = epsilons.empty() ? nullptr : &epsilons[g];
        const EquivariantTensor padded = pad_adjacency(batch[g], model.config.n_max);
        out = std::min(out, forward_graph(model, padded, eps).min_relu);
    }
    return out;
}

TrainResult train(const AutoencoderConfig& config, const std::vector<EquivariantTensor>& dataset) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset must not be empty");

    TrainResult result{initial_model(config), {}};
    const auto params = parameter_pointers(result.model.weights);
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    int steps = 0;
    const std::size_t chunk =
        config.batch_size > 0 && static_cast<std::size_t>(config.batch_size) < dataset.size()
            ? static_cast<std::size_t>(config.batch_size)
            : dataset.size();

    const auto require_finite_loss = [](const LossReport& r, int epoch) {
        if (std::isfinite(r.total)) return;
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ": loss = " << r.total
            << " (reconstruction " << r.reconstruction << ", kl " << r.kl << ")";
        throw std::runtime_error(msg.str());
    };
    const auto adam_step = [&](const GradientReport& gr) {
        const auto grads = parameter_pointers(gr.gradients);
        ++steps;
        const double c1 = 1.0 - std::pow(kAdamBeta1, steps);
        const double c2 = 1.0 - std::pow(kAdamBeta2, steps);
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double g = *grads[p];
            m[p] = kAdamBeta1 * m[p] + (1.0 - kAdamBeta1) * g;
            v[p] = kAdamBeta2 * v[p] + (1.0 - kAdamBeta2) * g * g;
            *params[p] -= config.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + kAdamEps);
        }
    };
    const auto should_stop = [&](const LossReport& r) {
        return config.early_stop_accuracy > 0.0 && r.edge_accuracy >= config.early_stop_accuracy;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<EquivariantTensor> eps = epoch_noise(config, dataset.size(), epoch);
        if (chunk == dataset.size()) {
            // Whole-dataset step.  The log records the pre-step evaluation, so
            // an early stop leaves exactly the evaluated weights in place.
            const GradientReport gr = gradients(result.model, dataset, eps);
            require_finite_loss(gr.report, epoch);
            result.log.push_back(gr.report);
            if (should_stop(gr.report)) break;
            adam_step(gr);
        } else {
            // One optimizer step per chunk, in dataset order, then a full
            // evaluation for the log so the entry matches the stored weights.
            for (std::size_t start = 0; start < dataset.size(); start += chunk) {
                const auto first = static_cast<std::ptrdiff_t>(start);
                const auto last = static_cast<std::ptrdiff_t>(
                    start + std::min(chunk, dataset.size() - start));
                const std::vector<EquivariantTensor> part(dataset.begin() + first,
                                                          dataset.begin() + last);
                const std::vector<EquivariantTensor> part_eps =
                    eps.empty() ? eps
                                : std::vector<EquivariantTensor>(eps.begin() + first,
                                                                 eps.begin() + last);
                const GradientReport gr = gradients(result.model, part, part_eps);
                require_finite_loss(gr.report, epoch);
                adam_step(gr);
            }
            const LossReport post = evaluate(result.model, dataset, eps);
            require_finite_loss(post, epoch);
            result.log.push_back(post);
            if (should_stop(post)) break;
        }
    }
    return result;
}

std::vector<EquivariantTensor> dataset_from_config(const AutoencoderConfig& config) {
    config.validate();
    std::vector<EquivariantTensor> data;
    data.reserve(static_cast<std::size_t>(config.dataset_graphs));
    for (int g = 0; g < config.dataset_graphs; ++g)
        data.push_back(random_graph(config.n_max, config.dataset_edge_prob,
                                    derive_seed(config.seed, kDatasetTag + static_cast<std::uint64_t>(g))));
    return data;
}

void write_checkpoint(const Model& model, std::ostream& out) {
    model.config.validate();
    const AutoencoderConfig& c = model.config;
    io::write_magic(out, "SNVA");
    io::write_u32(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(c.n_max));
    io::write_u32(out, static_cast<std::uint32_t>(c.encoder_widths.size()));
    for (int w : c.encoder_widths) io::write_u32(out, static_cast<std::uint32_t>(w));
    io::write_u32(out, static_cast<std::uint32_t>(c.decoder_widths.size()));
    for (int w : c.decoder_widths) io::write_u32(out, static_cast<std::uint32_t>(w));
    io::write_u32(out, static_cast<std::uint32_t>(c.latent_channels));
    io::write_f64(out, c.beta);
    io::write_u32(out, static_cast<std::uint32_t>(c.hidden_activation));
    io::write_f64(out, c.learning_rate);
    io::write_u32(out, static_cast<std::uint32_t>(c.epochs));
    io::write_u32(out, static_cast<std::uint32_t>(c.batch_size));
    io::write_u64(out, c.seed);
    io::write_u32(out, c.normalize_sums ? 1 : 0);
    io::write_f64(out, c.early_stop_accuracy);
    io::write_u32(out, static_cast<std::uint32_t>(c.dataset_graphs));
    io::write_f64(out, c.dataset_edge_prob);
    io::write_u32(out, 1);  // optimizer family tag
    const auto ptrs = parameter_pointers(model.weights);
    io::write_u32(out, static_cast<std::uint32_t>(ptrs.size()));
    for (const double* p : ptrs) io::write_f64(out, *p);
    if (!out) throw std::runtime_error("checkpoint write failed");
}

Model read_checkpoint(std::istream& in) {
    io::expect_magic(in, "SNVA");
    if (io::read_u32(in) != 1) throw std::runtime_error("checkpoint: unsupported version");
    AutoencoderConfig c;
    c.n_max = static_cast<int>(io::read_u32(in));
    c.encoder_widths.assign(io::read_u32(in), 0);
    for (int& w : c.encoder_widths) w = static_cast<int>(io::read_u32(in));
    c.decoder_widths.assign(io::read_u32(in), 0);
    for (int& w : c.decoder_widths) w = static_cast<int>(io::read_u32(in));
    c.latent_channels = static_cast<int>(io::read_u32(in));
    c.beta = io::read_f64(in);
    const std::uint32_t act = io::read_u32(in);
    if (act > 3) throw std::runtime_error("checkpoint: unknown activation");
    c.hidden_activation = static_cast<Nonlinearity>(act);
    c.learning_rate = io::read_f64(in);
    c.epochs = static_cast<int>(io::read_u32(in));
    c.batch_size = static_cast<int>(io::read_u32(in));
    c.seed = io::read_u64(in);
    c.normalize_sums = io::read_u32(in) != 0;
    c.early_stop_accuracy = io::read_f64(in);
    c.dataset_graphs = static_cast<int>(io::read_u32(in));
    c.dataset_edge_prob = io::read_f64(in);
    c.validate();
    if (io::read_u32(in) != 1) throw std::runtime_error("checkpoint: unknown optimizer tag");
    Model model{c, weight_shapes(c)};
    const auto ptrs = parameter_pointers(model.weights);
    if (io::read_u32(in) != ptrs.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (double* p : ptrs) *p = io::read_f64(in);
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
    write_checkpoint(model, os);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint file: " + path);
    Model model = read_checkpoint(is);
    is.peek();
    if (!is.eof()) throw std::runtime_error("checkpoint has trailing bytes: " + path);
    return model;
}

}  // namespace sneq
