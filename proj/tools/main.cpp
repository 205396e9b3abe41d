// sneq — command-line driver: layer inspection, verification, and the
// desk-scale graph autoencoder experiments.  Machine-readable output goes to
// stdout, diagnostics to stderr.  Exit codes: 0 success, 1 verification or
// runtime failure, 2 usage error.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sneq/autoencoder.hpp"
#include "sneq/compose.hpp"
#include "sneq/graphs.hpp"
#include "sneq/layers.hpp"
#include "sneq/oracle.hpp"
#include "sneq/partitions.hpp"
#include "sneq/rng.hpp"
#include "sneq/tensor.hpp"

namespace {

using namespace sneq;

// Irrep type of one side of a layer, evaluated in the stable regime.  The
// cubic action's type is the sum of its stratum types.
TypeVector side_type(int order, bool zero_diagonal, int n) {
    switch (order) {
        case 1:
            return action_type({n, ActionVariant::order1});
        case 2:
            return action_type({n, zero_diagonal ? ActionVariant::order2_zero_diag
                                                 : ActionVariant::order2_full});
        case 3: {
            TypeVector t = action_type({n, ActionVariant::order3_distinct});
            t = t + action_type({n, ActionVariant::order3_two_equal_12});
            t = t + action_type({n, ActionVariant::order3_two_equal_13});
            t = t + action_type({n, ActionVariant::order3_two_equal_23});
            t = t + action_type({n, ActionVariant::order3_all_equal});
            return t;
        }
        default:
            throw std::invalid_argument("order must be 1, 2, or 3");
    }
}

int run_count_params(int order_in, int order_out, bool zero_diagonal) {
    const int n = 2 * std::max({order_in, order_out, 1});
    const TypeVector in = side_type(order_in, zero_diagonal, n);
    const TypeVector out = side_type(order_out, zero_diagonal, n);
    std::printf("%" PRId64 "\n", param_count(in, out));
    return 0;
}

int run_describe_layer(int order_in, int order_out, bool zero_diagonal) {
    const LayerKind kind = layer_kind(order_in, order_out, !zero_diagonal);
    for (const std::string& line : describe_layer(kind)) std::printf("%s\n", line.c_str());
    return 0;
}

const char* verdict_token(SpanVerdict::Status s) {
    switch (s) {
        case SpanVerdict::Status::exact:
            return "exact";
        case SpanVerdict::Status::deficient:
            return "deficient";
        default:
            return "excess";
    }
}

int stable_n(LayerKind kind) {
    const LayerShape shape = layer_shape(kind);
    return 2 * std::max(shape.order_in, shape.order_out);
}

int run_verify(int order, bool zero_diagonal, int n, bool exact_arithmetic) {
    std::vector<std::pair<LayerKind, std::vector<int>>> jobs;
    const auto add = [&](LayerKind kind, int lo, int hi) {
        std::vector<int> ns;
        if (n > 0)
            ns.push_back(n);
        else
            for (int k = lo; k <= hi; ++k) ns.push_back(k);
        jobs.emplace_back(kind, std::move(ns));
    };
    if (order == 0 || order == 1) add(LayerKind::first_to_first, 1, 8);
    if (order == 0) {
        add(LayerKind::second_to_second, 2, 6);
        add(LayerKind::second_to_second_zero_diag, 2, 6);
        add(LayerKind::second_to_first, 2, 6);
    } else if (order == 2) {
        if (zero_diagonal) {
            add(LayerKind::second_to_second_zero_diag, 2, 6);
        } else {
            add(LayerKind::second_to_second, 2, 6);
            add(LayerKind::second_to_first, 2, 6);
        }
    }
    if (order == 0 || order == 3) add(LayerKind::third_to_third, 3, 4);

    std::printf("kind,n,terms,rank,dim,verdict\n");
    int failures = 0;
    for (const auto& [kind, ns] : jobs) {
        for (const int k : ns) {
            const SpanVerdict v = basis_spans_commutant(kind, k, exact_arithmetic);
            std::printf("%s,%d,%d,%d,%d,%s\n", layer_name(kind).c_str(), k, v.term_count, v.rank,
                        v.dim, verdict_token(v.status));
            const bool stable = k >= stable_n(kind);
            if (v.status == SpanVerdict::Status::deficient ||
                (stable && v.status != SpanVerdict::Status::exact)) {
                ++failures;
                std::fprintf(stderr, "verify: %s at n=%d is %s (rank %d, dim %d)\n",
                             layer_name(kind).c_str(), k, verdict_token(v.status), v.rank, v.dim);
            }
        }
    }
    return failures == 0 ? 0 : 1;
}

LayerWeights random_weights(LayerKind kind, int channels, RandomStream& rs) {
    LayerWeights w = LayerWeights::zeros(kind, channels, channels, true);
    for (Matrix& tm : w.term_weights)
        for (double& x : tm.v) x = rs.uniform(-1.0, 1.0);
    for (double& b : w.bias) b = rs.uniform(-1.0, 1.0);
    for (double& b : w.diag_bias) b = rs.uniform(-1.0, 1.0);
    return w;
}

int run_equivariance_test(int trials, std::uint64_t seed, double tolerance) {
    const std::vector<std::pair<LayerKind, std::pair<int, int>>> grid = {
        {LayerKind::first_to_first, {2, 6}},
        {LayerKind::second_to_second, {2, 6}},
        {LayerKind::second_to_second_zero_diag, {2, 6}},
        {LayerKind::second_to_first, {2, 6}},
        {LayerKind::third_to_third, {2, 6}},
    };
    std::printf("kind,n,trials,max_error\n");
    double global = 0.0;
    std::uint64_t counter = 0;
    for (const auto& [kind, range] : grid) {
        const int order_in = layer_shape(kind).order_in;
        for (int n = range.first; n <= range.second; ++n) {
            double worst = 0.0;
            for (int t = 0; t < trials; ++t) {
                RandomStream rs(derive_seed(seed, counter++));
                const LayerWeights w = random_weights(kind, 2, rs);
                const EquivariantTensor f =
                    random_tensor(n, order_in, 2, derive_seed(seed, counter++));
                const Permutation sigma = random_permutation(n, derive_seed(seed, counter++));
                const EquivariantTensor lhs = apply_layer(w, Nonlinearity::tanh, act(sigma, f));
                const EquivariantTensor rhs = act(sigma, apply_layer(w, Nonlinearity::tanh, f));
                for (std::size_t e = 0; e < lhs.entry_count(); ++e)
                    for (int c = 0; c < lhs.channels(); ++c)
                        worst = std::max(worst, std::abs(lhs.value(e, c) - rhs.value(e, c)));
            }
            std::printf("%s,%d,%d,%.3e\n", layer_name(kind).c_str(), n, trials, worst);
            global = std::max(global, worst);
        }
    }
    if (global > tolerance) {
        std::fprintf(stderr, "equivariance-test: max error %.3e exceeds tolerance %.3e\n", global,
                     tolerance);
        return 1;
    }
    return 0;
}

LayerWeights random_weights_for_compose(int channels_in, int channels_out, RandomStream& rs) {
    LayerWeights w = LayerWeights::zeros(LayerKind::first_to_first, channels_in, channels_out, true);
    for (Matrix& tm : w.term_weights)
        for (double& x : tm.v) x = rs.uniform(-1.0, 1.0);
    for (double& b : w.bias) b = rs.uniform(-1.0, 1.0);
    return w;
}

int run_compose_demo() {
    // Path on 3 vertices, one message-passing round with out_i = f_i + 10*sum(f)
    // over each neighborhood; all incoming activations are the scalar 1.
    EquivariantTensor path(3, 2, 1);
    path.at(0, 1, 0) = path.at(1, 0, 0) = 1.0;
    path.at(1, 2, 0) = path.at(2, 1, 0) = 1.0;
    LayerWeights hand = LayerWeights::zeros(LayerKind::first_to_first, 1, 1, false);
    hand.term_weights[0](0, 0) = 1.0;
    hand.term_weights[1](0, 0) = 10.0;
    const Matrix feats =
        readout_features(neighborhood_network(path, {hand}, Nonlinearity::identity));
    std::printf("demo,vertex,f0\n");
    for (int v = 0; v < feats.rows; ++v) std::printf("path3,%d,%.6f\n", v + 1, feats(v, 0));

    // Two tanh rounds with random weights on a random 6-vertex graph.
    const EquivariantTensor adj = random_graph(6, 0.5, 7);
    RandomStream rs1(derive_seed(7, 1)), rs2(derive_seed(7, 2));
    const std::vector<LayerWeights> ws = {
        random_weights_for_compose(1, 2, rs1),
        random_weights_for_compose(2, 2, rs2),
    };
    const auto acts = neighborhood_network(adj, ws, Nonlinearity::tanh);
    const Matrix out = readout_features(acts);
    std::printf("demo,vertex,f0,f1\n");
    for (int v = 0; v < out.rows; ++v)
        std::printf("random6,%d,%.6f,%.6f\n", v + 1, out(v, 0), out(v, 1));

    // Covariance: relabeling the vertices permutes the readout rows.
    const Permutation sigma = random_permutation(6, derive_seed(7, 3));
    const Matrix moved = readout_features(neighborhood_network(act(sigma, adj), ws, Nonlinearity::tanh));
    double err = 0.0;
    for (int v = 0; v < out.rows; ++v)
        for (int c = 0; c < out.cols; ++c)
            err = std::max(err, std::abs(moved(sigma.image(v), c) - out(v, c)));
    std::printf("covariance_max_error,%.3e\n", err);
    return err <= 1e-10 ? 0 : 1;
}

AutoencoderConfig config_from_flags(int n, int graphs, double edge_prob, int epochs,
                                    std::uint64_t seed, double beta, int latent, int layers,
                                    int width, double lr, double early_stop) {
    AutoencoderConfig c;
    c.n_max = n;
    c.encoder_widths.assign(static_cast<std::size_t>(layers), width);
    c.decoder_widths.assign(static_cast<std::size_t>(layers > 1 ? layers - 1 : 0), width);
    c.latent_channels = latent;
    c.beta = beta;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.seed = seed;
    c.early_stop_accuracy = early_stop;
    c.dataset_graphs = graphs;
    c.dataset_edge_prob = edge_prob;
    return c;
}

void print_log(const std::vector<LossReport>& log) {
    std::printf("epoch,bce,kl,total,edge_acc\n");
    for (std::size_t e = 0; e < log.size(); ++e)
        std::printf("%zu,%.6f,%.6f,%.6f,%.4f\n", e, log[e].reconstruction, log[e].kl, log[e].total,
                    log[e].edge_accuracy);
}

int run_train(const AutoencoderConfig& config, const std::string& out_path) {
    const std::vector<EquivariantTensor> dataset = dataset_from_config(config);
    const TrainResult result = train(config, dataset);
    print_log(result.log);
    save_checkpoint(result.model, out_path);
    std::fprintf(stderr, "train: saved checkpoint to %s after %zu logged epochs\n",
                 out_path.c_str(), result.log.size());
    return 0;
}

int run_reconstruct(const std::string& checkpoint) {
    const Model model = load_checkpoint(checkpoint);
    if (model.config.dataset_graphs <= 0)
        throw std::runtime_error("reconstruct: checkpoint records no training dataset");
    const std::vector<EquivariantTensor> dataset = dataset_from_config(model.config);
    std::printf("graph,edge_accuracy\n");
    for (std::size_t g = 0; g < dataset.size(); ++g) {
        const LossReport one = evaluate(model, {dataset[g]});
        std::printf("%zu,%.4f\n", g, one.edge_accuracy);
    }
    const LossReport all = evaluate(model, dataset);
    std::printf("mean,%.4f\n", all.edge_accuracy);
    return 0;
}

int run_sample(const std::string& checkpoint, int samples, std::uint64_t seed, double threshold,
               const std::string& out_prefix) {
    const Model model = load_checkpoint(checkpoint);
    const int n = model.config.n_max;
    std::printf("sample,edges,largest_component\n");
    for (int s = 0; s < samples; ++s) {
        RandomStream rs(derive_seed(seed, 0x5A17ULL + static_cast<std::uint64_t>(s)));
        EquivariantTensor z(n, 1, model.config.latent_channels);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < model.config.latent_channels; ++c) z.at(i, c) = rs.normal();
        const EquivariantTensor p = decode(model, z);
        EquivariantTensor a(n, 2, 1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && p.at(i, j, 0) > threshold) a.at(i, j, 0) = 1.0;
        std::printf("%d,%" PRId64 ",%d\n", s, edge_count(a), largest_component_size(a));
        if (!out_prefix.empty()) save_graph(a, out_prefix + std::to_string(s) + ".txt");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Permutation-equivariant layer toolkit and graph autoencoder driver"};
    app.require_subcommand(1);

    int cp_in = 1, cp_out = 1;
    std::string cp_diag = "full";
    auto* cmd_count = app.add_subcommand("count-params",
                                         "Independent-parameter count of an equivariant layer");
    cmd_count->add_option("--order-in", cp_in, "input tensor order")
        ->required()
        ->check(CLI::Range(1, 3));
    cmd_count->add_option("--order-out", cp_out, "output tensor order")
        ->required()
        ->check(CLI::Range(1, 3));
    cmd_count->add_option("--diagonal", cp_diag, "order-2 diagonal handling")
        ->check(CLI::IsMember({"full", "zero"}));

    int dl_in = 2, dl_out = 2;
    std::string dl_diag = "full";
    auto* cmd_describe =
        app.add_subcommand("describe-layer", "Canonical basis terms of a layer, one per line");
    cmd_describe->add_option("--order-in", dl_in, "input tensor order")
        ->required()
        ->check(CLI::Range(1, 3));
    cmd_describe->add_option("--order-out", dl_out, "output tensor order")
        ->required()
        ->check(CLI::Range(1, 3));
    cmd_describe->add_option("--diagonal", dl_diag, "order-2 diagonal handling")
        ->check(CLI::IsMember({"full", "zero"}));

    int vf_order = 0, vf_n = 0;
    std::string vf_diag = "full";
    bool vf_exact = false;
    auto* cmd_verify = app.add_subcommand(
        "verify", "Check layer bases against the commutant oracle (exit 1 on failure)");
    cmd_verify->add_option("--order", vf_order, "restrict to one tensor order")
        ->check(CLI::Range(1, 3));
    cmd_verify->add_option("--n", vf_n, "restrict to one index-set size")->check(CLI::Range(1, 8));
    cmd_verify->add_option("--diagonal", vf_diag, "order-2 diagonal handling")
        ->check(CLI::IsMember({"full", "zero"}));
    cmd_verify->add_flag("--exact", vf_exact, "use exact rational elimination (n <= 4)");

    int eq_trials = 100;
    std::uint64_t eq_seed = 7;
    double eq_tol = 1e-10;
    auto* cmd_equi = app.add_subcommand(
        "equivariance-test", "Randomized permutation-equivariance check of every layer kind");
    cmd_equi->add_option("--trials", eq_trials, "random trials per layer and n")
        ->check(CLI::PositiveNumber);
    cmd_equi->add_option("--seed", eq_seed, "random seed");
    cmd_equi->add_option("--tolerance", eq_tol, "max allowed deviation")->check(CLI::PositiveNumber);

    auto* cmd_compose =
        app.add_subcommand("compose-demo", "Neighborhood message-passing walkthrough");

    int tr_n = 6, tr_graphs = 20, tr_epochs = 200, tr_latent = 8, tr_layers = 4, tr_width = 16;
    double tr_edge_prob = 0.5, tr_beta = 0.0, tr_lr = AutoencoderConfig{}.learning_rate,
           tr_early = 0.95;
    std::uint64_t tr_seed = 7;
    std::string tr_out = "model.snva";
    auto* cmd_train = app.add_subcommand("train", "Train the graph autoencoder on random graphs");
    cmd_train->add_option("--n", tr_n, "vertices per graph")->check(CLI::Range(1, 12));
    cmd_train->add_option("--graphs", tr_graphs, "training graphs")->check(CLI::PositiveNumber);
    cmd_train->add_option("--edge-prob", tr_edge_prob, "edge probability")
        ->check(CLI::Range(0.0, 1.0));
    cmd_train->add_option("--epochs", tr_epochs, "training epochs")
        ->check(CLI::NonNegativeNumber);
    cmd_train->add_option("--seed", tr_seed, "random seed");
    cmd_train->add_option("--beta", tr_beta, "KL weight")->check(CLI::NonNegativeNumber);
    cmd_train->add_option("--latent", tr_latent, "latent channels")->check(CLI::PositiveNumber);
    cmd_train->add_option("--layers", tr_layers, "equivariant layers per side")
        ->check(CLI::Range(1, 8));
    cmd_train->add_option("--width", tr_width, "channels per hidden layer")
        ->check(CLI::PositiveNumber);
    cmd_train->add_option("--lr", tr_lr, "learning rate")->check(CLI::PositiveNumber);
    cmd_train->add_option("--early-stop", tr_early, "stop once edge accuracy reaches this (0 = off)")
        ->check(CLI::Range(0.0, 1.0));
    cmd_train->add_option("--out", tr_out, "checkpoint path");

    std::string rc_checkpoint = "model.snva";
    auto* cmd_recon = app.add_subcommand(
        "reconstruct", "Re-evaluate a checkpoint's training graphs through the autoencoder");
    cmd_recon->add_option("--checkpoint", rc_checkpoint, "checkpoint path");

    std::string sp_checkpoint = "model.snva", sp_prefix;
    int sp_samples = 5;
    std::uint64_t sp_seed = 7;
    double sp_threshold = 0.5;
    auto* cmd_sample =
        app.add_subcommand("sample", "Decode random latent draws into graphs and summarize them");
    cmd_sample->add_option("--checkpoint", sp_checkpoint, "checkpoint path");
    cmd_sample->add_option("--samples", sp_samples, "number of draws")->check(CLI::PositiveNumber);
    cmd_sample->add_option("--seed", sp_seed, "random seed");
    cmd_sample->add_option("--threshold", sp_threshold, "edge probability cutoff")
        ->check(CLI::Range(0.0, 1.0));
    cmd_sample->add_option("--out-prefix", sp_prefix, "save each sample to <prefix><i>.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*cmd_count) return run_count_params(cp_in, cp_out, cp_diag == "zero");
        if (*cmd_describe) return run_describe_layer(dl_in, dl_out, dl_diag == "zero");
        if (*cmd_verify) return run_verify(vf_order, vf_diag == "zero", vf_n, vf_exact);
        if (*cmd_equi) return run_equivariance_test(eq_trials, eq_seed, eq_tol);
        if (*cmd_compose) return run_compose_demo();
        if (*cmd_train)
            return run_train(config_from_flags(tr_n, tr_graphs, tr_edge_prob, tr_epochs, tr_seed,
                                               tr_beta, tr_latent, tr_layers, tr_width, tr_lr,
                                               tr_early),
                             tr_out);
        if (*cmd_recon) return run_reconstruct(rc_checkpoint);
        if (*cmd_sample)
            return run_sample(sp_checkpoint, sp_samples, sp_seed, sp_threshold, sp_prefix);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
