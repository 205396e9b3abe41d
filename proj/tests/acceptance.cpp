// Acceptance harness: one line per criterion, exit code = number of failures.
// Each check recomputes its expectations independently of the library where
// that is feasible (orbit counts vs elimination, finite differences vs
// analytic gradients, hand formulas vs tabulated types).
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sneq/autoencoder.hpp"
#include "sneq/graphs.hpp"
#include "sneq/layers.hpp"
#include "sneq/oracle.hpp"
#include "sneq/partitions.hpp"
#include "sneq/rng.hpp"
#include "sneq/tensor.hpp"

using namespace sneq;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void fail(const std::string& why) {
        pass = false;
        if (!detail.str().empty()) detail << "; ";
        detail << why;
    }
};

template <typename T>
void expect_eq(Outcome& o, const T& got, const T& want, const std::string& what) {
    if (!(got == want)) {
        std::ostringstream msg;
        msg << what << ": got " << got << ", want " << want;
        o.fail(msg.str());
    }
}

// ---------------------------------------------------------------- criterion 1
Outcome check_term_and_parameter_counts() {
    Outcome o;
    expect_eq(o, basis_terms(LayerKind::first_to_first).size(), std::size_t{2}, "1to1 terms");
    expect_eq(o, basis_terms(LayerKind::second_to_second_zero_diag).size(), std::size_t{7},
              "2to2 zero-diag terms");
    expect_eq(o, basis_terms(LayerKind::second_to_second).size(), std::size_t{15},
              "2to2 full terms");
    expect_eq(o, basis_terms(LayerKind::second_to_first).size(), std::size_t{5}, "2to1 terms");
    expect_eq(o, basis_terms(LayerKind::third_to_third).size(), std::size_t{203}, "3to3 terms");

    std::map<int, int> by_stratum;
    for (const BasisTerm& t : basis_terms(LayerKind::third_to_third)) ++by_stratum[t.stratum()];
    expect_eq(o, by_stratum[0], 77, "3to3 distinct-index stratum");
    expect_eq(o, by_stratum[1], 37, "3to3 merged-pair stratum (1,2)");
    expect_eq(o, by_stratum[2], 37, "3to3 merged-pair stratum (1,3)");
    expect_eq(o, by_stratum[3], 37, "3to3 merged-pair stratum (2,3)");
    expect_eq(o, by_stratum[4], 15, "3to3 all-merged stratum");

    // Multiplicity arithmetic at the smallest stable n.
    const TypeVector t1 = action_type({2, ActionVariant::order1});
    expect_eq(o, param_count(t1, t1), std::int64_t{2}, "param_count order1->order1");
    const TypeVector t2 = action_type({4, ActionVariant::order2_full});
    expect_eq(o, param_count(t2, t2), std::int64_t{15}, "param_count order2->order2");
    const TypeVector t1n4 = action_type({4, ActionVariant::order1});
    expect_eq(o, param_count(t2, t1n4), std::int64_t{5}, "param_count order2->order1");
    return o;
}

// ---------------------------------------------------------------- criterion 2
Outcome check_commutant_oracles() {
    Outcome o;
    const std::vector<std::pair<LayerKind, std::pair<int, int>>> grid = {
        {LayerKind::first_to_first, {1, 8}},
        {LayerKind::second_to_second, {2, 6}},
        {LayerKind::second_to_second_zero_diag, {2, 6}},
        {LayerKind::second_to_first, {2, 6}},
        {LayerKind::third_to_third, {3, 4}},
    };
    for (const auto& [kind, range] : grid) {
        const LayerShape shape = layer_shape(kind);
        const int stable = 2 * std::max(shape.order_in, shape.order_out);
        for (int n = range.first; n <= range.second; ++n) {
            const CommutantProblem problem = layer_problem(kind, n);
            const std::int64_t orbits = commutant_dim_orbit(problem);
            const int nullity = commutant_dim_nullspace(problem);
            if (orbits != nullity) {
                std::ostringstream msg;
                msg << layer_name(kind) << " n=" << n << ": orbit " << orbits << " vs nullspace "
                    << nullity;
                o.fail(msg.str());
            }
            if (n <= 4) {
                const int exact = commutant_dim_nullspace_exact(problem);
                if (exact != nullity) {
                    std::ostringstream msg;
                    msg << layer_name(kind) << " n=" << n << ": rational " << exact
                        << " vs floating " << nullity;
                    o.fail(msg.str());
                }
            }
            const SpanVerdict v = basis_spans_commutant(kind, n, n <= 4);
            if (v.status == SpanVerdict::Status::deficient ||
                (n >= stable && v.status != SpanVerdict::Status::exact)) {
                std::ostringstream msg;
                msg << layer_name(kind) << " n=" << n << ": span rank " << v.rank << " of dim "
                    << v.dim;
                o.fail(msg.str());
            }
        }
    }
    return o;
}

// ---------------------------------------------------------------- criterion 3
Outcome check_equivariance() {
    Outcome o;
    const std::vector<LayerKind> kinds = {
        LayerKind::first_to_first,
        LayerKind::second_to_second,
        LayerKind::second_to_second_zero_diag,
        LayerKind::second_to_first,
        LayerKind::third_to_third,
    };
    std::uint64_t counter = 0;
    double worst = 0.0;
    for (const LayerKind kind : kinds) {
        const int order_in = layer_shape(kind).order_in;
        for (int n = 2; n <= 6; ++n) {
            for (int trial = 0; trial < 100; ++trial) {
                RandomStream rs(derive_seed(11, counter++));
                LayerWeights w = LayerWeights::zeros(kind, 2, 2, true);
                for (Matrix& tm : w.term_weights)
                    for (double& x : tm.v) x = rs.uniform(-1.0, 1.0);
                for (double& b : w.bias) b = rs.uniform(-1.0, 1.0);
                for (double& b : w.diag_bias) b = rs.uniform(-1.0, 1.0);
                const EquivariantTensor f =
                    random_tensor(n, order_in, 2, derive_seed(11, counter++));
                const Permutation sigma = random_permutation(n, derive_seed(11, counter++));
                const EquivariantTensor lhs = apply_layer(w, Nonlinearity::tanh, act(sigma, f));
                const EquivariantTensor rhs = act(sigma, apply_layer(w, Nonlinearity::tanh, f));
                for (std::size_t e = 0; e < lhs.entry_count(); ++e)
                    for (int c = 0; c < lhs.channels(); ++c)
                        worst = std::max(worst, std::abs(lhs.value(e, c) - rhs.value(e, c)));
            }
        }
    }
    if (worst > 1e-10) {
        std::ostringstream msg;
        msg << "max deviation " << worst;
        o.fail(msg.str());
    }
    o.detail << "max deviation " << worst;
    return o;
}

// ---------------------------------------------------------------- criterion 4
Outcome check_dimension_consistency() {
    Outcome o;
    const auto total = [](const TypeVector& t, int n) { return type_dimension(t, n); };
    for (int n = 4; n <= 8; ++n) {
        const std::int64_t N = n;
        expect_eq(o, total(action_type({n, ActionVariant::order1}), n), N,
                  "order1 dim at n=" + std::to_string(n));
        expect_eq(o, total(action_type({n, ActionVariant::order2_full}), n), N * N,
                  "order2 dim at n=" + std::to_string(n));
        expect_eq(o, total(action_type({n, ActionVariant::order2_zero_diag}), n), N * N - N,
                  "order2 zero-diag dim at n=" + std::to_string(n));
    }
    // The order-3 distinct-index stratum only exists in closed form for
    // n >= 6 (stable regime); its dimension is the falling factorial.
    for (int n = 6; n <= 8; ++n) {
        const std::int64_t N = n;
        expect_eq(o, total(action_type({n, ActionVariant::order3_distinct}), n),
                  N * (N - 1) * (N - 2), "order3 distinct dim at n=" + std::to_string(n));
    }
    for (int n = 1; n <= 8; ++n) {
        std::int64_t sum = 0, fact = 1;
        for (const Partition& lambda : integer_partitions(n)) {
            const std::int64_t d = irrep_dimension(lambda);
            sum += d * d;
        }
        for (int k = 2; k <= n; ++k) fact *= k;
        expect_eq(o, sum, fact, "sum of squared irrep dims at n=" + std::to_string(n));
    }
    return o;
}

// ---------------------------------------------------------------- criterion 5
Outcome check_gradients() {
    Outcome o;
    AutoencoderConfig config;
    config.n_max = 4;
    config.encoder_widths = {3, 3};
    config.decoder_widths = {3};
    config.latent_channels = 2;
    config.seed = 12;  // keeps relu pre-activations away from the kink
    const std::vector<EquivariantTensor> batch = {
        random_graph(4, 0.5, 100),
        random_graph(4, 0.5, 109),
        random_graph(3, 0.5, 103),
    };

    for (const double beta : {0.0, 1.0}) {
        config.beta = beta;
        Model model = initial_model(config);
        std::vector<EquivariantTensor> eps;
        if (beta > 0.0) {
            eps = {random_tensor(4, 1, config.latent_channels, 200),
                   random_tensor(4, 1, config.latent_channels, 201),
                   random_tensor(4, 1, config.latent_channels, 202)};
        }
        const double margin = min_hidden_preactivation(model, batch, eps);
        const double h = 1e-5;
        if (margin <= 10 * h) {
            o.fail("relu margin too small for finite differences");
            return o;
        }
        const GradientReport gr = gradients(model, batch, eps);
        const auto params = parameter_pointers(model.weights);
        const auto analytic = parameter_pointers(gr.gradients);
        double worst = 0.0;
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double saved = *params[p];
            *params[p] = saved + h;
            const double up = evaluate(model, batch, eps).total;
            *params[p] = saved - h;
            const double down = evaluate(model, batch, eps).total;
            *params[p] = saved;
            const double fd = (up - down) / (2 * h);
            const double a = *analytic[p];
            const double rel =
                std::abs(fd - a) / std::max({1.0, std::abs(fd), std::abs(a)});
            worst = std::max(worst, rel);
        }
        if (worst >= 1e-6) {
            std::ostringstream msg;
            msg << "beta=" << beta << ": worst relative error " << worst;
            o.fail(msg.str());
        } else {
            if (!o.detail.str().empty()) o.detail << "; ";
            o.detail << "beta=" << beta << " worst rel err " << worst;
        }
    }
    return o;
}

// ------------------------------------------------------- criteria 6, 7 and 8
AutoencoderConfig reconstruction_config() {
    AutoencoderConfig c;
    c.n_max = 6;
    c.encoder_widths = {16, 16, 16, 16};
    c.decoder_widths = {16, 16, 16};
    c.latent_channels = 8;
    c.beta = 0.0;
    c.epochs = 2000;
    c.seed = 7;
    c.early_stop_accuracy = 0.95;
    c.dataset_graphs = 20;
    c.dataset_edge_prob = 0.5;
    return c;
}

struct TrainedRun {
    Model model;
    std::size_t epochs = 0;
    double accuracy = 0.0;
    double seconds = 0.0;
    std::string checkpoint_bytes;
};

TrainedRun run_reconstruction_training() {
    const auto t0 = std::chrono::steady_clock::now();
    const AutoencoderConfig config = reconstruction_config();
    const std::vector<EquivariantTensor> data = dataset_from_config(config);
    TrainResult r = train(config, data);
    TrainedRun out{std::move(r.model), r.log.size(), 0.0, 0.0, {}};
    out.accuracy = evaluate(out.model, data).edge_accuracy;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream bytes;
    write_checkpoint(out.model, bytes);
    out.checkpoint_bytes = bytes.str();
    return out;
}

Outcome check_reconstruction(const TrainedRun& first) {
    Outcome o;
    if (first.accuracy < 0.95) {
        std::ostringstream msg;
        msg << "edge accuracy " << first.accuracy << " after " << first.epochs << " epochs";
        o.fail(msg.str());
    }
    if (first.seconds >= 600.0) {
        std::ostringstream msg;
        msg << "training took " << first.seconds << " s";
        o.fail(msg.str());
    }
    const TrainedRun second = run_reconstruction_training();
    if (second.checkpoint_bytes != first.checkpoint_bytes)
        o.fail("repeated run produced a different checkpoint");
    if (second.accuracy != first.accuracy) o.fail("repeated run produced a different accuracy");
    if (o.pass)
        o.detail << "accuracy " << first.accuracy << " in " << first.epochs << " epochs, "
                 << first.seconds << " s, repeat identical";
    return o;
}

Outcome check_beta_ablation() {
    Outcome o;
    AutoencoderConfig config = reconstruction_config();
    config.epochs = 300;
    config.early_stop_accuracy = 0.0;  // full budget for both runs
    const std::vector<EquivariantTensor> data = dataset_from_config(config);

    config.beta = 0.0;
    const TrainResult plain = train(config, data);
    config.beta = 1.0;
    const TrainResult variational = train(config, data);

    const double bce_plain = evaluate(plain.model, data).reconstruction;
    const double bce_variational = evaluate(variational.model, data).reconstruction;
    std::ostringstream note;
    note << "BCE " << bce_variational << " (beta=1) vs " << bce_plain << " (beta=0)";
    if (bce_variational < bce_plain)
        o.fail(note.str());
    else
        o.detail << note.str();
    return o;
}

Outcome check_end_to_end_covariance(const Model& model) {
    Outcome o;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const EquivariantTensor a =
            random_graph(model.config.n_max, 0.5, derive_seed(33, static_cast<std::uint64_t>(trial)));
        const Permutation sigma =
            random_permutation(model.config.n_max, derive_seed(44, static_cast<std::uint64_t>(trial)));
        const EquivariantTensor direct = act(sigma, reconstruct(model, a));
        const EquivariantTensor moved = reconstruct(model, act(sigma, a));
        for (std::size_t e = 0; e < direct.entry_count(); ++e)
            worst = std::max(worst, std::abs(direct.value(e, 0) - moved.value(e, 0)));
    }
    if (worst > 1e-8) {
        std::ostringstream msg;
        msg << "max deviation " << worst;
        o.fail(msg.str());
    } else {
        o.detail << "max deviation " << worst;
    }
    return o;
}

int report(const char* name, const Outcome& o) {
    std::printf("%s: %s%s%s%s\n", name, o.pass ? "PASS" : "FAIL",
                o.detail.str().empty() ? "" : " (", o.detail.str().c_str(),
                o.detail.str().empty() ? "" : ")");
    std::fflush(stdout);
    return o.pass ? 0 : 1;
}

}  // namespace

int main() {
    int failures = 0;
    failures += report("1 basis and parameter counts", check_term_and_parameter_counts());
    failures += report("2 commutant oracle agreement", check_commutant_oracles());
    failures += report("3 randomized equivariance", check_equivariance());
    failures += report("4 dimension consistency", check_dimension_consistency());
    failures += report("5 gradient correctness", check_gradients());
    const TrainedRun trained = run_reconstruction_training();
    failures += report("6 desk-scale reconstruction", check_reconstruction(trained));
    failures += report("7 beta ablation", check_beta_ablation());
    failures += report("8 end-to-end covariance", check_end_to_end_covariance(trained.model));
    return failures;
}
