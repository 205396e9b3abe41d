#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sneq/layers.hpp"
#include "sneq/tensor.hpp"

namespace sneq {

/// Hyperparameters plus the recipe for regenerating the training dataset.
struct AutoencoderConfig {
    int n_max = 6;
    std::vector<int> encoder_widths = {16, 16, 16, 16};
    std::vector<int> decoder_widths = {16, 16, 16};
    int latent_channels = 8;
    double beta = 0.0;
    Nonlinearity hidden_activation = Nonlinearity::relu;
    double learning_rate = 0.01;
    int epochs = 200;
    /// Graphs per optimizer step, taken in dataset order; 0 = whole dataset.
    int batch_size = 0;
    std::uint64_t seed = 7;
    /// Divide summed indices by n inside every layer (keeps activations O(1)).
    bool normalize_sums = true;
    /// Stop early once the pre-step edge accuracy reaches this value; 0 = off.
    double early_stop_accuracy = 0.0;
    /// Dataset recipe recorded in checkpoints so runs can be reproduced.
    int dataset_graphs = 0;
    double dataset_edge_prob = 0.5;

    void validate() const;
};

/// All weights in canonical order: encoder stack (order-2 full layers), the
/// order-2 -> order-1 pooling to 2C channels, then the decoder stack whose
/// last layer maps to a single logit channel.
struct WeightSet {
    std::vector<LayerWeights> encoder;
    LayerWeights pool;
    std::vector<LayerWeights> decoder;
};

/// Mutable (or read-only) views of every scalar parameter, in the exact
/// order used by the optimizer, the serializer, and the gradient checks.
std::vector<double*> parameter_pointers(WeightSet& w);
std::vector<const double*> parameter_pointers(const WeightSet& w);

/// Uniform Glorot-style init: |w| <= sqrt(6/(fan_in+fan_out)) with
/// fan = channels x term count; biases start at zero.
WeightSet initial_weights(const AutoencoderConfig& config);

struct Model {
    AutoencoderConfig config;
    WeightSet weights;
};

Model initial_model(const AutoencoderConfig& config);

struct Latent {
    EquivariantTensor mean;
    EquivariantTensor logvar;
};

/// Encoder stack + pooling; the 2C pooled channels split into mean and
/// log-variance.  The adjacency may be smaller than n_max; off-diagonal
/// entries must be symmetric 0/1 (the diagonal may carry node features).
Latent encode(const Model& model, const EquivariantTensor& adjacency);

/// Rank-one lift of z, decoder stack, symmetrization of the logits, sigmoid.
EquivariantTensor decode(const Model& model, const EquivariantTensor& z);

/// decode(encode(A).mean): the deterministic reconstruction path.
EquivariantTensor reconstruct(const Model& model, const EquivariantTensor& adjacency);

struct LossReport {
    double reconstruction = 0.0;
    double kl = 0.0;
    double total = 0.0;
    double edge_accuracy = 0.0;
};

/// Binary cross-entropy summed over off-diagonal entries plus beta times
/// KL(N(mean, e^logvar) || N(0,1)) summed over all latent entries.
/// Probabilities are clamped to [1e-12, 1-1e-12] before the logs.
LossReport loss(const EquivariantTensor& pred, const EquivariantTensor& target,
                const EquivariantTensor& mean, const EquivariantTensor& logvar, double beta);

struct GradientReport {
    WeightSet gradients;
    LossReport report;
};

/// Mean loss over the batch and exact analytic gradients of it with respect
/// to every parameter.  Graphs smaller than n_max are padded with ghost
/// vertices whose entries are masked out of the reconstruction terms.
/// `epsilons` supplies the reparameterization noise per graph (order-1,
/// latent channels, at n_max); empty means the deterministic z = mean path.
GradientReport gradients(const Model& model, const std::vector<EquivariantTensor>& batch,
                         const std::vector<EquivariantTensor>& epsilons = {});

/// Forward-only counterpart of gradients(): the same mean LossReport.
LossReport evaluate(const Model& model, const std::vector<EquivariantTensor>& batch,
                    const std::vector<EquivariantTensor>& epsilons = {});

/// Smallest |pre-activation| feeding a relu anywhere in the batch forward
/// pass; finite-difference tests use it to stay away from the kink.
double min_hidden_preactivation(const Model& model, const std::vector<EquivariantTensor>& batch,
                                const std::vector<EquivariantTensor>& epsilons = {});

struct TrainResult {
    Model model;
    std::vector<LossReport> log;  // one pre-step report per completed epoch
};

/// Deterministic full-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8).  With
/// beta > 0 the noise for epoch e, graph g comes from the seeded stream.
/// Throws on non-finite loss.
TrainResult train(const AutoencoderConfig& config, const std::vector<EquivariantTensor>& dataset);

/// The seeded random-graph dataset a config describes: dataset_graphs
/// Erdos-Renyi graphs on n_max vertices with the stored edge probability,
/// reproducible from a checkpoint alone.
std::vector<EquivariantTensor> dataset_from_config(const AutoencoderConfig& config);

/// Checkpoint file: magic "SNVA", version, config block, optimizer tag,
/// then every parameter as little-endian 64-bit floats in canonical order.
/// Round-trips bit-exactly.
void write_checkpoint(const Model& model, std::ostream& out);
Model read_checkpoint(std::istream& in);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace sneq
