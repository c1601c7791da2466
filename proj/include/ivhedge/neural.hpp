#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivhedge/autodiff.hpp"
#include "ivhedge/rng.hpp"

namespace ivhedge {

/// Shape of the RNN-FNN policy: gated cells followed by ReLU layers and a linear output.
struct Architecture {
    int input_dim = 0;
    std::vector<int> lstm_widths{56, 56};
    std::vector<int> ffnn_widths{56, 56};
    /// Feed each cell's previous-step output back into its input (conventional LSTM).
    bool recurrent = false;
    /// Dropout probability on FFNN hidden activations during training.
    double dropout = 0.5;

    /// Input width of gated cell `l` (includes the fed-back output in recurrent mode).
    int cell_input_dim(std::size_t l) const;
    /// Throws ConfigError on non-positive widths or dropout outside [0, 1).
    void validate() const;
    bool operator==(const Architecture&) const = default;
};

/// All trainable tensors. Cell weights stack the input, output and candidate
/// gates: W is (3 d) x d_in and b is (3 d) x 1, blocks in the order [i; o; c].
struct PolicyWeights {
    Architecture arch;
    std::vector<Eigen::MatrixXd> cell_W;
    std::vector<Eigen::MatrixXd> cell_b;
    std::vector<Eigen::MatrixXd> ffnn_W;
    std::vector<Eigen::MatrixXd> ffnn_b;
    Eigen::MatrixXd out_W;
    Eigen::MatrixXd out_b;

    /// Zero tensors shaped for `arch`.
    static PolicyWeights zeros(const Architecture& arch);

    /// Visits every tensor in a fixed order.
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& m : cell_W) fn(m);
        for (auto& m : cell_b) fn(m);
        for (auto& m : ffnn_W) fn(m);
        for (auto& m : ffnn_b) fn(m);
        fn(out_W);
        fn(out_b);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& m : cell_W) fn(m);
        for (const auto& m : cell_b) fn(m);
        for (const auto& m : ffnn_W) fn(m);
        for (const auto& m : ffnn_b) fn(m);
        fn(out_W);
        fn(out_b);
    }

    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);
    bool all_finite() const;
};

/// Weights uniform on +-sqrt(6 / (fan_in + fan_out)) per gate block, biases zero.
PolicyWeights glorot_init(const Architecture& arch, std::uint64_t seed);

/// Per-feature affine standardization x -> (x - mean) / scale.
struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Normalizer identity(int dim);
    /// Columns of `samples` are observations; zero-variance features get scale 1.
    static Normalizer fit(const Eigen::ArrayXXd& samples);
    Eigen::ArrayXXd apply(const Eigen::ArrayXXd& x) const;
};

/// Weights recorded as leaves of one tape.
struct BoundWeights {
    std::vector<Var> cell_W;
    std::vector<Var> cell_b;
    std::vector<Var> ffnn_W;
    std::vector<Var> ffnn_b;
    Var out_W;
    Var out_b;
};

BoundWeights bind(Tape& tape, const PolicyWeights& w, bool requires_grad);
/// Gradients of the bound leaves after backward(), shaped like `w`.
PolicyWeights gradients(const Tape& tape, const BoundWeights& bw, const Architecture& arch);

/// Previous-step outputs of each gated cell, per path (columns). Empty at t = 0.
struct RecurrentState {
    std::vector<Var> hidden;
    void reset() { hidden.clear(); }
};

struct PolicyOutput {
    Var z_raw;      ///< linear output layer, 1 x n
    Var delta_out;  ///< min(z_raw, bound)
};

/// Linear output of the network for one time step on a batch X (input_dim x n).
/// When `dropout_rng` is non-null, inverted dropout masks are drawn from it for
/// every FFNN hidden layer.
Var policy_raw(const BoundWeights& w, const Architecture& arch, Var X, RecurrentState& rec, RngStream* dropout_rng);

/// One time step of the policy on a batch X (input_dim x n). `bound` (1 x n) caps the
/// output; pass a node holding +inf for an inactive constraint. When `dropout_rng`
/// is non-null, inverted dropout masks are drawn from it for every FFNN hidden layer.
PolicyOutput policy_forward(const BoundWeights& w, const Architecture& arch, Var X, RecurrentState& rec, Var bound,
                            RngStream* dropout_rng);

/// Adam with bias correction.
struct AdamState {
    PolicyWeights m;
    PolicyWeights v;
    std::int64_t step = 0;
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_weights(const PolicyWeights& w, double lr = 5e-4);
};

void adam_step(PolicyWeights& w, const PolicyWeights& grad, AdamState& opt);

/// A saved policy: weights, optimizer moments, input normalizer and metadata.
struct Checkpoint {
    PolicyWeights weights;
    AdamState adam;
    Normalizer normalizer;
    std::vector<std::string> features;
    std::uint64_t seed = 0;
    std::string metadata_json = "{}";  ///< free-form JSON object (hedge/training configuration)
};

/// Layout: "IVHCKPT1\n", 8-byte little-endian header length, JSON header, then
/// float64 little-endian weights, Adam first moments, Adam second moments.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
/// Throws ConfigError on a malformed file, or if `expected` is given and its
/// architecture differs from the stored one.
Checkpoint load_checkpoint(const std::filesystem::path& file, const Architecture* expected = nullptr);

}  // namespace ivhedge
