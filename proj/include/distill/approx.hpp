#pragma once

// Small multilayer perceptrons with hand-written reverse-mode gradients,
// an Adam optimizer, target-network soft updates and the tanh-squashed
// Gaussian policy head.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace distill::approx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class StaleCacheError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Rectifier hidden layers, linear output. weights[l] is (out x in).
struct NetParams {
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    /// Changes whenever the parameters are modified through this module.
    std::uint64_t generation = 0;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }
    bool congruent(const NetParams& other) const;
    bool all_finite() const;
    /// Zero-valued parameters of the same shape.
    NetParams zeros_like() const;
    void touch();
};

NetParams init_network(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Activations kept for the backward pass. Inputs are column vectors; a batch
/// is a matrix with one sample per column.
struct ForwardCache {
    std::vector<Matrix> inputs;  // input to layer l (post-rectifier of l-1)
    std::vector<Matrix> pre;     // pre-activation of layer l
    std::uint64_t generation = 0;
};

struct ForwardResult {
    Matrix output;
    ForwardCache cache;
};

ForwardResult forward(const NetParams& params, const Matrix& input);
/// Forward pass without keeping a cache.
Matrix predict(const NetParams& params, const Matrix& input);

struct Gradients {
    NetParams params;    // d(sum over batch of output . cotangent) / d(parameter)
    Matrix input;        // same, with respect to the network input
};

Gradients gradient(const NetParams& params, const ForwardCache& cache, const Matrix& output_cotangent);

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    NetParams first_moment;
    NetParams second_moment;
    std::int64_t step = 0;
};

OptimizerState make_optimizer(const NetParams& params, const AdamConfig& config = {});

/// One bias-corrected Adam update. Returns false, leaving everything
/// untouched, when the gradient holds a non-finite entry.
bool adam_step(NetParams& params, const NetParams& grads, OptimizerState& state);

/// Adam on a single scalar parameter.
struct ScalarAdam {
    AdamConfig config;
    double m = 0.0;
    double v = 0.0;
    std::int64_t step = 0;

    bool update(double& value, double grad);
};

/// target <- (1 - tau) target + tau online
void soft_update(NetParams& target, const NetParams& online, double tau);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEpsilon = 1e-6;

struct SquashedSample {
    Vector action;    // tanh(u)
    Vector pre_tanh;  // u
    double log_prob = 0.0;
    // partial derivatives of log_prob with noise held fixed
    Vector dlogp_dmean;
    Vector dlogp_dlogstd;
    // d action / d mean (diagonal) and d action / d log_std (diagonal)
    Vector daction_dmean;
    Vector daction_dlogstd;
};

/// Reparameterized sample a = tanh(mean + exp(log_std) * noise). `log_std` is
/// clamped to [kLogStdMin, kLogStdMax]; derivatives through a clamped entry are zero.
SquashedSample sample_squashed_gaussian(const Vector& mean, const Vector& log_std, const Vector& noise);

// Checkpoint serialization; doubles round-trip exactly.
nlohmann::json to_json(const NetParams& params);
NetParams net_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OptimizerState& state);
OptimizerState optimizer_from_json(const nlohmann::json& j);

}  // namespace distill::approx
