#include "distill/approx.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "distill/random.hpp"

namespace distill::approx {

namespace {

std::uint64_t next_generation()
{
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

void require_congruent(const NetParams& a, const NetParams& b, const char* what)
{
    if (!a.congruent(b)) {
        throw ShapeError(std::string(what) + ": parameter shapes differ");
    }
}

nlohmann::json matrix_to_json(const Matrix& m)
{
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& j)
{
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ShapeError("matrix: data length does not match its shape");
    }
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

}  // namespace

bool NetParams::congruent(const NetParams& other) const
{
    if (layer_sizes != other.layer_sizes || weights.size() != other.weights.size() ||
        biases.size() != other.biases.size()) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols() ||
            biases[l].size() != other.biases[l].size()) {
            return false;
        }
    }
    return true;
}

bool NetParams::all_finite() const
{
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
}

NetParams NetParams::zeros_like() const
{
    NetParams z;
    z.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
        z.biases.push_back(Vector::Zero(biases[l].size()));
    }
    z.generation = next_generation();
    return z;
}

void NetParams::touch()
{
    generation = next_generation();
}

NetParams init_network(const std::vector<int>& layer_sizes, std::uint64_t seed)
{
    if (layer_sizes.size() < 2) {
        throw ShapeError("init_network: at least an input and an output layer are required");
    }
    for (int s : layer_sizes) {
        if (s < 1) throw ShapeError("init_network: layer sizes must be positive");
    }
    Rng rng(seed);
    NetParams p;
    p.layer_sizes = layer_sizes;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                w(r, c) = rng.uniform(-limit, limit);
            }
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vector::Zero(fan_out));
    }
    p.touch();
    return p;
}

ForwardResult forward(const NetParams& params, const Matrix& input)
{
    if (input.rows() != params.input_size()) {
        throw ShapeError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                         std::to_string(params.input_size()));
    }
    ForwardResult result;
    const std::size_t layers = params.layer_count();
    result.cache.inputs.reserve(layers);
    result.cache.pre.reserve(layers);
    Matrix h = input;
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = params.weights[l] * h;
        z.colwise() += params.biases[l];
        result.cache.inputs.push_back(std::move(h));
        if (l + 1 < layers) {
            h = z.cwiseMax(0.0);
        } else {
            h = z;
        }
        result.cache.pre.push_back(std::move(z));
    }
    result.output = std::move(h);
    result.cache.generation = params.generation;
    return result;
}

Matrix predict(const NetParams& params, const Matrix& input)
{
    if (input.rows() != params.input_size()) {
        throw ShapeError("predict: input dimension mismatch");
    }
    Matrix h = input;
    const std::size_t layers = params.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = params.weights[l] * h;
        z.colwise() += params.biases[l];
        h = l + 1 < layers ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
}

Gradients gradient(const NetParams& params, const ForwardCache& cache, const Matrix& output_cotangent)
{
    if (cache.generation != params.generation || cache.inputs.size() != params.layer_count()) {
        throw StaleCacheError("gradient: cache was not produced by these parameters");
    }
    if (output_cotangent.rows() != params.output_size() ||
        output_cotangent.cols() != cache.pre.back().cols()) {
        throw ShapeError("gradient: cotangent shape does not match the forward output");
    }
    Gradients g;
    g.params.layer_sizes = params.layer_sizes;
    g.params.weights.resize(params.layer_count());
    g.params.biases.resize(params.layer_count());

    Matrix delta = output_cotangent;
    for (std::size_t l = params.layer_count(); l-- > 0;) {
        if (l + 1 < params.layer_count()) {
            // rectifier derivative
            delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
        }
        g.params.weights[l] = delta * cache.inputs[l].transpose();
        g.params.biases[l] = delta.rowwise().sum();
        delta = params.weights[l].transpose() * delta;
    }
    g.input = std::move(delta);
    g.params.touch();
    return g;
}

OptimizerState make_optimizer(const NetParams& params, const AdamConfig& config)
{
    OptimizerState s;
    s.config = config;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
}

bool adam_step(NetParams& params, const NetParams& grads, OptimizerState& state)
{
    require_congruent(params, grads, "adam_step");
    require_congruent(params, state.first_moment, "adam_step");
    if (!grads.all_finite()) {
        return false;
    }
    const AdamConfig& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * grad;
        v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
        param.array() -= c.learning_rate * (m.array() / correction1) /
                         ((v.array() / correction2).sqrt() + c.epsilon);
    };
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        update(params.weights[l], grads.weights[l], state.first_moment.weights[l],
               state.second_moment.weights[l]);
        update(params.biases[l], grads.biases[l], state.first_moment.biases[l],
               state.second_moment.biases[l]);
    }
    params.touch();
    return true;
}

bool ScalarAdam::update(double& value, double grad)
{
    if (!std::isfinite(grad)) return false;
    ++step;
    const double t = static_cast<double>(step);
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad * grad;
    const double m_hat = m / (1.0 - std::pow(config.beta1, t));
    const double v_hat = v / (1.0 - std::pow(config.beta2, t));
    value -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    return true;
}

void soft_update(NetParams& target, const NetParams& online, double tau)
{
    require_congruent(target, online, "soft_update");
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("soft_update: tau must lie in (0, 1]");
    }
    for (std::size_t l = 0; l < target.layer_count(); ++l) {
        target.weights[l] = (1.0 - tau) * target.weights[l] + tau * online.weights[l];
        target.biases[l] = (1.0 - tau) * target.biases[l] + tau * online.biases[l];
    }
    target.touch();
}

SquashedSample sample_squashed_gaussian(const Vector& mean, const Vector& log_std, const Vector& noise)
{
    if (mean.size() != log_std.size() || mean.size() != noise.size()) {
        throw ShapeError("sample_squashed_gaussian: mean, log_std and noise sizes differ");
    }
    const Eigen::Index d = mean.size();
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    SquashedSample s;
    s.action.resize(d);
    s.pre_tanh.resize(d);
    s.dlogp_dmean.resize(d);
    s.dlogp_dlogstd.resize(d);
    s.daction_dmean.resize(d);
    s.daction_dlogstd.resize(d);
    s.log_prob = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const bool clamped = log_std[i] < kLogStdMin || log_std[i] > kLogStdMax;
        const double ls = std::clamp(log_std[i], kLogStdMin, kLogStdMax);
        const double sigma = std::exp(ls);
        const double u = mean[i] + sigma * noise[i];
        const double a = std::tanh(u);
        const double inside = std::nextafter(1.0, 0.0);
        const double one_minus_a2 = 1.0 - a * a;
        s.pre_tanh[i] = u;
        s.action[i] = std::clamp(a, -inside, inside);
        s.log_prob += -0.5 * noise[i] * noise[i] - ls - kHalfLog2Pi -
                      std::log(one_minus_a2 + kSquashEpsilon);
        // d/du of -log(1 - tanh(u)^2 + eps)
        const double dsquash_du = 2.0 * a * one_minus_a2 / (one_minus_a2 + kSquashEpsilon);
        s.dlogp_dmean[i] = dsquash_du;
        s.daction_dmean[i] = one_minus_a2;
        if (clamped) {
            s.dlogp_dlogstd[i] = 0.0;
            s.daction_dlogstd[i] = 0.0;
        } else {
            s.dlogp_dlogstd[i] = -1.0 + dsquash_du * sigma * noise[i];
            s.daction_dlogstd[i] = one_minus_a2 * sigma * noise[i];
        }
    }
    return s;
}

nlohmann::json to_json(const NetParams& params)
{
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        layers.push_back({{"weights", matrix_to_json(params.weights[l])},
                          {"biases", std::vector<double>(params.biases[l].data(),
                                                         params.biases[l].data() + params.biases[l].size())}});
    }
    return {{"layer_sizes", params.layer_sizes}, {"layers", layers}};
}

NetParams net_from_json(const nlohmann::json& j)
{
    NetParams p;
    p.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& layer : j.at("layers")) {
        p.weights.push_back(matrix_from_json(layer.at("weights")));
        const auto b = layer.at("biases").get<std::vector<double>>();
        p.biases.push_back(Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())));
    }
    if (p.layer_sizes.size() != p.weights.size() + 1) {
        throw ShapeError("network checkpoint: layer count mismatch");
    }
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        if (p.weights[l].cols() != p.layer_sizes[l] || p.weights[l].rows() != p.layer_sizes[l + 1] ||
            p.biases[l].size() != p.layer_sizes[l + 1]) {
            throw ShapeError("network checkpoint: layer " + std::to_string(l) + " has the wrong shape");
        }
    }
    p.touch();
    return p;
}

nlohmann::json to_json(const OptimizerState& s)
{
    return {{"learning_rate", s.config.learning_rate},
            {"beta1", s.config.beta1},
            {"beta2", s.config.beta2},
            {"epsilon", s.config.epsilon},
            {"step", s.step},
            {"first_moment", to_json(s.first_moment)},
            {"second_moment", to_json(s.second_moment)}};
}

OptimizerState optimizer_from_json(const nlohmann::json& j)
{
    OptimizerState s;
    s.config.learning_rate = j.at("learning_rate").get<double>();
    s.config.beta1 = j.at("beta1").get<double>();
    s.config.beta2 = j.at("beta2").get<double>();
    s.config.epsilon = j.at("epsilon").get<double>();
    s.step = j.at("step").get<std::int64_t>();
    s.first_moment = net_from_json(j.at("first_moment"));
    s.second_moment = net_from_json(j.at("second_moment"));
    return s;
}

}  // namespace distill::approx
