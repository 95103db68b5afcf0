#pragma once

#include "regsig/random.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace regsig {

inline constexpr double kLeakySlope = 0.01;

/// Block of a grouped layer: inputs [in_begin, in_end) feed only outputs [out_begin, out_end).
struct InputGroup {
    std::size_t in_begin = 0, in_end = 0;
    std::size_t out_begin = 0, out_end = 0;
};

struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    bool leaky = true;                 // leaky ReLU, otherwise linear
    std::vector<InputGroup> groups;    // empty: fully connected
};

/// Activations kept by forward() for backward().
struct MlpCache {
    std::vector<std::vector<double>> pre;  // per layer, before activation
    std::vector<std::vector<double>> act;  // act[0] is the input, act[L] the output

    std::span<const double> output() const { return act.back(); }
};

/// Feed-forward network with all parameters in one flat vector (weights row-major, then biases,
/// layer by layer).
class Mlp {
public:
    Mlp() = default;
    /// Fan-in scaled uniform init, biases zero.
    Mlp(std::vector<LayerSpec> specs, Rng& rng);
    /// Parameters supplied explicitly (masked entries are forced to zero).
    Mlp(std::vector<LayerSpec> specs, std::span<const double> params);

    /// Plain fully connected stack: sizes = {in, h1, ..., out}; hidden layers leaky, output linear.
    static std::vector<LayerSpec> dense_specs(const std::vector<std::size_t>& sizes);

    std::size_t input_size() const { return specs_.front().in; }
    std::size_t output_size() const { return specs_.back().out; }
    std::size_t param_count() const { return params_.size(); }
    const std::vector<LayerSpec>& specs() const { return specs_; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    std::vector<double> forward(std::span<const double> input) const;
    void forward(std::span<const double> input, MlpCache& cache) const;
    /// Adds d(loss)/d(params) into `grad` given d(loss)/d(output).
    void backward(const MlpCache& cache, std::span<const double> grad_output, std::span<double> grad) const;

    /// Zeroes masked-out gradient entries so grouped layers stay grouped.
    void mask_gradient(std::span<double> grad) const;

private:
    struct Offsets {
        std::size_t weights = 0;
        std::size_t biases = 0;
    };
    void build_layout();

    std::vector<LayerSpec> specs_;
    std::vector<Offsets> offsets_;
    std::vector<std::vector<std::uint8_t>> masks_;  // empty for dense layers
    std::vector<double> params_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam moments and step count for one parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, AdamConfig config);

    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

struct ScalarLoss {
    double loss = 0.0;
    double grad = 0.0;  // d loss / d prediction
};

/// Quadratic for |error| <= delta, linear beyond.
ScalarLoss huber(double prediction, double target, double delta = 1.0);

std::vector<double> softmax(std::span<const double> logits);

struct CrossEntropy {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d predicted probabilities
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -sum target log(max(predicted, floor)).
CrossEntropy cross_entropy(std::span<const double> target, std::span<const double> predicted);

/// Gradient of cross_entropy(target, softmax(logits)) w.r.t. the logits: softmax - target.
std::vector<double> softmax_cross_entropy_logit_grad(std::span<const double> target, std::span<const double> logits);

void save_mlp(const std::filesystem::path& path, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

} // namespace regsig
