#include "regsig/neural.hpp"

#include "regsig/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace regsig {

Mlp::Mlp(std::vector<LayerSpec> specs, Rng& rng) : specs_(std::move(specs)) {
    build_layout();
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const LayerSpec& s = specs_[l];
        double* w = params_.data() + offsets_[l].weights;
        for (std::size_t o = 0; o < s.out; ++o) {
            std::size_t fan_in = s.in;
            if (!s.groups.empty()) {
                fan_in = 0;
                for (const InputGroup& g : s.groups) {
                    if (o >= g.out_begin && o < g.out_end) fan_in = g.in_end - g.in_begin;
                }
            }
            const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
            for (std::size_t i = 0; i < s.in; ++i) {
                const double u = uniform01(rng);
                const bool live = masks_[l].empty() || masks_[l][o * s.in + i];
                w[o * s.in + i] = live ? (2.0 * u - 1.0) * limit : 0.0;
            }
        }
    }
}

Mlp::Mlp(std::vector<LayerSpec> specs, std::span<const double> params) : specs_(std::move(specs)) {
    build_layout();
    if (params.size() != params_.size()) throw Error("parameter count does not match layer specs");
    std::copy(params.begin(), params.end(), params_.begin());
    mask_gradient(params_);
}

std::vector<LayerSpec> Mlp::dense_specs(const std::vector<std::size_t>& sizes) {
    std::vector<LayerSpec> specs;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        specs.push_back(LayerSpec{sizes[l], sizes[l + 1], l + 2 < sizes.size(), {}});
    }
    return specs;
}

void Mlp::build_layout() {
    if (specs_.empty()) throw Error("network needs at least one layer");
    std::size_t offset = 0;
    offsets_.clear();
    masks_.clear();
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const LayerSpec& s = specs_[l];
        if (l > 0 && specs_[l - 1].out != s.in) throw Error("layer dimensions do not chain");
        offsets_.push_back({offset, offset + s.in * s.out});
        offset += s.in * s.out + s.out;
        std::vector<std::uint8_t> mask;
        if (!s.groups.empty()) {
            mask.assign(s.in * s.out, 0);
            for (const InputGroup& g : s.groups) {
                if (g.in_end > s.in || g.out_end > s.out) throw Error("input group out of range");
                for (std::size_t o = g.out_begin; o < g.out_end; ++o) {
                    for (std::size_t i = g.in_begin; i < g.in_end; ++i) mask[o * s.in + i] = 1;
                }
            }
        }
        masks_.push_back(std::move(mask));
    }
    params_.assign(offset, 0.0);
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
    MlpCache cache;
    forward(input, cache);
    return cache.act.back();
}

void Mlp::forward(std::span<const double> input, MlpCache& cache) const {
    if (input.size() != input_size()) throw Error("input size mismatch");
    cache.pre.resize(specs_.size());
    cache.act.resize(specs_.size() + 1);
    cache.act[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const LayerSpec& s = specs_[l];
        const double* w = params_.data() + offsets_[l].weights;
        const double* b = params_.data() + offsets_[l].biases;
        const std::vector<double>& x = cache.act[l];
        std::vector<double>& z = cache.pre[l];
        std::vector<double>& a = cache.act[l + 1];
        z.resize(s.out);
        a.resize(s.out);
        for (std::size_t o = 0; o < s.out; ++o) {
            const double* row = w + o * s.in;
            double sum = b[o];
            for (std::size_t i = 0; i < s.in; ++i) sum += row[i] * x[i];
            z[o] = sum;
            a[o] = (s.leaky && sum < 0.0) ? kLeakySlope * sum : sum;
        }
    }
}

void Mlp::backward(const MlpCache& cache, std::span<const double> grad_output, std::span<double> grad) const {
    if (grad_output.size() != output_size()) throw Error("output gradient size mismatch");
    if (grad.size() != params_.size()) throw Error("gradient buffer size mismatch");
    std::vector<double> delta(grad_output.begin(), grad_output.end());
    std::vector<double> upstream;
    for (std::size_t l = specs_.size(); l-- > 0;) {
        const LayerSpec& s = specs_[l];
        const std::vector<double>& z = cache.pre[l];
        const std::vector<double>& x = cache.act[l];
        if (s.leaky) {
            for (std::size_t o = 0; o < s.out; ++o) {
                if (z[o] < 0.0) delta[o] *= kLeakySlope;
            }
        }
        const double* w = params_.data() + offsets_[l].weights;
        double* gw = grad.data() + offsets_[l].weights;
        double* gb = grad.data() + offsets_[l].biases;
        const std::uint8_t* mask = masks_[l].empty() ? nullptr : masks_[l].data();
        upstream.assign(s.in, 0.0);
        for (std::size_t o = 0; o < s.out; ++o) {
            const double d = delta[o];
            gb[o] += d;
            if (d == 0.0) continue;
            const double* row = w + o * s.in;
            double* grow = gw + o * s.in;
            if (mask) {
                const std::uint8_t* mrow = mask + o * s.in;
                for (std::size_t i = 0; i < s.in; ++i) {
                    if (mrow[i]) grow[i] += d * x[i];
                }
            } else {
                for (std::size_t i = 0; i < s.in; ++i) grow[i] += d * x[i];
            }
            if (l > 0) {
                for (std::size_t i = 0; i < s.in; ++i) upstream[i] += row[i] * d;
            }
        }
        delta.swap(upstream);
    }
}

void Mlp::mask_gradient(std::span<double> grad) const {
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        if (masks_[l].empty()) continue;
        double* gw = grad.data() + offsets_[l].weights;
        for (std::size_t k = 0; k < masks_[l].size(); ++k) {
            if (!masks_[l][k]) gw[k] = 0.0;
        }
    }
}

Adam::Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw Error("adam shape mismatch");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grad[k];
        m_[k] = b1 * m_[k] + (1.0 - b1) * g;
        v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
        const double m_hat = m_[k] / correction1;
        const double v_hat = v_[k] / correction2;
        params[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

ScalarLoss huber(double prediction, double target, double delta) {
    const double e = prediction - target;
    if (std::abs(e) <= delta) return {0.5 * e * e, e};
    return {delta * (std::abs(e) - 0.5 * delta), e > 0 ? delta : -delta};
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - top);
        sum += out[k];
    }
    for (double& v : out) v /= sum;
    return out;
}

CrossEntropy cross_entropy(std::span<const double> target, std::span<const double> predicted) {
    if (target.size() != predicted.size()) throw Error("cross entropy size mismatch");
    CrossEntropy ce;
    ce.grad.resize(target.size());
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double p = std::max(predicted[k], kProbabilityFloor);
        ce.loss -= target[k] * std::log(p);
        ce.grad[k] = predicted[k] > kProbabilityFloor ? -target[k] / p : 0.0;
    }
    return ce;
}

std::vector<double> softmax_cross_entropy_logit_grad(std::span<const double> target, std::span<const double> logits) {
    std::vector<double> g = softmax(logits);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] -= target[k];
    return g;
}

void save_mlp(const std::filesystem::path& path, const Mlp& net) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "mlp " << net.specs().size() << '\n';
    for (const LayerSpec& s : net.specs()) {
        out << s.in << ' ' << s.out << ' ' << (s.leaky ? "leaky" : "linear") << ' ' << s.groups.size();
        for (const InputGroup& g : s.groups) out << ' ' << g.in_begin << ' ' << g.in_end << ' ' << g.out_begin << ' ' << g.out_end;
        out << '\n';
    }
    char buf[40];
    for (double v : net.params()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

Mlp load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string tag;
    std::size_t layers = 0;
    if (!(in >> tag >> layers) || tag != "mlp") throw ParseError("not an mlp checkpoint", 1);
    std::vector<LayerSpec> specs(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        std::string act;
        std::size_t ngroups = 0;
        if (!(in >> specs[l].in >> specs[l].out >> act >> ngroups)) throw ParseError("bad layer header", l + 2);
        specs[l].leaky = act == "leaky";
        specs[l].groups.resize(ngroups);
        for (InputGroup& g : specs[l].groups) {
            if (!(in >> g.in_begin >> g.in_end >> g.out_begin >> g.out_end)) throw ParseError("bad group", l + 2);
        }
    }
    std::vector<double> params;
    double v = 0.0;
    while (in >> v) params.push_back(v);
    return Mlp(std::move(specs), params);
}

} // namespace regsig
