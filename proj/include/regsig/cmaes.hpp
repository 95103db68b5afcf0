#pragma once

#include "regsig/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

namespace regsig {

struct CmaConfig {
    std::size_t lambda = 12;
    std::size_t mu = 0;                        // 0: lambda / 2
    double sigma0 = std::sqrt(0.2);            // initial variance 0.2
    std::size_t generations = 200;
    std::size_t threads = 1;                   // parallel fitness evaluations
    double eigen_floor = 1e-14;                // relative to the largest eigenvalue
};

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and cumulative step-size
/// adaptation. Minimizes.
class CmaEs {
public:
    CmaEs(std::vector<double> x0, CmaConfig config, std::uint64_t seed);

    /// Samples lambda candidates for the current generation.
    const std::vector<std::vector<double>>& ask();
    /// Fitness of the candidates returned by the last ask(), in the same order. Non-finite
    /// values rank last.
    void tell(const std::vector<double>& fitness);

    std::size_t dimension() const { return n_; }
    std::size_t generation() const { return generation_; }
    std::size_t evaluations() const { return evaluations_; }
    std::size_t repairs() const { return repairs_; }
    double sigma() const { return sigma_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return C_; }
    const std::vector<double>& best() const { return best_x_; }
    double best_fitness() const { return best_f_; }
    const CmaConfig& config() const { return config_; }
    const std::vector<double>& weights() const { return weights_; }
    double mueff() const { return mueff_; }

    void save(const std::filesystem::path& path) const;
    /// Restores mean, sigma, covariance, paths, counters and best-so-far. Sampling draws from a
    /// stream keyed by (seed, generation), so a resumed run continues exactly.
    static CmaEs load(const std::filesystem::path& path, CmaConfig config, std::uint64_t seed);

private:
    void decompose();
    double normal();

    CmaConfig config_;
    std::size_t n_ = 0;
    std::size_t mu_ = 0;
    std::vector<double> weights_;
    double mueff_ = 0, cc_ = 0, cs_ = 0, c1_ = 0, cmu_ = 0, damps_ = 0, chin_ = 0;

    Eigen::VectorXd mean_, pc_, ps_;
    Eigen::MatrixXd C_, B_;
    Eigen::VectorXd D_;  // square roots of the eigenvalues
    double sigma_ = 0;

    std::vector<std::vector<double>> candidates_;
    std::size_t generation_ = 0;
    std::size_t evaluations_ = 0;
    std::size_t repairs_ = 0;
    std::vector<double> best_x_;
    double best_f_ = std::numeric_limits<double>::infinity();

    Rng rng_;
    bool has_spare_ = false;
    double spare_ = 0;
    std::uint64_t seed_ = 0;
};

using Fitness = std::function<double(const std::vector<double>& x, std::size_t generation, std::size_t candidate)>;

struct CmaGeneration {
    std::size_t generation = 0;   // 1-based after tell
    std::vector<double> fitness;  // per candidate
    double best_fitness = 0;      // best so far
    std::size_t evaluations = 0;
};

struct CmaResult {
    std::vector<double> best;
    double best_fitness = 0;
    std::size_t generations = 0;
    std::size_t evaluations = 0;
    std::size_t repairs = 0;
    std::vector<CmaGeneration> history;
};

/// Runs config.generations generations (or until stop returns true after a generation).
/// Candidates of one generation are evaluated on up to config.threads threads; results are
/// stored by candidate index so the outcome does not depend on scheduling.
CmaResult cma_es_tune(std::vector<double> x0, const Fitness& fitness, const CmaConfig& config, std::uint64_t seed,
                      const std::function<bool(const CmaGeneration&, const CmaEs&)>& on_generation = {});

} // namespace regsig
