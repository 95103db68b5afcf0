#include "regsig/cmaes.hpp"

#include "regsig/error.hpp"
#include "regsig/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace regsig {

CmaEs::CmaEs(std::vector<double> x0, CmaConfig config, std::uint64_t seed) : config_(config), seed_(seed) {
    n_ = x0.size();
    if (n_ == 0) throw Error("CMA-ES needs a non-empty start point");
    if (config_.lambda < 2) throw Error("CMA-ES population must hold at least 2 candidates");
    if (!(config_.sigma0 > 0)) throw Error("CMA-ES initial step size must be positive");
    mu_ = config_.mu == 0 ? config_.lambda / 2 : config_.mu;
    if (mu_ == 0 || mu_ > config_.lambda) throw Error("CMA-ES parent count out of range");

    const double n = static_cast<double>(n_);
    weights_.resize(mu_);
    for (std::size_t i = 0; i < mu_; ++i)
        weights_[i] = std::log(static_cast<double>(mu_) + 0.5) - std::log(static_cast<double>(i + 1));
    const double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    double wsq = 0;
    for (double& w : weights_) {
        w /= wsum;
        wsq += w * w;
    }
    mueff_ = 1.0 / wsq;

    cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
    cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
    c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
    damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
    chin_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    mean_ = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(n_));
    pc_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    ps_ = pc_;
    C_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    B_ = C_;
    D_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_));
    sigma_ = config_.sigma0;
    best_x_ = x0;
}

// Box-Muller on uniform01, so draws match across standard libraries.
double CmaEs::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0;
    do {
        u1 = uniform01(rng_);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

const std::vector<std::vector<double>>& CmaEs::ask() {
    rng_ = derive_rng(seed_, {0x434d41ULL, generation_});
    has_spare_ = false;
    candidates_.assign(config_.lambda, std::vector<double>(n_));
    Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
    for (auto& c : candidates_) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
        const Eigen::VectorXd x = mean_ + sigma_ * (B_ * D_.cwiseProduct(z));
        std::copy(x.data(), x.data() + x.size(), c.begin());
    }
    return candidates_;
}

void CmaEs::tell(const std::vector<double>& fitness) {
    if (candidates_.size() != config_.lambda || fitness.size() != config_.lambda)
        throw Error("tell expects one fitness per candidate of the last ask");
    evaluations_ += fitness.size();

    std::vector<double> ranked(fitness);
    for (double& f : ranked) {
        if (!std::isfinite(f)) f = std::numeric_limits<double>::infinity();
    }
    std::vector<std::size_t> order(config_.lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranked[a] < ranked[b]; });

    if (ranked[order[0]] < best_f_) {
        best_f_ = ranked[order[0]];
        best_x_ = candidates_[order[0]];
    }

    const auto N = static_cast<Eigen::Index>(n_);
    const Eigen::VectorXd old = mean_;
    Eigen::MatrixXd steps(N, static_cast<Eigen::Index>(mu_));
    mean_.setZero();
    for (std::size_t i = 0; i < mu_; ++i) {
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(candidates_[order[i]].data(), N);
        mean_ += weights_[i] * x;
        steps.col(static_cast<Eigen::Index>(i)) = (x - old) / sigma_;
    }
    const Eigen::VectorXd yw = (mean_ - old) / sigma_;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const Eigen::VectorXd whitened = B_ * (B_.transpose() * yw).cwiseQuotient(D_);
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * whitened;
    const double gen = static_cast<double>(generation_ + 1);
    const double ps_norm = ps_.norm() / std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * gen));
    const bool hsig = ps_norm / chin_ < 1.4 + 2.0 / (static_cast<double>(n_) + 1.0);
    pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * yw;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t i = 0; i < mu_; ++i) {
        const auto col = steps.col(static_cast<Eigen::Index>(i));
        rank_mu.noalias() += weights_[i] * col * col.transpose();
    }
    const double hsig_correction = hsig ? 0.0 : cc_ * (2.0 - cc_);
    C_ = (1.0 - c1_ - cmu_) * C_ + c1_ * (pc_ * pc_.transpose() + hsig_correction * C_) + cmu_ * rank_mu;

    sigma_ *= std::exp((cs_ / damps_) * (ps_.norm() / chin_ - 1.0));
    ++generation_;
    decompose();
}

void CmaEs::decompose() {
    C_ = 0.5 * (C_ + C_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C_);
    if (eig.info() != Eigen::Success) throw Error("CMA-ES covariance eigendecomposition failed");
    Eigen::VectorXd values = eig.eigenvalues();
    const double top = std::max(values.maxCoeff(), std::numeric_limits<double>::min());
    const double floor = top * config_.eigen_floor;
    bool repaired = false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!(values[i] >= floor)) {
            values[i] = floor;
            repaired = true;
        }
    }
    B_ = eig.eigenvectors();
    if (repaired) {
        ++repairs_;
        C_ = B_ * values.asDiagonal() * B_.transpose();
        C_ = 0.5 * (C_ + C_.transpose());
    }
    D_ = values.cwiseSqrt();
}

namespace {

void write_vector(std::ostream& out, const char* name, const Eigen::VectorXd& v) {
    out << name;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
    out << '\n';
}

Eigen::VectorXd read_vector(std::istream& in, const char* name, std::size_t n) {
    std::string tag;
    in >> tag;
    if (tag != name) throw Error(std::string("CMA state: expected '") + name + "'");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) in >> v[i];
    if (!in) throw Error(std::string("CMA state: truncated '") + name + "'");
    return v;
}

} // namespace

void CmaEs::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << std::setprecision(17);
    out << "cma " << n_ << ' ' << generation_ << ' ' << evaluations_ << ' ' << repairs_ << '\n';
    out << "sigma " << sigma_ << '\n';
    out << "best_fitness " << best_f_ << '\n';
    write_vector(out, "best", Eigen::Map<const Eigen::VectorXd>(best_x_.data(), static_cast<Eigen::Index>(n_)));
    write_vector(out, "mean", mean_);
    write_vector(out, "pc", pc_);
    write_vector(out, "ps", ps_);
    out << "cov\n";
    for (Eigen::Index r = 0; r < C_.rows(); ++r) {
        for (Eigen::Index c = 0; c < C_.cols(); ++c) out << (c ? " " : "") << C_(r, c);
        out << '\n';
    }
}

CmaEs CmaEs::load(const std::filesystem::path& path, CmaConfig config, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::string tag;
    std::size_t n = 0, gen = 0, evals = 0, repairs = 0;
    in >> tag >> n >> gen >> evals >> repairs;
    if (tag != "cma" || !in || n == 0) throw Error("CMA state: bad header in " + path.string());
    CmaEs es(std::vector<double>(n, 0.0), config, seed);
    in >> tag >> es.sigma_;
    if (tag != "sigma") throw Error("CMA state: expected 'sigma'");
    in >> tag;
    if (tag != "best_fitness") throw Error("CMA state: expected 'best_fitness'");
    // "inf" is not read back by operator>>.
    std::string bf;
    in >> bf;
    es.best_f_ = bf == "inf" ? std::numeric_limits<double>::infinity() : std::stod(bf);
    const Eigen::VectorXd best = read_vector(in, "best", n);
    es.best_x_.assign(best.data(), best.data() + best.size());
    es.mean_ = read_vector(in, "mean", n);
    es.pc_ = read_vector(in, "pc", n);
    es.ps_ = read_vector(in, "ps", n);
    in >> tag;
    if (tag != "cov") throw Error("CMA state: expected 'cov'");
    for (Eigen::Index r = 0; r < es.C_.rows(); ++r)
        for (Eigen::Index c = 0; c < es.C_.cols(); ++c) in >> es.C_(r, c);
    if (!in) throw Error("CMA state: truncated covariance");
    es.generation_ = gen;
    es.evaluations_ = evals;
    es.repairs_ = repairs;
    es.decompose();
    es.repairs_ = repairs;
    return es;
}

CmaResult cma_es_tune(std::vector<double> x0, const Fitness& fitness, const CmaConfig& config, std::uint64_t seed,
                      const std::function<bool(const CmaGeneration&, const CmaEs&)>& on_generation) {
    CmaEs es(std::move(x0), config, seed);
    CmaResult result;
    const std::size_t threads = config.threads;

    for (std::size_t g = 0; g < config.generations; ++g) {
        const auto& cands = es.ask();
        std::vector<double> f(cands.size(), 0.0);
        const std::size_t gen = es.generation();
        parallel_for(cands.size(), threads, [&](std::size_t i) { f[i] = fitness(cands[i], gen, i); });
        es.tell(f);

        CmaGeneration record{es.generation(), f, es.best_fitness(), es.evaluations()};
        result.history.push_back(record);
        if (on_generation && on_generation(record, es)) break;
    }
    result.best = es.best();
    result.best_fitness = es.best_fitness();
    result.generations = es.generation();
    result.evaluations = es.evaluations();
    result.repairs = es.repairs();
    return result;
}

} // namespace regsig
