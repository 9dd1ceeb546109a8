#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numeric>
#include <vector>

#include "gdfo/checkpoint.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/random.hpp"

namespace gdfo {

// Strategy constants for the standard (mu/mu_w, lambda) CMA-ES with the
// default log-rank recombination weights.
struct CmaParams {
    int dim = 0;
    int lambda_pop = 0;
    int mu = 0;
    std::vector<double> weights;  // normalized, non-increasing, sum to 1
    double mueff = 0.0;
    double cs = 0.0;
    double ds = 0.0;
    double cc = 0.0;
    double c1 = 0.0;
    double cmu = 0.0;
    double chi_n = 0.0;  // E||N(0,I)||

    static CmaParams defaults(int dim, int lambda_pop) {
        if (dim < 1) throw ConfigError("cmaes: dim must be >= 1");
        if (lambda_pop < 2) throw ConfigError("cmaes: population size must be >= 2");
        CmaParams p;
        p.dim = dim;
        p.lambda_pop = lambda_pop;
        p.mu = lambda_pop / 2;
        const double n = dim;
        std::vector<double> raw(static_cast<std::size_t>(p.mu));
        for (int i = 0; i < p.mu; ++i)
            raw[static_cast<std::size_t>(i)] =
                std::log((lambda_pop + 1) / 2.0) - std::log(i + 1.0);
        double s1 = 0.0, s2 = 0.0;
        for (double w : raw) {
            s1 += w;
            s2 += w * w;
        }
        p.mueff = s1 * s1 / s2;
        p.weights.resize(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) p.weights[i] = raw[i] / s1;
        p.cs = (p.mueff + 2.0) / (n + p.mueff + 5.0);
        p.ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mueff - 1.0) / (n + 1.0)) - 1.0) + p.cs;
        p.cc = (4.0 + p.mueff / n) / (n + 4.0 + 2.0 * p.mueff / n);
        p.c1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mueff);
        p.cmu = std::min(1.0 - p.c1,
                         2.0 * (p.mueff - 2.0 + 1.0 / p.mueff) / ((n + 2.0) * (n + 2.0) + p.mueff));
        p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        return p;
    }
};

// Ask/tell CMA-ES minimizer. Fitness evaluation happens outside; tell()
// applies the standard mean, step-size and covariance updates. The
// eigendecomposition cache is refreshed every tell.
class CmaState {
  public:
    static CmaState init(int dim, double sigma0, int population_size, std::uint64_t seed) {
        if (sigma0 <= 0.0) throw ConfigError("cmaes: sigma0 must be > 0");
        CmaState s(CmaParams::defaults(dim, population_size), sigma0, seed);
        return s;
    }

    std::vector<std::vector<double>> ask() {
        if (awaiting_tell_)
            throw UsageError("cmaes: ask() called with an un-told ask outstanding");
        const int d = p_.dim;
        std::vector<std::vector<double>> out(static_cast<std::size_t>(p_.lambda_pop));
        for (auto& cand : out) {
            Eigen::VectorXd xi(d);
            for (int i = 0; i < d; ++i) xi[i] = rng_.normal();
            Eigen::VectorXd x = mean_ + sigma_ * (B_ * (D_.cwiseProduct(xi)));
            cand.assign(x.data(), x.data() + d);
        }
        asked_ += p_.lambda_pop;
        awaiting_tell_ = true;
        return out;
    }

    void tell(const std::vector<std::vector<double>>& candidates,
              const std::vector<double>& fitnesses) {
        if (!awaiting_tell_) throw UsageError("cmaes: tell() without an outstanding ask()");
        if (candidates.size() != static_cast<std::size_t>(p_.lambda_pop))
            throw ContractError("cmaes: expected " + std::to_string(p_.lambda_pop) +
                                " candidates, got " + std::to_string(candidates.size()));
        if (fitnesses.size() != candidates.size())
            throw ContractError("cmaes: " + std::to_string(candidates.size()) + " candidates but " +
                                std::to_string(fitnesses.size()) + " fitnesses");
        for (const auto& c : candidates)
            if (c.size() != static_cast<std::size_t>(p_.dim))
                throw ContractError("cmaes: candidate dimension mismatch");

        std::vector<double> fit = fitnesses;
        for (auto& f : fit)
            if (!std::isfinite(f)) {
                ++nonfinite_count_;
                std::cerr << "cmaes: warning: non-finite fitness treated as worst\n";
                f = std::numeric_limits<double>::infinity();
            }

        // rank candidates, stable so equal fitnesses keep their given order
        std::vector<std::size_t> order(fit.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

        const int d = p_.dim;
        const Eigen::VectorXd old_mean = mean_;

        Eigen::VectorXd yw = Eigen::VectorXd::Zero(d);
        std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(p_.mu));
        for (int i = 0; i < p_.mu; ++i) {
            const auto& xi = candidates[order[static_cast<std::size_t>(i)]];
            Eigen::VectorXd y(d);
            for (int j = 0; j < d; ++j) y[j] = (xi[static_cast<std::size_t>(j)] - old_mean[j]) / sigma_;
            ys[static_cast<std::size_t>(i)] = y;
            yw += p_.weights[static_cast<std::size_t>(i)] * y;
        }
        mean_ = old_mean + sigma_ * yw;

        // step-size path and CSA update
        Eigen::VectorXd c_inv_sqrt_yw = B_ * (D_.cwiseInverse().cwiseProduct(B_.transpose() * yw));
        ps_ = (1.0 - p_.cs) * ps_ + std::sqrt(p_.cs * (2.0 - p_.cs) * p_.mueff) * c_inv_sqrt_yw;
        const double ps_norm = ps_.norm();
        const double expected = std::sqrt(1.0 - std::pow(1.0 - p_.cs, 2.0 * (generation_ + 1)));
        const bool hsig = ps_norm / expected / p_.chi_n < 1.4 + 2.0 / (d + 1.0);

        // covariance path, rank-one and rank-mu updates
        pc_ = (1.0 - p_.cc) * pc_;
        if (hsig) pc_ += std::sqrt(p_.cc * (2.0 - p_.cc) * p_.mueff) * yw;
        const double hsig_correction = hsig ? 0.0 : p_.cc * (2.0 - p_.cc);
        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < p_.mu; ++i)
            rank_mu += p_.weights[static_cast<std::size_t>(i)] *
                       (ys[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(i)].transpose());
        C_ = (1.0 - p_.c1 - p_.cmu) * C_ +
             p_.c1 * (pc_ * pc_.transpose() + hsig_correction * C_) + p_.cmu * rank_mu;

        sigma_ *= std::exp((p_.cs / p_.ds) * (ps_norm / p_.chi_n - 1.0));

        ++generation_;
        awaiting_tell_ = false;
        refresh_eigensystem();
    }

    int dim() const { return p_.dim; }
    const CmaParams& params() const { return p_; }
    double sigma() const { return sigma_; }
    long generation() const { return generation_; }
    long candidates_asked() const { return asked_; }
    bool awaiting_tell() const { return awaiting_tell_; }
    long repair_count() const { return repair_count_; }
    long nonfinite_count() const { return nonfinite_count_; }

    std::vector<double> mean() const { return {mean_.data(), mean_.data() + p_.dim}; }

    std::vector<double> covariance() const {
        std::vector<double> out(static_cast<std::size_t>(p_.dim) * static_cast<std::size_t>(p_.dim));
        for (int r = 0; r < p_.dim; ++r)
            for (int c = 0; c < p_.dim; ++c)
                out[static_cast<std::size_t>(r) * static_cast<std::size_t>(p_.dim) +
                    static_cast<std::size_t>(c)] = C_(r, c);
        return out;
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.put_scalar("dim", p_.dim);
        ck.put_scalar("lambda_pop", p_.lambda_pop);
        ck.put_scalar("sigma", sigma_);
        ck.put_scalar("generation", static_cast<double>(generation_));
        ck.put_scalar("asked", static_cast<double>(asked_));
        ck.put_scalar("awaiting_tell", awaiting_tell_ ? 1.0 : 0.0);
        ck.put_scalar("repair_count", static_cast<double>(repair_count_));
        ck.put_scalar("nonfinite_count", static_cast<double>(nonfinite_count_));
        ck.put_scalar("rng_seed", static_cast<double>(rng_.seed()));
        ck.put_scalar("rng_draws", static_cast<double>(rng_.draws()));
        const auto d = static_cast<std::uint64_t>(p_.dim);
        ck.put_tensor("mean", {d}, mean());
        ck.put_tensor("C", {d, d}, covariance());
        ck.put_tensor("ps", {d}, {ps_.data(), ps_.data() + p_.dim});
        ck.put_tensor("pc", {d}, {pc_.data(), pc_.data() + p_.dim});
        return ck;
    }

    static CmaState from_checkpoint(const Checkpoint& ck) {
        const int dim = static_cast<int>(ck.scalar("dim"));
        const int lambda = static_cast<int>(ck.scalar("lambda_pop"));
        CmaState s(CmaParams::defaults(dim, lambda), ck.scalar("sigma"),
                   static_cast<std::uint64_t>(ck.scalar("rng_seed")));
        s.rng_ = RandomEngine::restore(static_cast<std::uint64_t>(ck.scalar("rng_seed")),
                                       static_cast<std::uint64_t>(ck.scalar("rng_draws")));
        s.generation_ = static_cast<long>(ck.scalar("generation"));
        s.asked_ = static_cast<long>(ck.scalar("asked"));
        s.awaiting_tell_ = ck.scalar("awaiting_tell") != 0.0;
        s.repair_count_ = static_cast<long>(ck.scalar("repair_count"));
        s.nonfinite_count_ = static_cast<long>(ck.scalar("nonfinite_count"));
        const auto& mean = ck.tensor("mean").data;
        const auto& C = ck.tensor("C").data;
        const auto& ps = ck.tensor("ps").data;
        const auto& pc = ck.tensor("pc").data;
        for (int i = 0; i < dim; ++i) {
            s.mean_[i] = mean[static_cast<std::size_t>(i)];
            s.ps_[i] = ps[static_cast<std::size_t>(i)];
            s.pc_[i] = pc[static_cast<std::size_t>(i)];
        }
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                s.C_(r, c) = C[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) +
                               static_cast<std::size_t>(c)];
        s.refresh_eigensystem();
        return s;
    }

  private:
    CmaState(CmaParams p, double sigma0, std::uint64_t seed)
        : p_(p),
          sigma_(sigma0),
          mean_(Eigen::VectorXd::Zero(p.dim)),
          C_(Eigen::MatrixXd::Identity(p.dim, p.dim)),
          B_(Eigen::MatrixXd::Identity(p.dim, p.dim)),
          D_(Eigen::VectorXd::Ones(p.dim)),
          ps_(Eigen::VectorXd::Zero(p.dim)),
          pc_(Eigen::VectorXd::Zero(p.dim)),
          rng_(seed) {}

    void refresh_eigensystem() {
        C_ = 0.5 * (C_ + C_.transpose().eval());  // keep exactly symmetric
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C_);
        if (es.info() != Eigen::Success) throw NumericError("cmaes: eigendecomposition failed");
        Eigen::VectorXd evals = es.eigenvalues();
        const double max_ev = evals.maxCoeff();
        const double floor = 1e-14 * max_ev;
        bool repaired = false;
        for (int i = 0; i < evals.size(); ++i)
            if (evals[i] < floor) {
                evals[i] = floor;
                repaired = true;
            }
        if (repaired) {
            ++repair_count_;
            C_ = es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
            C_ = 0.5 * (C_ + C_.transpose().eval());
        }
        B_ = es.eigenvectors();
        D_ = evals.cwiseSqrt();
    }

    CmaParams p_;
    double sigma_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd C_;
    Eigen::MatrixXd B_;   // eigenvectors of C
    Eigen::VectorXd D_;   // sqrt of eigenvalues
    Eigen::VectorXd ps_;  // step-size evolution path
    Eigen::VectorXd pc_;  // covariance evolution path
    long generation_ = 0;
    long asked_ = 0;
    bool awaiting_tell_ = false;
    long repair_count_ = 0;
    long nonfinite_count_ = 0;
    RandomEngine rng_;
};

}  // namespace gdfo
