#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gdfo/checkpoint.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"
#include "gdfo/random.hpp"

namespace gdfo {

enum class PromptRole { kP0 = 0, kGd = 1, kAz = 2, kCombined = 3, kRandom = 4 };

// A flattened continuous prompt in R^D, tagged with which part of the
// combination it plays.
struct PromptVector {
    std::vector<double> values;
    PromptRole role = PromptRole::kCombined;

    std::size_t dim() const { return values.size(); }
    std::uint64_t checksum() const { return fnv1a64(values); }

    void check_finite(const char* what) const {
        for (double v : values)
            if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite entry");
    }
};

// Fixed random projection A in R^{Dxd}, stored row-major. Immutable after
// creation; the checksum lets long-running episodes re-verify that.
class ProjectionMatrix {
  public:
    ProjectionMatrix() = default;

    std::size_t rows() const { return D_; }
    std::size_t cols() const { return d_; }
    double scale() const { return scale_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<double>& values() const { return values_; }
    std::uint64_t checksum() const { return fnv1a64(values_); }

    // A·z
    std::vector<double> apply(const std::vector<double>& z) const {
        if (z.size() != d_)
            throw ContractError("projection: z has dimension " + std::to_string(z.size()) +
                                ", expected " + std::to_string(d_));
        std::vector<double> out(D_, 0.0);
        for (std::size_t r = 0; r < D_; ++r) {
            const double* row = values_.data() + r * d_;
            double acc = 0.0;
            for (std::size_t c = 0; c < d_; ++c) acc += row[c] * z[c];
            out[r] = acc;
        }
        return out;
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.put_scalar("D", static_cast<double>(D_));
        ck.put_scalar("d", static_cast<double>(d_));
        ck.put_scalar("scale", scale_);
        ck.put_scalar("seed", static_cast<double>(seed_));
        ck.put_tensor("A", {D_, d_}, values_);
        return ck;
    }

    static ProjectionMatrix from_checkpoint(const Checkpoint& ck) {
        ProjectionMatrix m;
        m.D_ = static_cast<std::size_t>(ck.scalar("D"));
        m.d_ = static_cast<std::size_t>(ck.scalar("d"));
        m.scale_ = ck.scalar("scale");
        m.seed_ = static_cast<std::uint64_t>(ck.scalar("seed"));
        m.values_ = ck.tensor("A").data;
        return m;
    }

    friend ProjectionMatrix make_projection(std::size_t D, std::size_t d, std::uint64_t seed,
                                            double scale);

  private:
    std::size_t D_ = 0, d_ = 0;
    double scale_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<double> values_;
};

// Entries i.i.d. Normal(0, scale^2); scale <= 0 selects the default 1/sqrt(d),
// which keeps ||Az|| commensurate with ||p0||.
inline ProjectionMatrix make_projection(std::size_t D, std::size_t d, std::uint64_t seed,
                                        double scale = 0.0) {
    if (d < 1 || D < d)
        throw ConfigError("projection: need D >= d >= 1, got D=" + std::to_string(D) +
                          " d=" + std::to_string(d));
    ProjectionMatrix m;
    m.D_ = D;
    m.d_ = d;
    m.scale_ = scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(d));
    m.seed_ = seed;
    m.values_.resize(D * d);
    RandomEngine rng(seed);
    for (auto& v : m.values_) v = rng.normal(0.0, m.scale_);
    return m;
}

// n uniformly sampled vocabulary tokens, their embedding rows concatenated
// into R^D. Drawn from the teacher's table: the combined prompt is consumed
// by the teacher.
inline PromptVector sample_initial_prompt(const ModelParams& params, int n, std::uint64_t seed) {
    if (n != params.n_prompt_tokens)
        throw ContractError("initial prompt: n=" + std::to_string(n) + " but model expects " +
                            std::to_string(params.n_prompt_tokens));
    RandomEngine rng(seed);
    PromptVector p;
    p.role = PromptRole::kP0;
    p.values.reserve(static_cast<std::size_t>(params.prompt_width()));
    const auto e = static_cast<std::size_t>(params.embed_dim);
    for (int i = 0; i < n; ++i) {
        const auto id = static_cast<std::size_t>(rng.uniform_int(0, params.vocab_size - 1));
        const double* row = params.embedding.values().data() + id * e;
        p.values.insert(p.values.end(), row, row + e);
    }
    return p;
}

// Fresh random prompt p_r for distillation; same mechanics as p0 but with a
// caller-owned engine so every draw differs.
inline PromptVector sample_random_prompt(const ModelParams& params, int n, RandomEngine& rng) {
    if (n != params.n_prompt_tokens)
        throw ContractError("random prompt: n=" + std::to_string(n) + " but model expects " +
                            std::to_string(params.n_prompt_tokens));
    PromptVector p;
    p.role = PromptRole::kRandom;
    p.values.reserve(static_cast<std::size_t>(params.prompt_width()));
    const auto e = static_cast<std::size_t>(params.embed_dim);
    for (int i = 0; i < n; ++i) {
        const auto id = static_cast<std::size_t>(rng.uniform_int(0, params.vocab_size - 1));
        const double* row = params.embedding.values().data() + id * e;
        p.values.insert(p.values.end(), row, row + e);
    }
    return p;
}

// p = alpha * p_GD + (1 - alpha) * (p0 + A z). The endpoints reproduce their
// operand bit-for-bit.
inline PromptVector combine(const PromptVector& p_gd, const PromptVector& p0,
                            const ProjectionMatrix& A, const std::vector<double>& z, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("combine: alpha must be in [0,1], got " + std::to_string(alpha));
    if (p_gd.dim() != p0.dim() || p0.dim() != A.rows())
        throw ContractError("combine: dimension mismatch, p_GD " + std::to_string(p_gd.dim()) +
                            ", p0 " + std::to_string(p0.dim()) + ", A rows " +
                            std::to_string(A.rows()));
    PromptVector out;
    out.role = PromptRole::kCombined;
    if (alpha == 1.0) {
        out.values = p_gd.values;
        return out;
    }
    std::vector<double> az = A.apply(z);
    if (alpha == 0.0) {
        out.values.resize(p0.dim());
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = p0.values[i] + az[i];
        return out;
    }
    out.values.resize(p0.dim());
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = alpha * p_gd.values[i] + (1.0 - alpha) * (p0.values[i] + az[i]);
    return out;
}

}  // namespace gdfo
