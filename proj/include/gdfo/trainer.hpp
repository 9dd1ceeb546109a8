#pragma once

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "gdfo/autodiff.hpp"
#include "gdfo/blackbox.hpp"
#include "gdfo/cmaes.hpp"
#include "gdfo/distill.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"
#include "gdfo/promptspace.hpp"

namespace gdfo {

// Dimensions, weights and budgets of one optimization episode.
struct EpisodeConfig {
    int n_prompt_tokens = 5;
    int embed_dim = 16;
    int subspace_dim = 10;       // d
    double alpha = 0.5;          // balance between p_GD and p0 + Az
    int population_size = 8;
    std::uint64_t budget = 2000;  // N: metered calls for the joint loop plus inference
    int train_steps = 150;
    double sigma0 = 1.0;
    double generator_lr = 0.2;
    double projection_scale = 0.0;  // 0 selects 1/sqrt(d)
    bool parallel_candidates = true;
    std::uint64_t seed = 1;

    int prompt_width() const { return n_prompt_tokens * embed_dim; }

    void validate() const {
        if (n_prompt_tokens < 1 || embed_dim < 1) throw ConfigError("episode: dims must be positive");
        if (subspace_dim < 1 || subspace_dim > prompt_width())
            throw ConfigError("episode: need 1 <= d <= D");
        if (alpha < 0.0 || alpha > 1.0) throw ConfigError("episode: alpha must be in [0,1]");
        if (population_size < 2) throw ConfigError("episode: population size must be >= 2");
        if (sigma0 <= 0.0) throw ConfigError("episode: sigma0 must be > 0");
        if (train_steps < 0) throw ConfigError("episode: train_steps must be >= 0");
    }
};

// G_mu: one fully connected layer from the pooled instance representation
// (mean of the student's token embeddings) to prompt space.
struct PromptGenerator {
    Tensor weight;  // [e, D]
    Tensor bias;    // [D]
    int embed_dim = 0;
    int prompt_width = 0;

    static PromptGenerator zeros(int embed_dim, int prompt_width) {
        PromptGenerator g;
        g.embed_dim = embed_dim;
        g.prompt_width = prompt_width;
        g.weight = Tensor::zeros({static_cast<std::size_t>(embed_dim),
                                  static_cast<std::size_t>(prompt_width)});
        g.bias = Tensor::zeros({static_cast<std::size_t>(prompt_width)});
        g.weight.set_requires_grad(true);
        g.bias.set_requires_grad(true);
        return g;
    }

    std::vector<Tensor> params() { return {weight, bias}; }
};

// p_GD for one instance; differentiable with respect to the generator. The
// pool is a multiset function, so ids are summed in sorted order and two
// instances with equal token multisets produce bit-identical prompts.
inline Tensor generate_prompt(const PromptGenerator& gen, const std::vector<int>& instance,
                              const ModelParams& student) {
    if (instance.empty()) throw ContractError("generate_prompt: empty instance");
    if (gen.embed_dim != student.embed_dim)
        throw ContractError("generate_prompt: generator embed dim " + std::to_string(gen.embed_dim) +
                            " does not match student " + std::to_string(student.embed_dim));
    std::vector<int> ids = instance;
    std::sort(ids.begin(), ids.end());
    Tensor pooled = mean_rows(take_rows(student.embedding, ids));
    return add(matmul(pooled, gen.weight), gen.bias);
}

struct StepMetrics {
    int step = 0;
    std::uint64_t api_calls_used = 0;
    double best_teacher_ce = 0.0;
    double pop_mean_ce = 0.0;
    double pop_min_ce = 0.0;
    double student_ce = 0.0;
    double train_accuracy = 0.0;
};

inline void write_train_csv(std::ostream& os, const std::vector<StepMetrics>& rows) {
    os << "step,api_calls_used,best_teacher_ce,pop_mean_ce,pop_min_ce,student_ce,train_accuracy\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.step << ',' << r.api_calls_used << ',' << r.best_teacher_ce << ',' << r.pop_mean_ce
           << ',' << r.pop_min_ce << ',' << r.student_ce << ',' << r.train_accuracy << '\n';
}

struct TrainState {
    EpisodeConfig cfg;
    CmaState cma;
    PromptGenerator generator;
    ModelParams student;  // frozen surrogate
    PromptVector p0;
    ProjectionMatrix projection;
    std::vector<double> best_z;
    double best_fitness = std::numeric_limits<double>::infinity();
    std::uint64_t api_calls_used = 0;
    int step = 0;

    std::uint64_t p0_checksum = 0;
    std::uint64_t projection_checksum = 0;
    std::uint64_t student_checksum = 0;

    // Episode-start checksums are re-verified before every evaluation.
    void verify_frozen() const {
        if (p0.checksum() != p0_checksum)
            throw ContractError("train state: p0 changed after episode start");
        if (projection.checksum() != projection_checksum)
            throw ContractError("train state: projection changed after episode start");
        if (student.checksum() != student_checksum)
            throw ContractError("train state: student changed during phase 2");
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.put_scalar("n_prompt_tokens", cfg.n_prompt_tokens);
        ck.put_scalar("embed_dim", cfg.embed_dim);
        ck.put_scalar("subspace_dim", cfg.subspace_dim);
        ck.put_scalar("alpha", cfg.alpha);
        ck.put_scalar("population_size", cfg.population_size);
        ck.put_scalar("budget", static_cast<double>(cfg.budget));
        ck.put_scalar("train_steps", cfg.train_steps);
        ck.put_scalar("sigma0", cfg.sigma0);
        ck.put_scalar("generator_lr", cfg.generator_lr);
        ck.put_scalar("projection_scale", cfg.projection_scale);
        ck.put_scalar("parallel_candidates", cfg.parallel_candidates ? 1.0 : 0.0);
        ck.put_scalar("seed", static_cast<double>(cfg.seed));
        ck.put_scalar("best_fitness", best_fitness);
        ck.put_scalar("api_calls_used", static_cast<double>(api_calls_used));
        ck.put_scalar("step", step);
        ck.put_tensor("best_z", {best_z.size()}, best_z);
        ck.put_tensor("p0", {p0.values.size()}, p0.values);
        ck.put_tensor("generator_weight",
                      {static_cast<std::uint64_t>(generator.embed_dim),
                       static_cast<std::uint64_t>(generator.prompt_width)},
                      generator.weight.values());
        ck.put_tensor("generator_bias", {static_cast<std::uint64_t>(generator.prompt_width)},
                      generator.bias.values());
        merge(ck, "cma/", cma.to_checkpoint());
        merge(ck, "projection/", projection.to_checkpoint());
        merge(ck, "student/", student.to_checkpoint());
        return ck;
    }

    static TrainState from_checkpoint(const Checkpoint& ck) {
        EpisodeConfig cfg;
        cfg.n_prompt_tokens = static_cast<int>(ck.scalar("n_prompt_tokens"));
        cfg.embed_dim = static_cast<int>(ck.scalar("embed_dim"));
        cfg.subspace_dim = static_cast<int>(ck.scalar("subspace_dim"));
        cfg.alpha = ck.scalar("alpha");
        cfg.population_size = static_cast<int>(ck.scalar("population_size"));
        cfg.budget = static_cast<std::uint64_t>(ck.scalar("budget"));
        cfg.train_steps = static_cast<int>(ck.scalar("train_steps"));
        cfg.sigma0 = ck.scalar("sigma0");
        cfg.generator_lr = ck.scalar("generator_lr");
        cfg.projection_scale = ck.scalar("projection_scale");
        cfg.parallel_candidates = ck.scalar("parallel_candidates") != 0.0;
        cfg.seed = static_cast<std::uint64_t>(ck.scalar("seed"));

        TrainState st{cfg,
                      CmaState::from_checkpoint(extract(ck, "cma/")),
                      PromptGenerator::zeros(cfg.embed_dim, cfg.prompt_width()),
                      ModelParams::from_checkpoint(extract(ck, "student/")),
                      PromptVector{ck.tensor("p0").data, PromptRole::kP0},
                      ProjectionMatrix::from_checkpoint(extract(ck, "projection/"))};
        st.generator.weight.mutable_values() = ck.tensor("generator_weight").data;
        st.generator.bias.mutable_values() = ck.tensor("generator_bias").data;
        st.best_z = ck.tensor("best_z").data;
        st.best_fitness = ck.scalar("best_fitness");
        st.api_calls_used = static_cast<std::uint64_t>(ck.scalar("api_calls_used"));
        st.step = static_cast<int>(ck.scalar("step"));
        st.student.set_trainable(false);
        st.p0_checksum = st.p0.checksum();
        st.projection_checksum = st.projection.checksum();
        st.student_checksum = st.student.checksum();
        return st;
    }

  private:
    static void merge(Checkpoint& dst, const std::string& prefix, const Checkpoint& src) {
        for (const auto& [name, v] : src.scalars()) dst.put_scalar(prefix + name, v);
        for (const auto& t : src.tensors()) dst.put_tensor(prefix + t.name, t.shape, t.data);
    }

    static Checkpoint extract(const Checkpoint& src, const std::string& prefix) {
        Checkpoint out;
        for (const auto& [name, v] : src.scalars())
            if (name.rfind(prefix, 0) == 0) out.put_scalar(name.substr(prefix.size()), v);
        for (const auto& t : src.tensors())
            if (t.name.rfind(prefix, 0) == 0) out.put_tensor(t.name.substr(prefix.size()), t.shape, t.data);
        return out;
    }
};

inline TrainState init_train_state(const EpisodeConfig& cfg, ModelParams student, PromptVector p0,
                                   ProjectionMatrix projection) {
    cfg.validate();
    if (p0.dim() != static_cast<std::size_t>(cfg.prompt_width()))
        throw ContractError("train state: p0 has dimension " + std::to_string(p0.dim()) +
                            ", config expects " + std::to_string(cfg.prompt_width()));
    if (projection.rows() != p0.dim() ||
        projection.cols() != static_cast<std::size_t>(cfg.subspace_dim))
        throw ContractError("train state: projection shape does not match config");
    student.set_trainable(false);
    TrainState st{cfg,
                  CmaState::init(cfg.subspace_dim, cfg.sigma0, cfg.population_size,
                                 derive_seed(cfg.seed, "cma")),
                  PromptGenerator::zeros(cfg.embed_dim, cfg.prompt_width()),
                  std::move(student),
                  std::move(p0),
                  std::move(projection)};
    st.best_z.assign(static_cast<std::size_t>(cfg.subspace_dim), 0.0);
    st.p0_checksum = st.p0.checksum();
    st.projection_checksum = st.projection.checksum();
    st.student_checksum = st.student.checksum();
    return st;
}

namespace detail {

inline double cross_entropy_of(const std::vector<double>& logits, int label) {
    const auto probs = softmax_values(logits);
    return -std::log(probs[static_cast<std::size_t>(label)]);
}

}  // namespace detail

// The generator half of a joint step: rebuild p from the current best_z,
// run the frozen student, backprop the mean CE into mu only, one SGD step.
// No teacher access: gradients cannot involve black-box outputs.
inline void generator_step(TrainState& state, const std::vector<Instance>& batch,
                           StepMetrics& metrics) {
    const double alpha = state.cfg.alpha;
    std::vector<double> base = state.projection.apply(state.best_z);
    for (std::size_t i = 0; i < base.size(); ++i)
        base[i] = (1.0 - alpha) * (state.p0.values[i] + base[i]);
    Tensor base_t = Tensor::from({base.size()}, base);

    Tensor total;
    int hits = 0;
    bool first = true;
    for (const auto& inst : batch) {
        Tensor p_gd = generate_prompt(state.generator, inst.token_ids, state.student);
        Tensor prompt = add(scale(p_gd, alpha), base_t);
        Tensor logits = forward(state.student, prompt, inst.token_ids);
        hits += argmax_lowest(logits.values()) == inst.label;
        Tensor ce = class_cross_entropy(logits, inst.label);
        total = first ? ce : add(total, ce);
        first = false;
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    metrics.student_ce = loss.item();
    metrics.train_accuracy = static_cast<double>(hits) / static_cast<double>(batch.size());
    backward(loss);
    auto params = state.generator.params();
    sgd_step(params, state.cfg.generator_lr);
}

// One generation of Algorithm 1's phase 2:
//   (a) ask CMA-ES for a population of z candidates;
//   (b) evaluate each candidate's combined prompts on the whole batch against
//       the teacher — one metered call per candidate;
//   (c) tell CMA-ES the mean-CE fitnesses;
//   (d) update the generator through the frozen student at the current best_z;
//   (e) record the new best_z if this generation improved it.
// On teacher failure or budget exhaustion the state is left untouched.
inline StepMetrics joint_train_step(TrainState& state, const std::vector<Instance>& batch,
                                    BlackBoxHandle& teacher) {
    if (batch.empty()) throw ContractError("joint_train_step: empty batch");
    state.verify_frozen();
    const auto lambda_pop = static_cast<std::uint64_t>(state.cfg.population_size);
    if (state.api_calls_used + lambda_pop > state.cfg.budget)
        throw BudgetError("joint_train_step: need " + std::to_string(lambda_pop) +
                          " calls but only " +
                          std::to_string(state.cfg.budget - state.api_calls_used) + " remain");

    StepMetrics metrics;
    metrics.step = state.step;

    // precompute per-instance p_GD values once per generation
    std::vector<std::vector<double>> p_gd(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j)
        p_gd[j] = generate_prompt(state.generator, batch[j].token_ids, state.student).values();

    const Checkpoint cma_snapshot = state.cma.to_checkpoint();
    auto candidates = state.cma.ask();

    auto eval_candidate = [&](const std::vector<double>& z) {
        InferenceRequest req;
        req.request_id = teacher.take_request_id();
        req.items.reserve(batch.size());
        for (std::size_t j = 0; j < batch.size(); ++j) {
            PromptVector p = combine({p_gd[j], PromptRole::kGd}, state.p0, state.projection, z,
                                     state.cfg.alpha);
            req.items.push_back({std::move(p.values), batch[j].token_ids});
        }
        const auto resp = teacher.query(req);
        double ce = 0.0;
        for (std::size_t j = 0; j < batch.size(); ++j)
            ce += detail::cross_entropy_of(resp.logits[j], batch[j].label);
        return ce / static_cast<double>(batch.size());
    };

    std::vector<double> fitnesses(candidates.size());
    try {
        if (state.cfg.parallel_candidates) {
            std::vector<std::future<double>> futures;
            futures.reserve(candidates.size());
            for (const auto& z : candidates)
                futures.push_back(std::async(std::launch::async, eval_candidate, std::cref(z)));
            std::exception_ptr first_error;
            for (std::size_t i = 0; i < futures.size(); ++i) {
                try {
                    fitnesses[i] = futures[i].get();
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        } else {
            for (std::size_t i = 0; i < candidates.size(); ++i)
                fitnesses[i] = eval_candidate(candidates[i]);
        }
    } catch (...) {
        // the population is atomically not charged and the sampler rewinds
        state.cma = CmaState::from_checkpoint(cma_snapshot);
        throw;
    }

    state.cma.tell(candidates, fitnesses);
    state.api_calls_used += lambda_pop;

    metrics.pop_min_ce = *std::min_element(fitnesses.begin(), fitnesses.end());
    metrics.pop_mean_ce = 0.0;
    for (double f : fitnesses) metrics.pop_mean_ce += f;
    metrics.pop_mean_ce /= static_cast<double>(fitnesses.size());

    // (d) uses the best_z recorded before this generation
    generator_step(state, batch, metrics);

    // (e) now fold in this generation's winner
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (fitnesses[i] < state.best_fitness) {
            state.best_fitness = fitnesses[i];
            state.best_z = candidates[i];
        }

    ++state.step;
    metrics.best_teacher_ce = state.best_fitness;
    metrics.api_calls_used = state.api_calls_used;
    return metrics;
}

// Prediction for one instance through the black box; one metered call.
inline int infer(TrainState& state, const std::vector<int>& instance, BlackBoxHandle& teacher) {
    state.verify_frozen();
    if (state.api_calls_used + 1 > state.cfg.budget)
        throw BudgetError("infer: API call budget exhausted");
    PromptVector p_gd{generate_prompt(state.generator, instance, state.student).values(),
                      PromptRole::kGd};
    PromptVector p = combine(p_gd, state.p0, state.projection, state.best_z, state.cfg.alpha);
    const auto logits = teacher.query_one(p.values, instance);
    ++state.api_calls_used;
    return argmax_lowest(logits);
}

}  // namespace gdfo
