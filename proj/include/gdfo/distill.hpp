#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gdfo/autodiff.hpp"
#include "gdfo/blackbox.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"
#include "gdfo/promptspace.hpp"

namespace gdfo {

struct DistillConfig {
    double tau = 1.0;                  // softening temperature
    double lambda = 0.5;               // weight on the KL term
    int epochs = 200;
    double lr = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (tau <= 0.0) throw ConfigError("distill: tau must be > 0");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("distill: lambda must be in [0,1]");
        if (epochs < 0) throw ConfigError("distill: epochs must be >= 0");
    }
};

struct KdLosses {
    Tensor ce;     // -log softmax(student)[label]
    Tensor kl;     // KL(softmax(S/tau) || softmax(T/tau))
    Tensor total;  // (1-lambda)*ce + lambda*kl
};

// Distillation losses. Teacher logits enter as plain constants: no tape node
// is ever created for them, so no gradient can flow to the teacher side.
inline KdLosses kd_losses(const Tensor& student_logits, const std::vector<double>& teacher_logits,
                          int label, const DistillConfig& cfg) {
    cfg.validate();
    if (student_logits.rank() != 1)
        throw ContractError("kd_losses: student logits must be rank 1");
    if (student_logits.size() != teacher_logits.size())
        throw ContractError("kd_losses: student has " + std::to_string(student_logits.size()) +
                            " logits, teacher " + std::to_string(teacher_logits.size()));
    if (label < 0 || static_cast<std::size_t>(label) >= student_logits.size())
        throw ContractError("kd_losses: label " + std::to_string(label) + " out of range");
    for (double v : student_logits.values())
        if (!std::isfinite(v)) throw NumericError("kd_losses: non-finite student logit");
    for (double v : teacher_logits)
        if (!std::isfinite(v)) throw NumericError("kd_losses: non-finite teacher logit");

    // teacher side: softened log-probabilities, computed with the same
    // softmax kernel as the tensor op so equal logits give exactly zero KL
    std::vector<double> t_scaled(teacher_logits.size());
    for (std::size_t i = 0; i < t_scaled.size(); ++i) t_scaled[i] = teacher_logits[i] * (1.0 / cfg.tau);
    std::vector<double> t_logp = softmax_values(t_scaled);
    for (auto& v : t_logp) v = std::log(v);

    Tensor p_s = softmax(scale(student_logits, 1.0 / cfg.tau));
    Tensor kl = sum(mul(p_s, sub(log(p_s), Tensor::from({t_logp.size()}, t_logp))));
    Tensor ce = class_cross_entropy(student_logits, label);
    Tensor total = add(scale(ce, 1.0 - cfg.lambda), scale(kl, cfg.lambda));
    return {ce, kl, total};
}

struct Instance {
    std::vector<int> token_ids;  // instance followed by the template tokens
    int label = 0;
};

struct DistillEpochRow {
    int epoch = 0;
    double mean_loss = 0.0;
    double mean_ce = 0.0;
    double mean_kl = 0.0;
    double train_accuracy = 0.0;     // student argmax vs ground truth
    double teacher_agreement = 0.0;  // student argmax vs teacher argmax
};

struct DistillResult {
    ModelParams student;
    std::vector<DistillEpochRow> history;
    std::uint64_t teacher_calls = 0;
};

inline void write_distill_csv(std::ostream& os, const std::vector<DistillEpochRow>& rows) {
    os << "epoch,mean_loss,mean_ce,mean_kl,train_accuracy,teacher_agreement\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.epoch << ',' << r.mean_loss << ',' << r.mean_ce << ',' << r.mean_kl << ','
           << r.train_accuracy << ',' << r.teacher_agreement << '\n';
}

// Phase 1: align the student with the black-box teacher on the k-shot set
// under fresh random prompts. One optimizer step per instance per epoch.
// `vocab_table` supplies the embedding rows that random prompts are built
// from (the teacher's table; prompt sampling happens outside the service
// boundary, queries go through it).
inline DistillResult run_distillation(BlackBoxHandle& teacher, ModelParams student,
                                      const std::vector<Instance>& data, const DistillConfig& cfg,
                                      const ModelParams& vocab_table) {
    cfg.validate();
    student = student.clone();  // never train through aliased weight buffers
    if (data.empty()) throw ContractError("distill: empty training set");
    const auto needed = static_cast<std::uint64_t>(cfg.epochs) * data.size();
    const auto st = teacher.status();
    if (st.budget - st.calls_used < needed)
        throw BudgetError("distill: needs " + std::to_string(needed) + " teacher calls but only " +
                          std::to_string(st.budget - st.calls_used) + " remain");

    student.set_trainable(true);
    auto weights = student.weights();
    RandomEngine rng(derive_seed(cfg.seed, "distill-prompts"));
    DistillResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        DistillEpochRow row;
        row.epoch = epoch;
        for (const auto& inst : data) {
            PromptVector p_r = sample_random_prompt(vocab_table, vocab_table.n_prompt_tokens, rng);
            const auto teacher_logits = teacher.query_one(p_r.values, inst.token_ids);
            ++result.teacher_calls;
            Tensor prompt = Tensor::from({static_cast<std::size_t>(vocab_table.n_prompt_tokens),
                                          static_cast<std::size_t>(vocab_table.embed_dim)},
                                         p_r.values);
            Tensor student_logits = forward(student, prompt, inst.token_ids);
            KdLosses losses = kd_losses(student_logits, teacher_logits, inst.label, cfg);
            row.mean_loss += losses.total.item();
            row.mean_ce += losses.ce.item();
            row.mean_kl += losses.kl.item();
            const int s_pred = argmax_lowest(student_logits.values());
            row.train_accuracy += s_pred == inst.label;
            row.teacher_agreement += s_pred == argmax_lowest(teacher_logits);
            backward(losses.total);
            sgd_step(weights, cfg.lr);
        }
        const auto inv = 1.0 / static_cast<double>(data.size());
        row.mean_loss *= inv;
        row.mean_ce *= inv;
        row.mean_kl *= inv;
        row.train_accuracy *= inv;
        row.teacher_agreement *= inv;
        result.history.push_back(row);
    }
    student.set_trainable(false);
    result.student = std::move(student);
    return result;
}

// Student/teacher argmax agreement under fresh random prompts, used to
// measure what distillation bought. Consumes one teacher call per instance.
inline double prediction_agreement(BlackBoxHandle& teacher, const ModelParams& student,
                                   const std::vector<Instance>& data,
                                   const ModelParams& vocab_table, std::uint64_t seed) {
    if (data.empty()) return 0.0;
    RandomEngine rng(derive_seed(seed, "agreement-prompts"));
    int agree = 0;
    for (const auto& inst : data) {
        PromptVector p_r = sample_random_prompt(vocab_table, vocab_table.n_prompt_tokens, rng);
        const auto t_logits = teacher.query_one(p_r.values, inst.token_ids);
        const auto s_logits = forward_logits(student, {p_r.values, inst.token_ids});
        agree += argmax_lowest(s_logits) == argmax_lowest(t_logits);
    }
    return static_cast<double>(agree) / static_cast<double>(data.size());
}

}  // namespace gdfo
