#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "gdfo/autodiff.hpp"
#include "gdfo/checkpoint.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/random.hpp"

namespace gdfo {

enum class EncoderVariant { kPoolMlp = 0, kSingleAttention = 1 };

inline std::string variant_name(EncoderVariant v) {
    return v == EncoderVariant::kPoolMlp ? "pool-mlp" : "single-attention";
}

inline EncoderVariant variant_from_name(const std::string& s) {
    if (s == "pool-mlp") return EncoderVariant::kPoolMlp;
    if (s == "single-attention") return EncoderVariant::kSingleAttention;
    throw ConfigError("unknown encoder variant '" + s + "'");
}

// Lowest-index winner on ties.
inline int argmax_lowest(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Sequence classifier over a continuous prompt prefix plus token ids.
// Two encoder variants share the same head: class scores are the vocab
// logits gathered at the label-word ids, read at the mask position (the
// final template token) where the encoding is positional.
struct ModelParams {
    int vocab_size = 0;
    int embed_dim = 0;
    int n_prompt_tokens = 0;
    int hidden_dim = 0;
    EncoderVariant variant = EncoderVariant::kPoolMlp;

    Tensor embedding;      // [V, e]
    Tensor w1, b1;         // [e, h], [h]
    Tensor w2, b2;         // [h, V], [V]
    Tensor wq, wk, wv;     // [e, e] each; attention variant only

    std::vector<int> label_word_ids;

    int prompt_width() const { return n_prompt_tokens * embed_dim; }
    int num_classes() const { return static_cast<int>(label_word_ids.size()); }

    static ModelParams init(int vocab_size, int embed_dim, int n_prompt_tokens, int hidden_dim,
                            EncoderVariant variant, std::vector<int> label_word_ids,
                            std::uint64_t seed) {
        if (vocab_size < 1 || embed_dim < 1 || n_prompt_tokens < 1 || hidden_dim < 1)
            throw ConfigError("model dims must be positive");
        if (label_word_ids.empty()) throw ConfigError("label_word_ids must be nonempty");
        std::vector<bool> seen(static_cast<std::size_t>(vocab_size), false);
        for (int id : label_word_ids) {
            if (id < 0 || id >= vocab_size)
                throw VocabError("label word id " + std::to_string(id) + " outside vocab of " +
                                 std::to_string(vocab_size));
            if (seen[static_cast<std::size_t>(id)])
                throw ConfigError("label word id " + std::to_string(id) + " repeated");
            seen[static_cast<std::size_t>(id)] = true;
        }
        RandomEngine rng(seed);
        ModelParams p;
        p.vocab_size = vocab_size;
        p.embed_dim = embed_dim;
        p.n_prompt_tokens = n_prompt_tokens;
        p.hidden_dim = hidden_dim;
        p.variant = variant;
        p.label_word_ids = std::move(label_word_ids);
        const auto V = static_cast<std::size_t>(vocab_size);
        const auto e = static_cast<std::size_t>(embed_dim);
        const auto h = static_cast<std::size_t>(hidden_dim);
        p.embedding = Tensor::randn({V, e}, rng, 0.5);
        p.w1 = Tensor::randn({e, h}, rng, 1.0 / std::sqrt(static_cast<double>(e)));
        p.b1 = Tensor::zeros({h});
        p.w2 = Tensor::randn({h, V}, rng, 1.0 / std::sqrt(static_cast<double>(h)));
        p.b2 = Tensor::zeros({V});
        if (variant == EncoderVariant::kSingleAttention) {
            const double s = 1.0 / std::sqrt(static_cast<double>(e));
            p.wq = Tensor::randn({e, e}, rng, s);
            p.wk = Tensor::randn({e, e}, rng, s);
            p.wv = Tensor::randn({e, e}, rng, s);
        }
        return p;
    }

    std::vector<Tensor> weights() {
        std::vector<Tensor> w{embedding, w1, b1, w2, b2};
        if (variant == EncoderVariant::kSingleAttention) {
            w.push_back(wq);
            w.push_back(wk);
            w.push_back(wv);
        }
        return w;
    }

    // Deep copy: detached weight buffers, so training one copy cannot touch
    // another.
    ModelParams clone() const {
        ModelParams p = *this;
        p.embedding = embedding.clone();
        p.w1 = w1.clone();
        p.b1 = b1.clone();
        p.w2 = w2.clone();
        p.b2 = b2.clone();
        if (variant == EncoderVariant::kSingleAttention) {
            p.wq = wq.clone();
            p.wk = wk.clone();
            p.wv = wv.clone();
        }
        return p;
    }

    void set_trainable(bool on) {
        for (auto& w : weights()) w.set_requires_grad(on);
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.put_scalar("vocab_size", vocab_size);
        ck.put_scalar("embed_dim", embed_dim);
        ck.put_scalar("n_prompt_tokens", n_prompt_tokens);
        ck.put_scalar("hidden_dim", hidden_dim);
        ck.put_scalar("variant", static_cast<double>(variant));
        ck.put_scalar("num_label_words", num_classes());
        std::vector<double> lw(label_word_ids.begin(), label_word_ids.end());
        ck.put_tensor("label_word_ids", {lw.size()}, lw);
        auto put = [&](const char* name, const Tensor& t) {
            std::vector<std::uint64_t> shape(t.shape().begin(), t.shape().end());
            ck.put_tensor(name, shape, t.values());
        };
        put("embedding", embedding);
        put("w1", w1);
        put("b1", b1);
        put("w2", w2);
        put("b2", b2);
        if (variant == EncoderVariant::kSingleAttention) {
            put("wq", wq);
            put("wk", wk);
            put("wv", wv);
        }
        return ck;
    }

    static ModelParams from_checkpoint(const Checkpoint& ck) {
        ModelParams p;
        p.vocab_size = static_cast<int>(ck.scalar("vocab_size"));
        p.embed_dim = static_cast<int>(ck.scalar("embed_dim"));
        p.n_prompt_tokens = static_cast<int>(ck.scalar("n_prompt_tokens"));
        p.hidden_dim = static_cast<int>(ck.scalar("hidden_dim"));
        p.variant = static_cast<EncoderVariant>(static_cast<int>(ck.scalar("variant")));
        const auto& lw = ck.tensor("label_word_ids");
        p.label_word_ids.assign(lw.data.begin(), lw.data.end());
        auto get = [&](const char* name) {
            const auto& t = ck.tensor(name);
            Shape shape(t.shape.begin(), t.shape.end());
            return Tensor::from(shape, t.data);
        };
        p.embedding = get("embedding");
        p.w1 = get("w1");
        p.b1 = get("b1");
        p.w2 = get("w2");
        p.b2 = get("b2");
        if (p.variant == EncoderVariant::kSingleAttention) {
            p.wq = get("wq");
            p.wk = get("wk");
            p.wv = get("wv");
        }
        return p;
    }

    std::uint64_t checksum() const { return to_checkpoint().checksum(); }
};

// Input: a continuous prompt occupying the first n positions, then token ids
// (instance followed by the template; the final token is the mask position).
struct ModelInput {
    std::vector<double> prompt;  // flattened, length n*e
    std::vector<int> token_ids;
};

namespace detail {

inline void check_input(const ModelParams& p, std::size_t prompt_len,
                        const std::vector<int>& token_ids) {
    if (prompt_len != static_cast<std::size_t>(p.prompt_width()))
        throw DimensionError("forward: prompt width " + std::to_string(prompt_len) +
                             " does not match n*e = " + std::to_string(p.prompt_width()));
    if (token_ids.empty()) throw ContractError("forward: empty token sequence");
    for (int id : token_ids)
        if (id < 0 || id >= p.vocab_size)
            throw VocabError("forward: token id " + std::to_string(id) + " outside vocab of " +
                             std::to_string(p.vocab_size));
}

}  // namespace detail

// Differentiable forward: class logits [C]. Gradients flow into whatever
// inputs have requires_grad set (the prompt for generator training, the
// weights for model training).
inline Tensor forward(const ModelParams& p, const Tensor& prompt, const std::vector<int>& token_ids) {
    detail::check_input(p, prompt.size(), token_ids);
    const auto n = static_cast<std::size_t>(p.n_prompt_tokens);
    const auto e = static_cast<std::size_t>(p.embed_dim);
    Tensor P = prompt.rank() == 2 ? prompt : reshape(prompt, {n, e});
    Tensor E = take_rows(p.embedding, token_ids);
    Tensor X = concat_rows(P, E);
    Tensor h;
    if (p.variant == EncoderVariant::kPoolMlp) {
        h = tanh(add(matmul(mean_rows(X), p.w1), p.b1));
    } else {
        const std::size_t T = X.shape()[0];
        Tensor Q = matmul(X, p.wq);
        Tensor K = matmul(X, p.wk);
        Tensor V = matmul(X, p.wv);
        Tensor A = softmax(scale(matmul(Q, transpose(K)), 1.0 / std::sqrt(static_cast<double>(e))));
        Tensor Y = matmul(A, V);
        // read at the mask position (last token), with a residual
        Tensor at_mask = add(reshape(slice_rows(Y, T - 1, T), {e}),
                             reshape(slice_rows(X, T - 1, T), {e}));
        h = tanh(add(matmul(at_mask, p.w1), p.b1));
    }
    Tensor vocab_logits = add(matmul(h, p.w2), p.b2);
    return take_rows(vocab_logits, p.label_word_ids);
}

// Plain evaluation path (no gradients requested by the caller's tensors).
inline std::vector<double> forward_logits(const ModelParams& p, const ModelInput& input) {
    const auto n = static_cast<std::size_t>(p.n_prompt_tokens);
    const auto e = static_cast<std::size_t>(p.embed_dim);
    detail::check_input(p, input.prompt.size(), input.token_ids);
    Tensor prompt = Tensor::from({n, e}, input.prompt);
    return forward(p, prompt, input.token_ids).values();
}

// ---------------------------------------------------------------------------
// Teacher pre-training on the synthetic mixture.
// ---------------------------------------------------------------------------

struct PretrainSample {
    std::vector<int> prefix_ids;  // n ids occupying the prompt slot
    std::vector<int> token_ids;   // instance plus template
    int label = 0;
    bool steering = true;  // false for random-prefix augmentation samples
};

struct PretrainConfig {
    int max_epochs = 60;
    double lr = 0.15;
    int batch_size = 16;
    double target_accuracy = 0.95;  // the acceptance bar, on held-out steering samples
    double stop_accuracy = 0.98;    // early-stop margin above the bar
    double holdout_fraction = 0.15;
    std::uint64_t seed = 0;
};

// Cross entropy of class logits against an integer label, as a tape scalar.
inline Tensor class_cross_entropy(const Tensor& class_logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_logits.size())
        throw ContractError("cross entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(class_logits.size()) + " classes");
    Tensor logp = log(softmax(class_logits));
    return scale(sum(take_rows(logp, {label})), -1.0);
}

inline double eval_accuracy(const ModelParams& p, const std::vector<PretrainSample>& samples) {
    if (samples.empty()) return 0.0;
    int hits = 0;
    for (const auto& s : samples) {
        Tensor prompt = take_rows(p.embedding, s.prefix_ids);
        const auto logits = forward(p, prompt, s.token_ids).values();
        hits += argmax_lowest(logits) == s.label;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

// Trains the teacher on the mixture until the held-out steering-prefix
// accuracy clears the bar, then freezes it. The prompt slot is filled with
// the sample's own prefix embeddings, so steering prefixes are shaped by the
// same gradients that shape the rest of the table.
inline ModelParams pretrain_teacher(ModelParams params, const std::vector<PretrainSample>& pool,
                                    const PretrainConfig& cfg) {
    params = params.clone();  // never train through aliased weight buffers
    if (pool.empty()) throw ContractError("pretrain_teacher: empty corpus");
    std::vector<bool> has_class(static_cast<std::size_t>(params.num_classes()), false);
    for (const auto& s : pool) {
        if (s.label < 0 || s.label >= params.num_classes())
            throw ContractError("pretrain_teacher: label out of range");
        has_class[static_cast<std::size_t>(s.label)] = true;
    }
    for (std::size_t c = 0; c < has_class.size(); ++c)
        if (!has_class[c])
            throw ContractError("pretrain_teacher: corpus missing class " + std::to_string(c));

    const auto n_holdout = static_cast<std::size_t>(
        static_cast<double>(pool.size()) * cfg.holdout_fraction);
    std::vector<PretrainSample> train(pool.begin(), pool.end() - static_cast<long>(n_holdout));
    std::vector<PretrainSample> holdout_all(pool.end() - static_cast<long>(n_holdout), pool.end());
    std::vector<PretrainSample> holdout;
    for (const auto& s : holdout_all)
        if (s.steering) holdout.push_back(s);

    params.set_trainable(true);
    auto weights = params.weights();
    RandomEngine rng(derive_seed(cfg.seed, "pretrain-shuffle"));
    std::vector<std::size_t> idx(train.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    double best_acc = 0.0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        // Fisher-Yates with our own engine, for reproducibility
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Tensor total;
            bool first = true;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& s = train[idx[i]];
                Tensor prompt = take_rows(params.embedding, s.prefix_ids);
                Tensor ce = class_cross_entropy(forward(params, prompt, s.token_ids), s.label);
                total = first ? ce : add(total, ce);
                first = false;
            }
            backward(scale(total, 1.0 / static_cast<double>(stop - start)));
            sgd_step(weights, cfg.lr);
        }
        best_acc = eval_accuracy(params, holdout);
        if (best_acc >= std::max(cfg.target_accuracy, cfg.stop_accuracy)) break;
    }
    if (best_acc < cfg.target_accuracy)
        throw PretrainError("teacher pre-training reached only " + std::to_string(best_acc) +
                            " held-out accuracy (bar " + std::to_string(cfg.target_accuracy) +
                            "); the task generator config is likely too hard");
    params.set_trainable(false);
    return params;
}

}  // namespace gdfo
