#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gdfo/blackbox.hpp"
#include "gdfo/cmaes.hpp"
#include "gdfo/distill.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"
#include "gdfo/promptspace.hpp"
#include "gdfo/random.hpp"
#include "gdfo/svgplot.hpp"
#include "gdfo/trainer.hpp"

namespace gdfo {

// ---------------------------------------------------------------------------
// Synthetic task family.
//
// Topics are class-conditional unigram distributions over disjoint content
// blocks. The teacher is pre-trained on a mixture of tasks that share the
// topics but rotate the topic -> label-word mapping; each task is marked by
// its own steering prefix occupying the prompt slot. The downstream few-shot
// task withholds its prefix, so a prompt that recovers the right mapping is
// what optimization has to find.
// ---------------------------------------------------------------------------

struct TaskSpec {
    int num_classes = 2;
    int vocab_size = 256;
    int embed_dim = 16;
    int n_prompt_tokens = 5;
    int content_tokens_per_class = 24;
    // Shared tokens are class-agnostic during teacher pre-training but
    // class-specific in the downstream task: the slice of the task only a
    // locally trained model can pick up, and the reason per-instance prompts
    // can beat one global prompt.
    int shared_tokens_per_class = 4;
    double shared_mass = 0.5;      // fraction of instance tokens from the shared block
    double off_class_mass = 0.05;  // content-token mass placed on other classes' blocks
    int instance_len_min = 6;
    int instance_len_max = 10;
    int num_tasks = 2;             // pretraining mixture size (label-word rotations)
    int steering_block_size = 64;  // steering tokens, split round-robin into task groups
    int k_shot = 16;
    int test_size = 500;
    int pretrain_corpus_size = 3000;
    double random_prefix_fraction = 0.5;  // augmentation share of the mixture
    std::uint64_t seed = 1;

    int prompt_width() const { return n_prompt_tokens * embed_dim; }

    void validate() const {
        if (num_classes < 2) throw ConfigError("task: need at least 2 classes");
        if (num_tasks < 2 || num_tasks > num_classes)
            throw ConfigError("task: num_tasks must be in [2, num_classes]");
        if (k_shot < 1 || test_size < 1) throw ConfigError("task: split sizes must be positive");
        if (instance_len_min < 1 || instance_len_max < instance_len_min)
            throw ConfigError("task: bad instance length range");
        if (off_class_mass < 0.0 || off_class_mass >= 1.0)
            throw ConfigError("task: off_class_mass must be in [0,1)");
        if (shared_mass < 0.0 || shared_mass >= 1.0)
            throw ConfigError("task: shared_mass must be in [0,1)");
        if (shared_tokens_per_class < 1) throw ConfigError("task: need shared tokens");
        if (pretrain_corpus_size < 10 * num_classes)
            throw ConfigError("task: pretrain corpus too small");
        if (random_prefix_fraction < 0.0 || random_prefix_fraction > 1.0)
            throw ConfigError("task: random_prefix_fraction must be in [0,1]");
        if (steering_block_size < num_tasks * n_prompt_tokens)
            throw ConfigError("task: steering block cannot cover the canonical prefixes");
        // token layout must fit: content, shared, label words, steering, template
        const int needed = 2 + num_classes * (content_tokens_per_class + shared_tokens_per_class) +
                           num_classes + steering_block_size + 2;
        if (needed > vocab_size)
            throw ConfigError("task: vocab of " + std::to_string(vocab_size) +
                              " cannot fit the required " + std::to_string(needed) + " tokens");
    }
};

// Concrete token layout derived from a TaskSpec. Steering tokens carry a
// task-group attribute (round-robin within the block); a prefix's task is
// the plurality group among its steering tokens, lowest group on ties, group
// 0 when none are present. The canonical steering prefix of a task is the
// first n tokens of its group.
struct TaskLayout {
    int content_base = 0;
    int tokens_per_class = 0;
    int shared_base = 0;
    int shared_per_class = 0;
    int steering_base = 0;
    int steering_block_size = 0;
    int num_tasks = 0;
    std::vector<int> label_word_ids;
    std::vector<std::vector<int>> steering_prefixes;  // canonical, one per pretraining task
    std::vector<int> template_ids;                    // final id is the mask position

    static TaskLayout from(const TaskSpec& s) {
        TaskLayout l;
        l.content_base = 2;  // ids 0 and 1 stay unused
        l.tokens_per_class = s.content_tokens_per_class;
        l.num_tasks = s.num_tasks;
        int next = l.content_base + s.num_classes * s.content_tokens_per_class;
        l.shared_base = next;
        l.shared_per_class = s.shared_tokens_per_class;
        next += s.num_classes * s.shared_tokens_per_class;
        for (int c = 0; c < s.num_classes; ++c) l.label_word_ids.push_back(next++);
        l.steering_base = next;
        l.steering_block_size = s.steering_block_size;
        next += s.steering_block_size;
        l.steering_prefixes.resize(static_cast<std::size_t>(s.num_tasks));
        for (int m = 0; m < s.num_tasks; ++m)
            for (int i = 0; i < s.n_prompt_tokens; ++i)
                l.steering_prefixes[static_cast<std::size_t>(m)].push_back(
                    l.steering_base + i * s.num_tasks + m);
        l.template_ids = {next, next + 1};
        return l;
    }

    int content_token(int cls, int k) const { return content_base + cls * tokens_per_class + k; }

    int shared_token(int cls, int k) const { return shared_base + cls * shared_per_class + k; }

    int shared_block_size(int num_classes) const { return num_classes * shared_per_class; }

    bool is_steering_token(int id) const {
        return id >= steering_base && id < steering_base + steering_block_size;
    }

    int steering_group(int id) const { return (id - steering_base) % num_tasks; }

    // Plurality group of the steering tokens in a prefix.
    int prefix_task(const std::vector<int>& prefix_ids) const {
        std::vector<int> counts(static_cast<std::size_t>(num_tasks), 0);
        for (int id : prefix_ids)
            if (is_steering_token(id)) ++counts[static_cast<std::size_t>(steering_group(id))];
        int best = 0;
        for (int m = 1; m < num_tasks; ++m)
            if (counts[static_cast<std::size_t>(m)] > counts[static_cast<std::size_t>(best)])
                best = m;
        return best;
    }

    // Task m maps topic z to label index (z + m) % C.
    int mapped_label(int task, int topic, int num_classes) const {
        return (topic + task) % num_classes;
    }
};

struct FewShotSplit {
    std::vector<Instance> train;  // k per class
    std::vector<Instance> dev;    // k per class, disjoint
    std::vector<Instance> test;   // large, disjoint
    int k = 0;
    int num_classes = 0;
};

struct GeneratedTask {
    TaskSpec spec;
    TaskLayout layout;
    int downstream_task = 0;  // which mixture member the few-shot task is
    std::vector<PretrainSample> pretrain_pool;
    FewShotSplit split;
    double bayes_accuracy = 0.0;
};

namespace detail {

// Instance bodies are i.i.d. tokens: shared-block draws with probability
// shared_mass (class-agnostic in pretraining, the topic's own sub-block
// downstream), class-conditional content draws otherwise.
inline std::vector<int> sample_topic_tokens(const TaskSpec& s, const TaskLayout& l, int topic,
                                            bool downstream, RandomEngine& rng) {
    const int len = static_cast<int>(rng.uniform_int(s.instance_len_min, s.instance_len_max));
    std::vector<int> out(static_cast<std::size_t>(len));
    for (auto& tok : out) {
        if (rng.uniform() < s.shared_mass) {
            if (downstream) {
                tok = l.shared_token(
                    topic, static_cast<int>(rng.uniform_int(0, s.shared_tokens_per_class - 1)));
            } else {
                tok = l.shared_base + static_cast<int>(rng.uniform_int(
                                          0, l.shared_block_size(s.num_classes) - 1));
            }
            continue;
        }
        int cls = topic;
        if (s.num_classes > 1 && rng.uniform() < s.off_class_mass) {
            int other = static_cast<int>(rng.uniform_int(0, s.num_classes - 2));
            cls = other >= topic ? other + 1 : other;
        }
        tok = l.content_token(cls, static_cast<int>(rng.uniform_int(0, s.content_tokens_per_class - 1)));
    }
    return out;
}

// Log-likelihood Bayes decoder for the downstream unigram model; the
// learnability gate for generated splits.
inline int bayes_decode_topic(const TaskSpec& s, const TaskLayout& l, const std::vector<int>& x) {
    const double content_in =
        (1.0 - s.shared_mass) * (1.0 - s.off_class_mass) / s.content_tokens_per_class;
    const double content_out =
        s.num_classes > 1 ? (1.0 - s.shared_mass) * s.off_class_mass /
                                ((s.num_classes - 1) * s.content_tokens_per_class)
                          : 0.0;
    const double shared_in = s.shared_mass / s.shared_tokens_per_class;
    int best = 0;
    double best_ll = -1e300;
    for (int z = 0; z < s.num_classes; ++z) {
        double ll = 0.0;
        for (int tok : x) {
            double p;
            if (tok >= l.shared_base && tok < l.shared_base + l.shared_block_size(s.num_classes)) {
                const int cls = (tok - l.shared_base) / l.shared_per_class;
                p = cls == z ? shared_in : 0.0;
            } else {
                const int cls = (tok - l.content_base) / l.tokens_per_class;
                p = cls == z ? content_in : content_out;
            }
            ll += p > 0.0 ? std::log(p) : -1e9;
        }
        if (ll > best_ll) {
            best_ll = ll;
            best = z;
        }
    }
    return best;
}

}  // namespace detail

// Deterministic corpus and k-shot split. Every emitted token sequence is
// globally unique, which makes the split disjointness unconditional.
inline GeneratedTask generate_task(const TaskSpec& spec) {
    spec.validate();
    GeneratedTask task;
    task.spec = spec;
    task.layout = TaskLayout::from(spec);
    const TaskLayout& l = task.layout;

    RandomEngine rng(derive_seed(spec.seed, "task"));
    // The downstream few-shot task is the mixture's default member (the
    // mapping a signal-free prefix decodes to); its canonical steering
    // prefix is withheld and must be recovered by prompt optimization.
    task.downstream_task = 0;

    std::set<std::vector<int>> seen;
    auto fresh_instance = [&](int topic, bool downstream) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            auto x = detail::sample_topic_tokens(spec, l, topic, downstream, rng);
            if (seen.insert(x).second) return x;
        }
        throw ConfigError("task: cannot generate enough distinct instances; enlarge the space");
    };

    // Pretraining mixture: canonical steering prefixes plus random-prefix
    // augmentation drawn from the full vocabulary, labeled by the plurality
    // steering group of the prefix (group 0 when no steering token is
    // present). The label rule is deterministic over the whole prefix space,
    // so the teacher's prompt response is decisive wherever random prompts
    // land at KD time instead of contradictorily trained.
    task.pretrain_pool.reserve(static_cast<std::size_t>(spec.pretrain_corpus_size));
    for (int i = 0; i < spec.pretrain_corpus_size; ++i) {
        PretrainSample sample;
        const int topic = static_cast<int>(rng.uniform_int(0, spec.num_classes - 1));
        sample.steering = rng.uniform() >= spec.random_prefix_fraction;
        int m;
        if (sample.steering) {
            m = static_cast<int>(rng.uniform_int(0, spec.num_tasks - 1));
            sample.prefix_ids = l.steering_prefixes[static_cast<std::size_t>(m)];
        } else {
            sample.prefix_ids.resize(static_cast<std::size_t>(spec.n_prompt_tokens));
            for (auto& id : sample.prefix_ids)
                id = static_cast<int>(rng.uniform_int(0, spec.vocab_size - 1));
            m = l.prefix_task(sample.prefix_ids);
        }
        sample.token_ids = fresh_instance(topic, false);
        sample.token_ids.insert(sample.token_ids.end(), l.template_ids.begin(),
                                l.template_ids.end());
        sample.label = l.mapped_label(m, topic, spec.num_classes);
        task.pretrain_pool.push_back(std::move(sample));
    }

    // few-shot split for the downstream task
    auto make_labeled = [&](int topic) {
        Instance inst;
        inst.token_ids = fresh_instance(topic, true);
        inst.token_ids.insert(inst.token_ids.end(), l.template_ids.begin(), l.template_ids.end());
        inst.label = l.mapped_label(task.downstream_task, topic, spec.num_classes);
        return inst;
    };
    task.split.k = spec.k_shot;
    task.split.num_classes = spec.num_classes;
    for (int c = 0; c < spec.num_classes; ++c)
        for (int i = 0; i < spec.k_shot; ++i) task.split.train.push_back(make_labeled(c));
    for (int c = 0; c < spec.num_classes; ++c)
        for (int i = 0; i < spec.k_shot; ++i) task.split.dev.push_back(make_labeled(c));
    for (int i = 0; i < spec.test_size; ++i)
        task.split.test.push_back(make_labeled(i % spec.num_classes));

    // learnability gate: the Bayes oracle must decode the test set
    int hits = 0;
    for (const auto& inst : task.split.test) {
        std::vector<int> content(inst.token_ids.begin(),
                                 inst.token_ids.end() - static_cast<long>(l.template_ids.size()));
        const int topic_hat = detail::bayes_decode_topic(spec, l, content);
        hits += l.mapped_label(task.downstream_task, topic_hat, spec.num_classes) == inst.label;
    }
    task.bayes_accuracy = static_cast<double>(hits) / static_cast<double>(task.split.test.size());
    if (task.bayes_accuracy < 0.90)
        throw ConfigError("task: Bayes oracle accuracy " + std::to_string(task.bayes_accuracy) +
                          " is below the 0.90 learnability bar");
    return task;
}

// ---------------------------------------------------------------------------
// Presets and the experiment pipeline.
// ---------------------------------------------------------------------------

enum class Preset { kGdfo, kGdfoWoKd, kGdfoWoDfo, kBbtOnly, kManualPrompt };

inline std::string preset_name(Preset p) {
    switch (p) {
        case Preset::kGdfo: return "gdfo";
        case Preset::kGdfoWoKd: return "gdfo-wo-kd";
        case Preset::kGdfoWoDfo: return "gdfo-wo-dfo";
        case Preset::kBbtOnly: return "bbt-only";
        case Preset::kManualPrompt: return "manual-prompt";
    }
    throw ConfigError("unreachable preset");
}

inline Preset parse_preset(const std::string& s) {
    for (Preset p : {Preset::kGdfo, Preset::kGdfoWoKd, Preset::kGdfoWoDfo, Preset::kBbtOnly,
                     Preset::kManualPrompt})
        if (preset_name(p) == s) return p;
    throw ConfigError("unknown preset '" + s + "'");
}

struct ModelConfig {
    int teacher_hidden = 48;
    int student_hidden = 48;
    EncoderVariant teacher_variant = EncoderVariant::kPoolMlp;
    EncoderVariant student_variant = EncoderVariant::kPoolMlp;
};

// Everything one experiment needs; the CLI loads/saves this as JSON.
struct ExperimentConfig {
    TaskSpec task;
    ModelConfig model;
    PretrainConfig pretrain;
    DistillConfig distill;
    EpisodeConfig episode;

    void validate() const {
        task.validate();
        distill.validate();
        episode.validate();
        if (task.embed_dim != episode.embed_dim || task.n_prompt_tokens != episode.n_prompt_tokens)
            throw ConfigError("config: task and episode dims disagree");
    }
};

struct PipelineResult {
    double test_accuracy = 0.0;
    std::uint64_t kd_calls = 0;
    std::uint64_t train_calls = 0;
    std::uint64_t infer_calls = 0;
    double agreement_pre = -1.0;   // student/teacher agreement before KD (KD presets only)
    double agreement_post = -1.0;  // and after
    std::vector<StepMetrics> train_history;
    std::vector<DistillEpochRow> distill_history;
    std::shared_ptr<TrainState> final_state;  // student-backed presets only
};

// Per-seed stage cache. Stages draw from independent derived streams, so
// sharing them across presets is bit-identical to rebuilding them.
struct SeedContext {
    std::uint64_t seed = 0;
    GeneratedTask task;
    ModelParams teacher;
    ModelParams raw_student;
    std::optional<DistillResult> distilled;
};

inline SeedContext build_seed_context(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SeedContext ctx;
    ctx.seed = seed;
    TaskSpec spec = cfg.task;
    spec.seed = derive_seed(seed, "task");
    ctx.task = generate_task(spec);

    ModelParams teacher0 = ModelParams::init(
        spec.vocab_size, spec.embed_dim, spec.n_prompt_tokens, cfg.model.teacher_hidden,
        cfg.model.teacher_variant, ctx.task.layout.label_word_ids, derive_seed(seed, "teacher-init"));
    PretrainConfig pcfg = cfg.pretrain;
    pcfg.seed = derive_seed(seed, "pretrain");
    ctx.teacher = pretrain_teacher(std::move(teacher0), ctx.task.pretrain_pool, pcfg);

    ctx.raw_student = ModelParams::init(
        spec.vocab_size, spec.embed_dim, spec.n_prompt_tokens, cfg.model.student_hidden,
        cfg.model.student_variant, ctx.task.layout.label_word_ids, derive_seed(seed, "student-init"));
    return ctx;
}

namespace detail {

inline std::uint64_t service_budget_for(const ExperimentConfig& cfg) {
    // generous: KD + phase 2 + inference + measurement probes all fit
    const std::uint64_t kd = static_cast<std::uint64_t>(cfg.distill.epochs) *
                             static_cast<std::uint64_t>(cfg.task.k_shot) *
                             static_cast<std::uint64_t>(cfg.task.num_classes);
    const std::uint64_t measurement = 4ull * static_cast<std::uint64_t>(cfg.task.test_size);
    return kd + cfg.episode.budget + measurement + 64;
}

inline const ModelParams& student_for(SeedContext& ctx, const ExperimentConfig& cfg,
                                      BlackBoxHandle& teacher, bool with_kd) {
    if (!with_kd) return ctx.raw_student;
    if (!ctx.distilled) {
        DistillConfig dcfg = cfg.distill;
        dcfg.seed = derive_seed(ctx.seed, "distill");
        ctx.distilled =
            run_distillation(teacher, ctx.raw_student, ctx.task.split.train, dcfg, ctx.teacher);
    }
    return ctx.distilled->student;
}

}  // namespace detail

// Runs one preset on a prepared seed context. A fresh metered service is
// created per run so call accounting starts at zero.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg, SeedContext& ctx, Preset preset,
                                   double alpha_override = -1.0) {
    cfg.validate();
    const TaskSpec& spec = ctx.task.spec;
    EpisodeConfig ecfg = cfg.episode;
    ecfg.seed = derive_seed(ctx.seed, "episode");
    if (alpha_override >= 0.0) ecfg.alpha = alpha_override;
    if (preset == Preset::kBbtOnly) ecfg.alpha = 0.0;
    if (preset == Preset::kGdfoWoDfo) ecfg.alpha = 1.0;

    auto service = std::make_shared<TeacherService>(ctx.teacher, detail::service_budget_for(cfg));
    InProcessHandle handle(service);

    PipelineResult result;
    PromptVector p0 =
        sample_initial_prompt(ctx.teacher, spec.n_prompt_tokens, derive_seed(ctx.seed, "p0"));
    ProjectionMatrix A =
        make_projection(static_cast<std::size_t>(spec.prompt_width()),
                        static_cast<std::size_t>(ecfg.subspace_dim),
                        derive_seed(ctx.seed, "projection"), ecfg.projection_scale);

    const auto& test = ctx.task.split.test;
    const auto& train = ctx.task.split.train;

    if (preset == Preset::kManualPrompt) {
        // p0 alone; API calls only for test-set inference
        int hits = 0;
        for (const auto& inst : test) {
            const auto logits = handle.query_one(p0.values, inst.token_ids);
            hits += argmax_lowest(logits) == inst.label;
        }
        result.infer_calls = test.size();
        result.test_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
        return result;
    }

    if (preset == Preset::kBbtOnly) {
        // pure subspace CMA-ES against the teacher: p = p0 + Az
        CmaState cma = CmaState::init(ecfg.subspace_dim, ecfg.sigma0, ecfg.population_size,
                                      derive_seed(ecfg.seed, "cma"));
        std::vector<double> best_z(static_cast<std::size_t>(ecfg.subspace_dim), 0.0);
        double best_fit = std::numeric_limits<double>::infinity();
        PromptVector zero_gd{std::vector<double>(p0.dim(), 0.0), PromptRole::kGd};
        for (int step = 0; step < ecfg.train_steps; ++step) {
            auto candidates = cma.ask();
            std::vector<double> fitnesses(candidates.size());
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                InferenceRequest req;
                req.request_id = handle.take_request_id();
                for (const auto& inst : train)
                    req.items.push_back(
                        {combine(zero_gd, p0, A, candidates[i], 0.0).values, inst.token_ids});
                const auto resp = handle.query(req);
                double ce = 0.0;
                for (std::size_t j = 0; j < train.size(); ++j)
                    ce += detail::cross_entropy_of(resp.logits[j], train[j].label);
                fitnesses[i] = ce / static_cast<double>(train.size());
                ++result.train_calls;
            }
            cma.tell(candidates, fitnesses);
            for (std::size_t i = 0; i < candidates.size(); ++i)
                if (fitnesses[i] < best_fit) {
                    best_fit = fitnesses[i];
                    best_z = candidates[i];
                }
        }
        PromptVector p = combine(zero_gd, p0, A, best_z, 0.0);
        int hits = 0;
        for (const auto& inst : test) {
            const auto logits = handle.query_one(p.values, inst.token_ids);
            hits += argmax_lowest(logits) == inst.label;
        }
        result.infer_calls = test.size();
        result.test_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
        return result;
    }

    // student-backed presets
    const bool with_kd = preset != Preset::kGdfoWoKd;
    if (with_kd) {
        result.agreement_pre = prediction_agreement(handle, ctx.raw_student, test, ctx.teacher,
                                                    derive_seed(ctx.seed, "agreement"));
    }
    const ModelParams& student = detail::student_for(ctx, cfg, handle, with_kd);
    if (with_kd) {
        result.kd_calls = ctx.distilled->teacher_calls;
        result.distill_history = ctx.distilled->history;
        result.agreement_post = prediction_agreement(handle, student, test, ctx.teacher,
                                                     derive_seed(ctx.seed, "agreement"));
    }

    auto state_ptr = std::make_shared<TrainState>(init_train_state(ecfg, student, p0, A));
    TrainState& state = *state_ptr;
    result.final_state = state_ptr;
    if (preset == Preset::kGdfoWoDfo) {
        // gradient-descent arm only: no CMA-ES tells, no training-time calls
        for (int step = 0; step < ecfg.train_steps; ++step) {
            StepMetrics m;
            m.step = step;
            generator_step(state, train, m);
            m.api_calls_used = state.api_calls_used;
            result.train_history.push_back(m);
        }
    } else {
        for (int step = 0; step < ecfg.train_steps; ++step)
            result.train_history.push_back(joint_train_step(state, train, handle));
        result.train_calls = state.api_calls_used;
    }

    int hits = 0;
    for (const auto& inst : test) hits += infer(state, inst.token_ids, handle) == inst.label;
    result.infer_calls = test.size();
    result.test_accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
    return result;
}

inline PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed, Preset preset,
                                   double alpha_override = -1.0) {
    SeedContext ctx = build_seed_context(cfg, seed);
    return run_pipeline(cfg, ctx, preset, alpha_override);
}

// ---------------------------------------------------------------------------
// Result tables, CSV and plots.
// ---------------------------------------------------------------------------

struct ExperimentRow {
    std::string name;  // preset or alpha value
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::uint64_t kd_calls = 0;
    std::uint64_t train_calls = 0;
    std::uint64_t infer_calls = 0;
};

struct SummaryRow {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
};

inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRow>& rows) {
    std::vector<SummaryRow> out;
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> by_name;
    for (const auto& r : rows) {
        if (!by_name.count(r.name)) order.push_back(r.name);
        by_name[r.name].push_back(r.accuracy);
    }
    for (const auto& name : order) {
        const auto& xs = by_name[name];
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
        out.push_back({name, mean, std::sqrt(var), static_cast<int>(xs.size())});
    }
    return out;
}

inline void write_rows_csv(std::ostream& os, const std::string& key,
                           const std::vector<ExperimentRow>& rows) {
    os << key << ",seed,test_accuracy,kd_calls,train_calls,infer_calls\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.name << ',' << r.seed << ',' << r.accuracy << ',' << r.kd_calls << ','
           << r.train_calls << ',' << r.infer_calls << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::string& key,
                              const std::vector<SummaryRow>& rows) {
    os << key << ",mean_accuracy,std_accuracy,n_seeds\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.name << ',' << r.mean << ',' << r.stddev << ',' << r.n << '\n';
}

struct ExperimentOutput {
    std::vector<ExperimentRow> rows;
    std::vector<SummaryRow> summary;
};

// Runs every preset on every seed; per-seed stages are shared across presets.
// If outdir is nonempty, writes per-seed CSV, summary CSV and the comparison
// plot there.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                       const std::vector<Preset>& presets,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::string& outdir = "") {
    cfg.validate();
    if (presets.empty() || seeds.empty())
        throw ConfigError("experiment: need at least one preset and one seed");
    ExperimentOutput out;
    for (std::uint64_t seed : seeds) {
        SeedContext ctx = build_seed_context(cfg, seed);
        for (Preset p : presets) {
            PipelineResult r = run_pipeline(cfg, ctx, p);
            out.rows.push_back({preset_name(p), seed, r.test_accuracy, r.kd_calls, r.train_calls,
                                r.infer_calls});
        }
    }
    out.summary = summarize(out.rows);
    if (!outdir.empty()) {
        std::ofstream per(outdir + "/experiment_seeds.csv");
        write_rows_csv(per, "preset", out.rows);
        std::ofstream sum(outdir + "/experiment_summary.csv");
        write_summary_csv(sum, "preset", out.summary);
        std::vector<std::string> labels;
        std::vector<double> means, stds;
        for (const auto& s : out.summary) {
            labels.push_back(s.name);
            means.push_back(s.mean);
            stds.push_back(s.stddev);
        }
        write_bar_chart_svg(outdir + "/experiment.svg", "Test accuracy by preset", labels, means,
                            stds, "accuracy");
    }
    return out;
}

// Alpha sweep with endpoint dispatch: alpha = 0 is exactly the bbt-only
// path, alpha = 1 exactly the no-DFO path, so matching seeds coincide with
// those presets.
inline ExperimentOutput alpha_sweep(const ExperimentConfig& cfg, const std::vector<double>& alphas,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::string& outdir = "") {
    cfg.validate();
    for (double a : alphas)
        if (a < 0.0 || a > 1.0) throw ConfigError("alpha sweep: values must lie in [0,1]");
    if (alphas.empty() || seeds.empty())
        throw ConfigError("alpha sweep: need at least one alpha and one seed");
    ExperimentOutput out;
    for (std::uint64_t seed : seeds) {
        SeedContext ctx = build_seed_context(cfg, seed);
        for (double a : alphas) {
            Preset p = a == 0.0   ? Preset::kBbtOnly
                       : a == 1.0 ? Preset::kGdfoWoDfo
                                  : Preset::kGdfo;
            PipelineResult r = run_pipeline(cfg, ctx, p, a);
            std::ostringstream name;
            name << a;
            out.rows.push_back({name.str(), seed, r.test_accuracy, r.kd_calls, r.train_calls,
                                r.infer_calls});
        }
    }
    out.summary = summarize(out.rows);
    if (!outdir.empty()) {
        std::ofstream per(outdir + "/alpha_seeds.csv");
        write_rows_csv(per, "alpha", out.rows);
        std::ofstream sum(outdir + "/alpha_summary.csv");
        write_summary_csv(sum, "alpha", out.summary);
        std::vector<double> xs, means, stds;
        for (const auto& s : out.summary) {
            xs.push_back(std::stod(s.name));
            means.push_back(s.mean);
            stds.push_back(s.stddev);
        }
        write_line_chart_svg(outdir + "/alpha_sweep.svg", "Test accuracy vs alpha", xs, means, stds,
                             "alpha", "accuracy");
    }
    return out;
}

}  // namespace gdfo
