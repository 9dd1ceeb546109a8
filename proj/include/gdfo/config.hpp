#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdfo/bench.hpp"
#include "gdfo/errors.hpp"

namespace gdfo {

// Versioned, human-readable experiment configuration. Schema (JSON):
//
// {
//   "version": 1,
//   "service": { "endpoint": "127.0.0.1:7711", "budget": <u64> },
//   "seeds":   [ <u64>, ... ],
//   "task":    { every TaskSpec field },
//   "model":   { teacher_hidden, student_hidden, teacher_variant, student_variant },
//   "pretrain":{ max_epochs, lr, batch_size, target_accuracy, stop_accuracy,
//                holdout_fraction },
//   "distill": { tau, lambda, epochs, lr },
//   "episode": { n_prompt_tokens, embed_dim, subspace_dim, alpha,
//                population_size, budget, train_steps, sigma0, generator_lr,
//                projection_scale, parallel_candidates }
// }
//
// Missing fields keep their defaults; unknown fields are rejected. The
// GDFO_ENDPOINT environment variable overrides service.endpoint.
struct CliConfig {
    static constexpr int kVersion = 1;

    ExperimentConfig experiment;
    std::string endpoint = "127.0.0.1:7711";
    std::uint64_t service_budget = 20000;
    std::vector<std::uint64_t> seeds = {1, 2, 3};

    std::string effective_endpoint() const {
        if (const char* env = std::getenv("GDFO_ENDPOINT"); env && *env) return env;
        return endpoint;
    }
};

namespace detail {

using nlohmann::json;

template <typename T>
inline void fetch(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, const char* section, std::vector<std::string> allowed) {
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(std::string("config: unknown key '") + key + "' in " + section);
}

}  // namespace detail

inline CliConfig config_from_json(const nlohmann::json& j) {
    using detail::fetch;
    CliConfig cfg;
    detail::check_keys(j, "root",
                       {"version", "service", "seeds", "task", "model", "pretrain", "distill",
                        "episode"});
    if (!j.contains("version")) throw ConfigError("config: missing version");
    if (j.at("version").get<int>() != CliConfig::kVersion)
        throw ConfigError("config: unsupported version");
    if (j.contains("service")) {
        const auto& s = j.at("service");
        detail::check_keys(s, "service", {"endpoint", "budget"});
        fetch(s, "endpoint", cfg.endpoint);
        fetch(s, "budget", cfg.service_budget);
    }
    fetch(j, "seeds", cfg.seeds);
    if (j.contains("task")) {
        const auto& t = j.at("task");
        detail::check_keys(t, "task",
                           {"num_classes", "vocab_size", "embed_dim", "n_prompt_tokens",
                            "content_tokens_per_class", "shared_tokens_per_class", "shared_mass",
                            "off_class_mass", "instance_len_min",
                            "instance_len_max", "num_tasks", "k_shot", "test_size",
                            "pretrain_corpus_size", "random_prefix_fraction", "seed"});
        auto& task = cfg.experiment.task;
        fetch(t, "num_classes", task.num_classes);
        fetch(t, "vocab_size", task.vocab_size);
        fetch(t, "embed_dim", task.embed_dim);
        fetch(t, "n_prompt_tokens", task.n_prompt_tokens);
        fetch(t, "content_tokens_per_class", task.content_tokens_per_class);
        fetch(t, "shared_tokens_per_class", task.shared_tokens_per_class);
        fetch(t, "shared_mass", task.shared_mass);
        fetch(t, "off_class_mass", task.off_class_mass);
        fetch(t, "instance_len_min", task.instance_len_min);
        fetch(t, "instance_len_max", task.instance_len_max);
        fetch(t, "num_tasks", task.num_tasks);
        fetch(t, "steering_block_size", task.steering_block_size);
        fetch(t, "k_shot", task.k_shot);
        fetch(t, "test_size", task.test_size);
        fetch(t, "pretrain_corpus_size", task.pretrain_corpus_size);
        fetch(t, "random_prefix_fraction", task.random_prefix_fraction);
        fetch(t, "seed", task.seed);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::check_keys(m, "model",
                           {"teacher_hidden", "student_hidden", "teacher_variant",
                            "student_variant"});
        fetch(m, "teacher_hidden", cfg.experiment.model.teacher_hidden);
        fetch(m, "student_hidden", cfg.experiment.model.student_hidden);
        std::string tv = variant_name(cfg.experiment.model.teacher_variant);
        std::string sv = variant_name(cfg.experiment.model.student_variant);
        fetch(m, "teacher_variant", tv);
        fetch(m, "student_variant", sv);
        cfg.experiment.model.teacher_variant = variant_from_name(tv);
        cfg.experiment.model.student_variant = variant_from_name(sv);
    }
    if (j.contains("pretrain")) {
        const auto& p = j.at("pretrain");
        detail::check_keys(p, "pretrain",
                           {"max_epochs", "lr", "batch_size", "target_accuracy", "stop_accuracy",
                            "holdout_fraction"});
        auto& pre = cfg.experiment.pretrain;
        fetch(p, "max_epochs", pre.max_epochs);
        fetch(p, "lr", pre.lr);
        fetch(p, "batch_size", pre.batch_size);
        fetch(p, "target_accuracy", pre.target_accuracy);
        fetch(p, "stop_accuracy", pre.stop_accuracy);
        fetch(p, "holdout_fraction", pre.holdout_fraction);
    }
    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        detail::check_keys(d, "distill", {"tau", "lambda", "epochs", "lr"});
        auto& dc = cfg.experiment.distill;
        fetch(d, "tau", dc.tau);
        fetch(d, "lambda", dc.lambda);
        fetch(d, "epochs", dc.epochs);
        fetch(d, "lr", dc.lr);
    }
    if (j.contains("episode")) {
        const auto& e = j.at("episode");
        detail::check_keys(e, "episode",
                           {"n_prompt_tokens", "embed_dim", "subspace_dim", "alpha",
                            "population_size", "budget", "train_steps", "sigma0", "generator_lr",
                            "projection_scale", "parallel_candidates"});
        auto& ep = cfg.experiment.episode;
        fetch(e, "n_prompt_tokens", ep.n_prompt_tokens);
        fetch(e, "embed_dim", ep.embed_dim);
        fetch(e, "subspace_dim", ep.subspace_dim);
        fetch(e, "alpha", ep.alpha);
        fetch(e, "population_size", ep.population_size);
        fetch(e, "budget", ep.budget);
        fetch(e, "train_steps", ep.train_steps);
        fetch(e, "sigma0", ep.sigma0);
        fetch(e, "generator_lr", ep.generator_lr);
        fetch(e, "projection_scale", ep.projection_scale);
        fetch(e, "parallel_candidates", ep.parallel_candidates);
    }
    cfg.experiment.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const CliConfig& cfg) {
    nlohmann::json j;
    j["version"] = CliConfig::kVersion;
    j["service"] = {{"endpoint", cfg.endpoint}, {"budget", cfg.service_budget}};
    j["seeds"] = cfg.seeds;
    const auto& t = cfg.experiment.task;
    j["task"] = {{"num_classes", t.num_classes},
                 {"vocab_size", t.vocab_size},
                 {"embed_dim", t.embed_dim},
                 {"n_prompt_tokens", t.n_prompt_tokens},
                 {"content_tokens_per_class", t.content_tokens_per_class},
                 {"shared_tokens_per_class", t.shared_tokens_per_class},
                 {"shared_mass", t.shared_mass},
                 {"off_class_mass", t.off_class_mass},
                 {"instance_len_min", t.instance_len_min},
                 {"instance_len_max", t.instance_len_max},
                 {"num_tasks", t.num_tasks},
                 {"steering_block_size", t.steering_block_size},
                 {"k_shot", t.k_shot},
                 {"test_size", t.test_size},
                 {"pretrain_corpus_size", t.pretrain_corpus_size},
                 {"random_prefix_fraction", t.random_prefix_fraction},
                 {"seed", t.seed}};
    const auto& m = cfg.experiment.model;
    j["model"] = {{"teacher_hidden", m.teacher_hidden},
                  {"student_hidden", m.student_hidden},
                  {"teacher_variant", variant_name(m.teacher_variant)},
                  {"student_variant", variant_name(m.student_variant)}};
    const auto& p = cfg.experiment.pretrain;
    j["pretrain"] = {{"max_epochs", p.max_epochs},
                     {"lr", p.lr},
                     {"batch_size", p.batch_size},
                     {"target_accuracy", p.target_accuracy},
                     {"stop_accuracy", p.stop_accuracy},
                     {"holdout_fraction", p.holdout_fraction}};
    const auto& d = cfg.experiment.distill;
    j["distill"] = {{"tau", d.tau}, {"lambda", d.lambda}, {"epochs", d.epochs}, {"lr", d.lr}};
    const auto& e = cfg.experiment.episode;
    j["episode"] = {{"n_prompt_tokens", e.n_prompt_tokens},
                    {"embed_dim", e.embed_dim},
                    {"subspace_dim", e.subspace_dim},
                    {"alpha", e.alpha},
                    {"population_size", e.population_size},
                    {"budget", e.budget},
                    {"train_steps", e.train_steps},
                    {"sigma0", e.sigma0},
                    {"generator_lr", e.generator_lr},
                    {"projection_scale", e.projection_scale},
                    {"parallel_candidates", e.parallel_candidates}};
    return j;
}

// ---------------------------------------------------------------------------
// Generated-task file: the materialized corpus and split, reproducible from
// (config, seed) but storable so the stage commands can hand work to each
// other.
// ---------------------------------------------------------------------------

inline nlohmann::json task_to_json(const GeneratedTask& task) {
    nlohmann::json j;
    j["version"] = CliConfig::kVersion;
    const auto& s = task.spec;
    j["spec"] = {{"num_classes", s.num_classes},
                 {"vocab_size", s.vocab_size},
                 {"embed_dim", s.embed_dim},
                 {"n_prompt_tokens", s.n_prompt_tokens},
                 {"content_tokens_per_class", s.content_tokens_per_class},
                 {"shared_tokens_per_class", s.shared_tokens_per_class},
                 {"shared_mass", s.shared_mass},
                 {"off_class_mass", s.off_class_mass},
                 {"instance_len_min", s.instance_len_min},
                 {"instance_len_max", s.instance_len_max},
                 {"num_tasks", s.num_tasks},
                 {"steering_block_size", s.steering_block_size},
                 {"k_shot", s.k_shot},
                 {"test_size", s.test_size},
                 {"pretrain_corpus_size", s.pretrain_corpus_size},
                 {"random_prefix_fraction", s.random_prefix_fraction},
                 {"seed", s.seed}};
    j["downstream_task"] = task.downstream_task;
    j["bayes_accuracy"] = task.bayes_accuracy;
    j["layout"] = {{"content_base", task.layout.content_base},
                   {"tokens_per_class", task.layout.tokens_per_class},
                   {"shared_base", task.layout.shared_base},
                   {"shared_per_class", task.layout.shared_per_class},
                   {"steering_base", task.layout.steering_base},
                   {"steering_block_size", task.layout.steering_block_size},
                   {"num_tasks", task.layout.num_tasks},
                   {"label_word_ids", task.layout.label_word_ids},
                   {"steering_prefixes", task.layout.steering_prefixes},
                   {"template_ids", task.layout.template_ids}};
    auto instances = [](const std::vector<Instance>& xs) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& x : xs) out.push_back({{"token_ids", x.token_ids}, {"label", x.label}});
        return out;
    };
    j["split"] = {{"k", task.split.k},
                  {"num_classes", task.split.num_classes},
                  {"train", instances(task.split.train)},
                  {"dev", instances(task.split.dev)},
                  {"test", instances(task.split.test)}};
    nlohmann::json pool = nlohmann::json::array();
    for (const auto& p : task.pretrain_pool)
        pool.push_back({{"prefix_ids", p.prefix_ids},
                        {"token_ids", p.token_ids},
                        {"label", p.label},
                        {"steering", p.steering}});
    j["pretrain_pool"] = pool;
    return j;
}

inline GeneratedTask task_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != CliConfig::kVersion)
        throw ConfigError("task file: missing or unsupported version");
    GeneratedTask task;
    const auto& s = j.at("spec");
    task.spec.num_classes = s.at("num_classes").get<int>();
    task.spec.vocab_size = s.at("vocab_size").get<int>();
    task.spec.embed_dim = s.at("embed_dim").get<int>();
    task.spec.n_prompt_tokens = s.at("n_prompt_tokens").get<int>();
    task.spec.content_tokens_per_class = s.at("content_tokens_per_class").get<int>();
    task.spec.shared_tokens_per_class = s.at("shared_tokens_per_class").get<int>();
    task.spec.shared_mass = s.at("shared_mass").get<double>();
    task.spec.off_class_mass = s.at("off_class_mass").get<double>();
    task.spec.instance_len_min = s.at("instance_len_min").get<int>();
    task.spec.instance_len_max = s.at("instance_len_max").get<int>();
    task.spec.num_tasks = s.at("num_tasks").get<int>();
    task.spec.steering_block_size = s.at("steering_block_size").get<int>();
    task.spec.k_shot = s.at("k_shot").get<int>();
    task.spec.test_size = s.at("test_size").get<int>();
    task.spec.pretrain_corpus_size = s.at("pretrain_corpus_size").get<int>();
    task.spec.random_prefix_fraction = s.at("random_prefix_fraction").get<double>();
    task.spec.seed = s.at("seed").get<std::uint64_t>();
    task.downstream_task = j.at("downstream_task").get<int>();
    task.bayes_accuracy = j.at("bayes_accuracy").get<double>();
    const auto& l = j.at("layout");
    task.layout.content_base = l.at("content_base").get<int>();
    task.layout.tokens_per_class = l.at("tokens_per_class").get<int>();
    task.layout.shared_base = l.at("shared_base").get<int>();
    task.layout.shared_per_class = l.at("shared_per_class").get<int>();
    task.layout.steering_base = l.at("steering_base").get<int>();
    task.layout.steering_block_size = l.at("steering_block_size").get<int>();
    task.layout.num_tasks = l.at("num_tasks").get<int>();
    task.layout.label_word_ids = l.at("label_word_ids").get<std::vector<int>>();
    task.layout.steering_prefixes = l.at("steering_prefixes").get<std::vector<std::vector<int>>>();
    task.layout.template_ids = l.at("template_ids").get<std::vector<int>>();
    auto instances = [](const nlohmann::json& arr) {
        std::vector<Instance> out;
        for (const auto& x : arr)
            out.push_back({x.at("token_ids").get<std::vector<int>>(), x.at("label").get<int>()});
        return out;
    };
    const auto& sp = j.at("split");
    task.split.k = sp.at("k").get<int>();
    task.split.num_classes = sp.at("num_classes").get<int>();
    task.split.train = instances(sp.at("train"));
    task.split.dev = instances(sp.at("dev"));
    task.split.test = instances(sp.at("test"));
    for (const auto& p : j.at("pretrain_pool"))
        task.pretrain_pool.push_back({p.at("prefix_ids").get<std::vector<int>>(),
                                      p.at("token_ids").get<std::vector<int>>(),
                                      p.at("label").get<int>(), p.at("steering").get<bool>()});
    return task;
}

inline void save_task(const GeneratedTask& task, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write task file '" + path + "'");
    f << task_to_json(task).dump() << '\n';
}

inline GeneratedTask load_task(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open task file '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError("task file '" + path + "': " + e.what());
    }
    return task_from_json(j);
}

inline CliConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const CliConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write config '" + path + "'");
    f << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace gdfo
