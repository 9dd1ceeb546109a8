#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "gdfo/bench.hpp"
#include "gdfo/config.hpp"

using namespace gdfo;

namespace {

// Reduced configuration: all pipeline mechanics, a fraction of the runtime.
ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.task.pretrain_corpus_size = 1500;
    cfg.task.test_size = 80;
    cfg.distill.epochs = 40;
    cfg.episode.train_steps = 12;
    cfg.episode.population_size = 4;
    cfg.episode.budget = 400;
    return cfg;
}

}  // namespace

TEST_CASE("split sizes follow the k-shot protocol") {
    TaskSpec spec;  // C = 2, k = 16
    spec.seed = 5;
    GeneratedTask t2 = generate_task(spec);
    CHECK(t2.split.train.size() == 32);
    CHECK(t2.split.dev.size() == 32);
    CHECK(t2.split.test.size() == 500);

    TaskSpec spec14;
    spec14.num_classes = 14;
    spec14.num_tasks = 2;
    spec14.vocab_size = 512;
    spec14.content_tokens_per_class = 12;
    spec14.shared_tokens_per_class = 2;
    spec14.test_size = 300;
    spec14.seed = 6;
    GeneratedTask t14 = generate_task(spec14);
    CHECK(t14.split.train.size() == 224);  // 16 shots x 14 classes
    CHECK(t14.split.dev.size() == 224);
}

TEST_CASE("identical seeds produce byte-identical tasks") {
    TaskSpec spec;
    spec.seed = 11;
    const auto a = task_to_json(generate_task(spec)).dump();
    const auto b = task_to_json(generate_task(spec)).dump();
    CHECK(a == b);
    spec.seed = 12;
    CHECK(task_to_json(generate_task(spec)).dump() != a);
}

TEST_CASE("split members are pairwise disjoint and Bayes-decodable") {
    TaskSpec spec;
    spec.seed = 13;
    GeneratedTask task = generate_task(spec);
    std::set<std::vector<int>> seen;
    for (const auto* split : {&task.split.train, &task.split.dev, &task.split.test})
        for (const auto& inst : *split) CHECK(seen.insert(inst.token_ids).second);
    CHECK(task.bayes_accuracy >= 0.90);
    // template is appended and its tail is the mask position
    for (const auto& inst : task.split.train) {
        REQUIRE(inst.token_ids.size() >= 2);
        CHECK(inst.token_ids.back() == task.layout.template_ids.back());
    }
}

TEST_CASE("an unlearnable spec is rejected") {
    TaskSpec spec;
    spec.off_class_mass = 0.49;  // content tokens carry almost no signal
    spec.shared_mass = 0.0;      // and no shared-token signal either
    spec.seed = 14;
    CHECK_THROWS_AS(generate_task(spec), ConfigError);
}

TEST_CASE("steering prefixes decode to their own task") {
    TaskSpec spec;
    spec.seed = 15;
    GeneratedTask task = generate_task(spec);
    const auto& l = task.layout;
    for (int m = 0; m < spec.num_tasks; ++m)
        CHECK(l.prefix_task(l.steering_prefixes[static_cast<std::size_t>(m)]) == m);
    CHECK(l.prefix_task({0, 1, 2}) == 0);  // no steering tokens: default task
}

TEST_CASE("preset names round-trip and unknown names are config errors") {
    for (Preset p : {Preset::kGdfo, Preset::kGdfoWoKd, Preset::kGdfoWoDfo, Preset::kBbtOnly,
                     Preset::kManualPrompt})
        CHECK(parse_preset(preset_name(p)) == p);
    CHECK_THROWS_AS(parse_preset("gdfo-extreme"), ConfigError);
}

TEST_CASE("manual-prompt consumes API calls only for test-set inference") {
    ExperimentConfig cfg = quick_config();
    SeedContext ctx = build_seed_context(cfg, 31);
    PipelineResult r = run_pipeline(cfg, ctx, Preset::kManualPrompt);
    CHECK(r.kd_calls == 0);
    CHECK(r.train_calls == 0);
    CHECK(r.infer_calls == static_cast<std::uint64_t>(cfg.task.test_size));
}

TEST_CASE("the no-DFO preset leaves CMA-ES at its initial state") {
    ExperimentConfig cfg = quick_config();
    SeedContext ctx = build_seed_context(cfg, 32);
    PipelineResult r = run_pipeline(cfg, ctx, Preset::kGdfoWoDfo);
    REQUIRE(r.final_state);
    CHECK(r.final_state->cma.generation() == 0);
    for (double m : r.final_state->cma.mean()) CHECK(m == 0.0);
    CHECK(r.train_calls == 0);  // the gradient arm never queries the teacher
    CHECK(r.kd_calls > 0);
}

TEST_CASE("ablation consistency: sweep endpoints equal their presets bit for bit") {
    ExperimentConfig cfg = quick_config();
    const std::vector<std::uint64_t> seeds{41, 42};
    auto presets = run_experiment(cfg, {Preset::kBbtOnly, Preset::kGdfoWoDfo}, seeds);
    auto sweep = alpha_sweep(cfg, {0.0, 1.0}, seeds);
    REQUIRE(presets.rows.size() == sweep.rows.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        // rows are ordered seed-major, preset/alpha-minor
        CHECK(presets.rows[2 * i].accuracy == sweep.rows[2 * i].accuracy);          // bbt vs a=0
        CHECK(presets.rows[2 * i + 1].accuracy == sweep.rows[2 * i + 1].accuracy);  // wo-dfo vs a=1
    }
}

TEST_CASE("experiments are reproducible from config and seeds alone") {
    ExperimentConfig cfg = quick_config();
    auto a = run_experiment(cfg, {Preset::kManualPrompt, Preset::kBbtOnly}, {51});
    auto b = run_experiment(cfg, {Preset::kManualPrompt, Preset::kBbtOnly}, {51});
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].accuracy == b.rows[i].accuracy);
        CHECK(a.rows[i].train_calls == b.rows[i].train_calls);
    }
}

TEST_CASE("summaries aggregate by name in first-seen order") {
    std::vector<ExperimentRow> rows{{"a", 1, 0.5, 0, 0, 0},
                                    {"b", 1, 0.25, 0, 0, 0},
                                    {"a", 2, 0.7, 0, 0, 0},
                                    {"b", 2, 0.25, 0, 0, 0}};
    auto s = summarize(rows);
    REQUIRE(s.size() == 2);
    CHECK(s[0].name == "a");
    CHECK(s[0].mean == Catch::Approx(0.6));
    CHECK(s[0].stddev == Catch::Approx(std::sqrt(0.02)));
    CHECK(s[1].stddev == 0.0);
    CHECK(s[0].n == 2);
}

TEST_CASE("an alpha list of five values yields five summary rows") {
    std::vector<ExperimentRow> rows;
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        std::ostringstream name;
        name << a;
        rows.push_back({name.str(), 1, a, 0, 0, 0});
    }
    CHECK(summarize(rows).size() == 5);
}

TEST_CASE("output artifacts are written to the requested directory") {
    ExperimentConfig cfg = quick_config();
    const std::string dir = "/tmp/gdfo_bench_artifacts";
    std::filesystem::create_directories(dir);
    run_experiment(cfg, {Preset::kManualPrompt}, {61}, dir);
    alpha_sweep(cfg, {0.0, 1.0}, {61}, dir);
    for (const char* name : {"experiment_seeds.csv", "experiment_summary.csv", "experiment.svg",
                             "alpha_seeds.csv", "alpha_summary.csv", "alpha_sweep.svg"}) {
        INFO(name);
        std::ifstream f(dir + "/" + name);
        CHECK(f.good());
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("invalid presets, alphas and empty plans are config errors") {
    ExperimentConfig cfg = quick_config();
    CHECK_THROWS_AS(run_experiment(cfg, {}, {1}), ConfigError);
    CHECK_THROWS_AS(run_experiment(cfg, {Preset::kGdfo}, {}), ConfigError);
    CHECK_THROWS_AS(alpha_sweep(cfg, {1.5}, {1}), ConfigError);
}

TEST_CASE("config files round-trip and reject unknown keys") {
    CliConfig cfg;
    cfg.experiment.episode.alpha = 0.25;
    cfg.experiment.task.k_shot = 8;
    cfg.seeds = {7, 8};
    const std::string path = "/tmp/gdfo_test_config.json";
    save_config(cfg, path);
    CliConfig back = load_config(path);
    CHECK(back.experiment.episode.alpha == 0.25);
    CHECK(back.experiment.task.k_shot == 8);
    CHECK(back.seeds == std::vector<std::uint64_t>{7, 8});
    std::remove(path.c_str());

    nlohmann::json j = config_to_json(cfg);
    j["task"]["no_such_field"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    nlohmann::json no_version = config_to_json(cfg);
    no_version.erase("version");
    CHECK_THROWS_AS(config_from_json(no_version), ConfigError);
}

TEST_CASE("the endpoint env var overrides the config file") {
    CliConfig cfg;
    cfg.endpoint = "127.0.0.1:7711";
    ::setenv("GDFO_ENDPOINT", "127.0.0.1:9999", 1);
    CHECK(cfg.effective_endpoint() == "127.0.0.1:9999");
    ::unsetenv("GDFO_ENDPOINT");
    CHECK(cfg.effective_endpoint() == "127.0.0.1:7711");
}

TEST_CASE("task files round-trip losslessly") {
    TaskSpec spec;
    spec.seed = 71;
    spec.test_size = 40;
    spec.pretrain_corpus_size = 100;
    GeneratedTask task;
    try {
        task = generate_task(spec);
    } catch (const ConfigError&) {
        // tiny corpora can fail the corpus-size validation; enlarge
        spec.pretrain_corpus_size = 200;
        task = generate_task(spec);
    }
    const std::string path = "/tmp/gdfo_test_task.json";
    save_task(task, path);
    GeneratedTask back = load_task(path);
    CHECK(task_to_json(back).dump() == task_to_json(task).dump());
    std::remove(path.c_str());
}
