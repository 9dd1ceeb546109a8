// Command-line interface: task generation, teacher pre-training, the metered
// service, distillation, joint training, inference and the experiment
// harness. See README.md for the config schema and CSV formats.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gdfo/gdfo.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

gdfo::CliConfig load_or_default(const std::string& path) {
    if (path.empty()) return {};
    return gdfo::load_config(path);
}

std::vector<std::uint64_t> parse_u64_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

// Handle factory: socket endpoint when given, otherwise a fresh in-process
// service around the teacher checkpoint.
std::unique_ptr<gdfo::BlackBoxHandle> make_handle(const std::string& endpoint,
                                                  const std::string& teacher_ckpt,
                                                  std::uint64_t budget) {
    if (!endpoint.empty()) return std::make_unique<gdfo::SocketHandle>(endpoint);
    if (teacher_ckpt.empty())
        throw gdfo::ConfigError("need --endpoint or --teacher to reach the black box");
    auto teacher = gdfo::ModelParams::from_checkpoint(gdfo::Checkpoint::load(teacher_ckpt));
    auto service = std::make_shared<gdfo::TeacherService>(std::move(teacher), budget);
    return std::make_unique<gdfo::InProcessHandle>(std::move(service));
}

gdfo::GeneratedTask task_for_seed(const gdfo::CliConfig& cfg, std::uint64_t seed) {
    gdfo::TaskSpec spec = cfg.experiment.task;
    spec.seed = gdfo::derive_seed(seed, "task");
    return gdfo::generate_task(spec);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GDFO: gradient descent meets derivative-free prompt optimization"};
    app.require_subcommand(1);

    std::string config_path, task_path, teacher_path, student_path, state_path, out_path;
    std::string endpoint, csv_path, outdir = ".", presets_csv = "gdfo,bbt-only,gdfo-wo-dfo,gdfo-wo-kd,manual-prompt";
    std::string seeds_csv, alphas_csv = "0,0.25,0.5,0.75,1", instance_csv, split_name = "test";
    std::uint64_t seed = 1;
    std::uint64_t budget_flag = 0;
    int limit = 0;

    auto* print_config = app.add_subcommand("print-config", "write the default config JSON");
    print_config->add_option("--out", out_path, "output path (stdout when omitted)");

    auto* gen_task = app.add_subcommand("gen-task", "generate the synthetic task and k-shot split");
    gen_task->add_option("--config", config_path, "config JSON");
    gen_task->add_option("--seed", seed, "master seed")->required();
    gen_task->add_option("--out", out_path, "task file to write")->required();

    auto* pretrain = app.add_subcommand("pretrain-teacher", "pre-train and freeze the teacher");
    pretrain->add_option("--config", config_path, "config JSON");
    pretrain->add_option("--task", task_path, "task file")->required();
    pretrain->add_option("--seed", seed, "master seed")->required();
    pretrain->add_option("--out", out_path, "teacher checkpoint to write")->required();

    auto* serve_cmd = app.add_subcommand("serve", "serve a frozen teacher over a socket");
    serve_cmd->add_option("--config", config_path, "config JSON");
    serve_cmd->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    serve_cmd->add_option("--bind", endpoint, "host:port (default from config/env)");
    serve_cmd->add_option("--budget", budget_flag, "API call budget (default from config)");

    auto* distill_cmd = app.add_subcommand("distill", "phase 1: distill the student");
    distill_cmd->add_option("--config", config_path, "config JSON");
    distill_cmd->add_option("--task", task_path, "task file")->required();
    distill_cmd->add_option("--teacher", teacher_path, "teacher checkpoint (vocab table; also serves in-process when no endpoint)")->required();
    distill_cmd->add_option("--endpoint", endpoint, "query a served teacher instead of in-process");
    distill_cmd->add_option("--seed", seed, "master seed")->required();
    distill_cmd->add_option("--out", out_path, "student checkpoint to write")->required();
    distill_cmd->add_option("--csv", csv_path, "per-epoch metrics CSV");

    auto* train_cmd = app.add_subcommand("train", "phase 2: joint generator + CMA-ES training");
    train_cmd->add_option("--config", config_path, "config JSON");
    train_cmd->add_option("--task", task_path, "task file")->required();
    train_cmd->add_option("--teacher", teacher_path, "teacher checkpoint (p0 table; also serves in-process when no endpoint)")->required();
    train_cmd->add_option("--endpoint", endpoint, "query a served teacher instead of in-process");
    train_cmd->add_option("--student", student_path, "student checkpoint (distilled)")->required();
    train_cmd->add_option("--seed", seed, "master seed")->required();
    train_cmd->add_option("--out", out_path, "train-state snapshot to write")->required();
    train_cmd->add_option("--csv", csv_path, "per-step metrics CSV");

    auto* infer_cmd = app.add_subcommand("infer", "predict through the black box");
    infer_cmd->add_option("--state", state_path, "train-state snapshot")->required();
    infer_cmd->add_option("--teacher", teacher_path, "teacher checkpoint (in-process)");
    infer_cmd->add_option("--endpoint", endpoint, "served teacher endpoint");
    infer_cmd->add_option("--instance", instance_csv, "comma-separated token ids");
    infer_cmd->add_option("--task", task_path, "task file for split evaluation");
    infer_cmd->add_option("--split", split_name, "train|dev|test (with --task)");
    infer_cmd->add_option("--limit", limit, "evaluate at most this many instances");

    auto* experiment_cmd = app.add_subcommand("experiment", "run preset/ablation comparison");
    experiment_cmd->add_option("--config", config_path, "config JSON");
    experiment_cmd->add_option("--presets", presets_csv, "comma-separated preset names");
    experiment_cmd->add_option("--seeds", seeds_csv, "comma-separated master seeds");
    experiment_cmd->add_option("--outdir", outdir, "directory for CSVs and the plot");

    auto* sweep_cmd = app.add_subcommand("alpha-sweep", "sweep the balancing weight");
    sweep_cmd->add_option("--config", config_path, "config JSON");
    sweep_cmd->add_option("--alphas", alphas_csv, "comma-separated alpha values");
    sweep_cmd->add_option("--seeds", seeds_csv, "comma-separated master seeds");
    sweep_cmd->add_option("--outdir", outdir, "directory for CSVs and the plot");

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config->parsed()) {
            gdfo::CliConfig cfg;
            if (out_path.empty())
                std::cout << gdfo::config_to_json(cfg).dump(2) << '\n';
            else
                gdfo::save_config(cfg, out_path);
            return 0;
        }

        gdfo::CliConfig cfg = load_or_default(config_path);

        if (gen_task->parsed()) {
            auto task = task_for_seed(cfg, seed);
            gdfo::save_task(task, out_path);
            std::cout << "task written to " << out_path << " (downstream task "
                      << task.downstream_task << ", Bayes accuracy " << task.bayes_accuracy
                      << ", |train| = " << task.split.train.size() << ")\n";
            return 0;
        }

        if (pretrain->parsed()) {
            auto task = gdfo::load_task(task_path);
            auto teacher0 = gdfo::ModelParams::init(
                task.spec.vocab_size, task.spec.embed_dim, task.spec.n_prompt_tokens,
                cfg.experiment.model.teacher_hidden, cfg.experiment.model.teacher_variant,
                task.layout.label_word_ids, gdfo::derive_seed(seed, "teacher-init"));
            gdfo::PretrainConfig pcfg = cfg.experiment.pretrain;
            pcfg.seed = gdfo::derive_seed(seed, "pretrain");
            auto teacher = gdfo::pretrain_teacher(std::move(teacher0), task.pretrain_pool, pcfg);
            teacher.to_checkpoint().save(out_path);
            std::cout << "teacher written to " << out_path << " (checksum " << teacher.checksum()
                      << ")\n";
            return 0;
        }

        if (serve_cmd->parsed()) {
            auto teacher = gdfo::ModelParams::from_checkpoint(gdfo::Checkpoint::load(teacher_path));
            const std::uint64_t budget = budget_flag ? budget_flag : cfg.service_budget;
            const std::string bind = endpoint.empty() ? cfg.effective_endpoint() : endpoint;
            auto server = gdfo::serve(std::move(teacher), bind, budget);
            std::cout << "serving on " << server->endpoint() << " with budget " << budget
                      << " (Ctrl-C to stop)\n"
                      << std::flush;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server->stop();
            return 0;
        }

        if (distill_cmd->parsed()) {
            auto task = gdfo::load_task(task_path);
            auto table = gdfo::ModelParams::from_checkpoint(gdfo::Checkpoint::load(teacher_path));
            auto handle = make_handle(endpoint, teacher_path, cfg.service_budget);
            auto student0 = gdfo::ModelParams::init(
                task.spec.vocab_size, task.spec.embed_dim, task.spec.n_prompt_tokens,
                cfg.experiment.model.student_hidden, cfg.experiment.model.student_variant,
                task.layout.label_word_ids, gdfo::derive_seed(seed, "student-init"));
            gdfo::DistillConfig dcfg = cfg.experiment.distill;
            dcfg.seed = gdfo::derive_seed(seed, "distill");
            auto result = gdfo::run_distillation(*handle, student0, task.split.train, dcfg, table);
            result.student.to_checkpoint().save(out_path);
            if (!csv_path.empty()) {
                std::ofstream f(csv_path);
                gdfo::write_distill_csv(f, result.history);
            }
            std::cout << "student written to " << out_path << " after " << result.teacher_calls
                      << " teacher calls";
            if (!result.history.empty())
                std::cout << " (final train accuracy " << result.history.back().train_accuracy
                          << ", teacher agreement " << result.history.back().teacher_agreement
                          << ")";
            std::cout << '\n';
            return 0;
        }

        if (train_cmd->parsed()) {
            auto task = gdfo::load_task(task_path);
            auto table = gdfo::ModelParams::from_checkpoint(gdfo::Checkpoint::load(teacher_path));
            auto student = gdfo::ModelParams::from_checkpoint(gdfo::Checkpoint::load(student_path));
            auto handle = make_handle(endpoint, teacher_path, cfg.service_budget);
            gdfo::EpisodeConfig ecfg = cfg.experiment.episode;
            ecfg.seed = gdfo::derive_seed(seed, "episode");
            auto p0 = gdfo::sample_initial_prompt(table, task.spec.n_prompt_tokens,
                                                  gdfo::derive_seed(seed, "p0"));
            auto A = gdfo::make_projection(static_cast<std::size_t>(task.spec.prompt_width()),
                                           static_cast<std::size_t>(ecfg.subspace_dim),
                                           gdfo::derive_seed(seed, "projection"),
                                           ecfg.projection_scale);
            auto state = gdfo::init_train_state(ecfg, std::move(student), std::move(p0), std::move(A));
            std::vector<gdfo::StepMetrics> history;
            for (int step = 0; step < ecfg.train_steps; ++step) {
                if (ecfg.alpha == 1.0) {
                    gdfo::StepMetrics m;
                    m.step = step;
                    gdfo::generator_step(state, task.split.train, m);
                    m.api_calls_used = state.api_calls_used;
                    history.push_back(m);
                } else {
                    history.push_back(gdfo::joint_train_step(state, task.split.train, *handle));
                }
            }
            state.to_checkpoint().save(out_path);
            if (!csv_path.empty()) {
                std::ofstream f(csv_path);
                gdfo::write_train_csv(f, history);
            }
            std::cout << "train state written to " << out_path << " (api calls "
                      << state.api_calls_used << ", best teacher CE " << state.best_fitness
                      << ")\n";
            return 0;
        }

        if (infer_cmd->parsed()) {
            auto state = gdfo::TrainState::from_checkpoint(gdfo::Checkpoint::load(state_path));
            auto handle = make_handle(endpoint, teacher_path, cfg.service_budget);
            if (!instance_csv.empty()) {
                const auto ids = parse_int_list(instance_csv);
                std::cout << "predicted class: " << gdfo::infer(state, ids, *handle) << '\n';
                return 0;
            }
            if (task_path.empty())
                throw gdfo::ConfigError("infer: need --instance or --task with --split");
            auto task = gdfo::load_task(task_path);
            const auto& split = split_name == "train" ? task.split.train
                                : split_name == "dev" ? task.split.dev
                                                      : task.split.test;
            std::size_t n = split.size();
            if (limit > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(limit));
            int hits = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const int pred = gdfo::infer(state, split[i].token_ids, *handle);
                hits += pred == split[i].label;
            }
            std::cout << split_name << " accuracy: " << static_cast<double>(hits) / static_cast<double>(n)
                      << " over " << n << " instances\n";
            return 0;
        }

        if (experiment_cmd->parsed()) {
            std::vector<gdfo::Preset> presets;
            std::stringstream ss(presets_csv);
            std::string name;
            while (std::getline(ss, name, ','))
                if (!name.empty()) presets.push_back(gdfo::parse_preset(name));
            const auto seeds = seeds_csv.empty() ? cfg.seeds : parse_u64_list(seeds_csv);
            auto out = gdfo::run_experiment(cfg.experiment, presets, seeds, outdir);
            std::cout << "preset,mean_accuracy,std_accuracy,n_seeds\n";
            for (const auto& s : out.summary)
                std::cout << s.name << ',' << s.mean << ',' << s.stddev << ',' << s.n << '\n';
            std::cout << "artifacts in " << outdir << "/experiment_{seeds,summary}.csv and "
                      << outdir << "/experiment.svg\n";
            return 0;
        }

        if (sweep_cmd->parsed()) {
            const auto alphas = parse_double_list(alphas_csv);
            const auto seeds = seeds_csv.empty() ? cfg.seeds : parse_u64_list(seeds_csv);
            auto out = gdfo::alpha_sweep(cfg.experiment, alphas, seeds, outdir);
            std::cout << "alpha,mean_accuracy,std_accuracy,n_seeds\n";
            for (const auto& s : out.summary)
                std::cout << s.name << ',' << s.mean << ',' << s.stddev << ',' << s.n << '\n';
            std::cout << "artifacts in " << outdir << "/alpha_{seeds,summary}.csv and " << outdir
                      << "/alpha_sweep.svg\n";
            return 0;
        }
    } catch (const gdfo::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
