// Command-line front end: dataset generation, training, model evaluation,
// problem generation, planning, baselines, Monte-Carlo evaluation, reports.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccplan/ccik.hpp"
#include "ccplan/chain.hpp"
#include "ccplan/dataset.hpp"
#include "ccplan/planner.hpp"
#include "ccplan/risk_eval.hpp"
#include "ccplan/svg.hpp"
#include "ccplan/train.hpp"

namespace fs = std::filesystem;
using namespace ccplan;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Atomic output: write to a sibling temp file, then rename.
template <typename WriteFn>
void write_atomically(const std::string& path, WriteFn&& fn) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    fn(tmp.string());
    fs::rename(tmp, target);
}

std::uint64_t env_override_u64(const char* name, std::uint64_t fallback) {
    const char* v = std::getenv(name);
    return v ? std::strtoull(v, nullptr, 10) : fallback;
}

KinematicChain load_chain_arg(const std::string& path) {
    if (path.empty()) return default_planar_chain();
    return load_chain(path);
}

nlohmann::json config_echo_base(std::uint64_t seed, int jobs) {
    nlohmann::json j;
    j["seed"] = seed;
    j["jobs"] = jobs;
    return j;
}

// Effective config priority: explicit CLI flag > config file value > default.
void enable_config_file(CLI::App* cmd) {
    cmd->set_config("--config", "", "TOML config file (flag > file > default)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chance-constrained motion planning under sensing uncertainty"};
    app.require_subcommand(1);

    std::uint64_t seed = env_override_u64("CCPLAN_SEED", 0);
    int jobs = static_cast<int>(env_override_u64("CCPLAN_JOBS", 1));
    app.add_option("--seed", seed, "master random seed")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads where supported")->capture_default_str();

    std::string chain_path;
    app.add_option("--chain", chain_path, "chain JSON file (default: built-in 3-DoF planar arm)");

    // ---- gen-dataset ----
    auto* gen_dataset = app.add_subcommand("gen-dataset", "sample a training dataset");
    enable_config_file(gen_dataset);
    std::string dataset_out = "dataset.bin";
    DatasetSizes sizes;
    double sigma = 0.02;
    double shell = 0.1;
    bool paper_scale = false;
    gen_dataset->add_option("--out", dataset_out, "output dataset file")->capture_default_str();
    gen_dataset->add_option("--configurations", sizes.configurations)->capture_default_str();
    gen_dataset->add_option("--random-points", sizes.random_points)->capture_default_str();
    gen_dataset->add_option("--near-per-link", sizes.near_per_link)->capture_default_str();
    gen_dataset->add_option("--inside-per-link", sizes.inside_per_link)->capture_default_str();
    gen_dataset->add_option("--draws", sizes.draws)->capture_default_str();
    gen_dataset->add_option("--sigma", sigma, "sensor noise std, m")->capture_default_str();
    gen_dataset->add_option("--near-shell", shell, "near-surface shell width, m")
        ->capture_default_str();
    gen_dataset->add_flag("--paper-scale", paper_scale, "use the full-scale dataset recipe");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train the stochastic distance model");
    enable_config_file(train);
    std::string train_dataset = "dataset.bin";
    std::string model_out = "model.bin";
    std::string trace_out;
    TrainHyper hyper;
    std::vector<int> hidden = {64, 64, 64, 64};
    double kl_weight = 1e-3;
    bool exact_kl = false;
    bool paper_hyper = false;
    train->add_option("--dataset", train_dataset)->capture_default_str();
    train->add_option("--out", model_out)->capture_default_str();
    train->add_option("--loss-csv", trace_out, "per-epoch loss trace CSV");
    train->add_option("--epochs", hyper.epochs)->capture_default_str();
    train->add_option("--lr", hyper.lr)->capture_default_str();
    train->add_option("--batch", hyper.batch)->capture_default_str();
    train->add_option("--hidden", hidden, "hidden layer widths")->capture_default_str();
    train->add_option("--kl-weight", kl_weight)->capture_default_str();
    train->add_flag("--exact-kl", exact_kl, "exact Gaussian KL instead of the displayed form");
    train->add_flag("--paper-hyper", paper_hyper, "500 epochs, lr 1e-4, batch 512");

    // ---- eval-model ----
    auto* eval_model = app.add_subcommand("eval-model", "held-out accuracy of a trained model");
    enable_config_file(eval_model);
    std::string eval_model_path = "model.bin";
    std::string eval_out;
    int eval_paths = 100;
    double eval_sigma = 0.02;
    eval_model->add_option("--model", eval_model_path)->capture_default_str();
    eval_model->add_option("--paths", eval_paths, "number of random discretized paths")
        ->capture_default_str();
    eval_model->add_option("--sigma", eval_sigma, "generating noise std, m")->capture_default_str();
    eval_model->add_option("--out", eval_out, "accuracy table CSV (default: stdout only)");

    // ---- gen-problems ----
    auto* gen_problems = app.add_subcommand("gen-problems", "perturbed problem instances");
    enable_config_file(gen_problems);
    std::string problems_dir = "problems";
    std::string nominal_scene_path;
    std::string nominal_out;
    int problem_count = 30;
    PerturbationSpec pspec;
    SceneGenConfig scene_cfg;
    gen_problems->add_option("--out-dir", problems_dir)->capture_default_str();
    gen_problems->add_option("--count", problem_count)->capture_default_str();
    gen_problems->add_option("--scene", nominal_scene_path,
                             "nominal scene JSON (default: generated tabletop)");
    gen_problems->add_option("--save-nominal", nominal_out, "write the nominal scene JSON here");
    gen_problems->add_option("--object-jitter", pspec.object_jitter, "m per axis")
        ->capture_default_str();
    gen_problems->add_option("--object-rot", pspec.object_rot_deg, "deg")->capture_default_str();
    gen_problems->add_option("--base-jitter", pspec.base_jitter, "m per axis")
        ->capture_default_str();
    gen_problems->add_option("--base-rot", pspec.base_rot_deg, "deg")->capture_default_str();
    gen_problems->add_option("--objects", scene_cfg.objects, "clutter objects in the nominal scene")
        ->capture_default_str();
    gen_problems->add_option("--sensor-sigma", scene_cfg.sensor_sigma)->capture_default_str();

    // ---- plan ----
    auto* plan = app.add_subcommand("plan", "chance-constrained hierarchical plan");
    enable_config_file(plan);
    std::string plan_problem = "problem.json";
    std::string plan_model = "model.bin";
    std::string plan_out = "path.json";
    std::string candidate_out;
    std::string log_out;
    PlannerConfig plan_cfg;
    bool use_mip = false;
    bool analytic_model = false;
    plan->add_option("--problem", plan_problem)->capture_default_str();
    plan->add_option("--model", plan_model)->capture_default_str();
    plan->add_option("--out", plan_out)->capture_default_str();
    plan->add_option("--candidate-out", candidate_out, "also write the candidate path");
    plan->add_option("--log", log_out, "per-step debug records (JSON lines)");
    plan->add_option("--delta", plan_cfg.delta, "total path risk bound")->capture_default_str();
    plan->add_option("--attempts", plan_cfg.attempts)->capture_default_str();
    plan->add_option("--spacing", plan_cfg.spacing, "waypoint spacing, rad")->capture_default_str();
    plan->add_option("--step-bound", plan_cfg.ccik.step_bound)->capture_default_str();
    plan->add_option("--h-risk", plan_cfg.ccik.h_risk)->capture_default_str();
    plan->add_option("--prune-distance", plan_cfg.ccik.prune_distance)->capture_default_str();
    plan->add_option("--pwl-segments", plan_cfg.ccik.pwl_segments)->capture_default_str();
    plan->add_flag("--mip", use_mip, "solve each waypoint as a mixed-integer program");
    plan->add_flag("--analytic-model", analytic_model,
                   "use the exact-geometry reference model instead of a checkpoint");

    // ---- baseline ----
    auto* baseline = app.add_subcommand("baseline", "inflation baseline plan");
    enable_config_file(baseline);
    std::string base_problem = "problem.json";
    std::string base_out = "baseline.json";
    double ratio = 0.0;
    int base_attempts = 15;
    baseline->add_option("--problem", base_problem)->capture_default_str();
    baseline->add_option("--out", base_out)->capture_default_str();
    baseline->add_option("--ratio", ratio, "radius inflation ratio")->capture_default_str();
    baseline->add_option("--attempts", base_attempts)->capture_default_str();

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "Monte-Carlo risk of paths, or a full sweep");
    enable_config_file(evaluate);
    std::string eval_problem;
    std::string eval_path;
    std::string eval_problems_dir;
    std::string eval_model_ckpt;
    std::string report_out = "report.csv";
    int mc_samples = 5000;
    BenchmarkConfig bench_cfg;
    bool eval_analytic = false;
    evaluate->add_option("--problem", eval_problem, "single problem JSON (with --path)");
    evaluate->add_option("--path", eval_path, "single path JSON to score");
    evaluate->add_option("--problems-dir", eval_problems_dir,
                         "problem directory: runs the full benchmark sweep");
    evaluate->add_option("--model", eval_model_ckpt, "checkpoint for the proposed method");
    evaluate->add_option("--out", report_out, "report CSV")->capture_default_str();
    evaluate->add_option("--samples", mc_samples, "Monte-Carlo samples per path")
        ->capture_default_str();
    evaluate->add_option("--delta", bench_cfg.planner.delta)->capture_default_str();
    evaluate->add_option("--attempts", bench_cfg.planner.attempts)->capture_default_str();
    evaluate->add_flag("--analytic-model", eval_analytic,
                       "reference model instead of a checkpoint");

    // ---- report ----
    auto* report = app.add_subcommand("report", "plots and summary from a report CSV");
    enable_config_file(report);
    std::string report_csv = "report.csv";
    std::string report_dir = "report";
    report->add_option("--report-csv", report_csv)->capture_default_str();
    report->add_option("--out-dir", report_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const auto chain = load_chain_arg(chain_path);

        if (*gen_dataset) {
            if (paper_scale) sizes = paper_dataset_sizes();
            Rng rng(seed);
            Aabb bounds;
            bounds.lo = Vec::Constant(chain.dim, -1.5);
            bounds.hi = Vec::Constant(chain.dim, 1.5);
            const Dataset ds = generate_dataset(chain, bounds, sizes, sigma, rng, shell);
            write_atomically(dataset_out, [&](const std::string& p) { save_dataset(ds, p); });
            std::cout << "wrote " << ds.samples.size() << " samples to " << dataset_out << "\n";
        } else if (*train) {
            const Dataset ds = load_dataset(train_dataset);
            ModelConfig cfg;
            cfg.n = ds.n;
            cfg.d = ds.d;
            cfg.K = ds.K;
            cfg.hidden = hidden;
            cfg.kl_weight = kl_weight;
            cfg.exact_kl = exact_kl;
            cfg.finalize();
            if (paper_hyper) hyper = paper_train_hyper();
            hyper.seed = seed;
            const TrainResult result = train_model(ds, cfg, hyper);
            write_atomically(model_out,
                             [&](const std::string& p) { save_model(cfg, result.params, p); });
            if (!trace_out.empty()) {
                write_atomically(trace_out,
                                 [&](const std::string& p) { save_loss_trace(result.trace, p); });
            }
            std::cout << "final loss " << result.trace.back().total << " (nll "
                      << result.trace.back().nll << ", kl " << result.trace.back().kl << ")\n";
        } else if (*eval_model) {
            auto [cfg, params] = load_model(eval_model_path);
            Aabb bounds;
            bounds.lo = Vec::Constant(chain.dim, -1.5);
            bounds.hi = Vec::Constant(chain.dim, 1.5);
            Rng rng(seed);
            const ModelAccuracy acc = evaluate_model_accuracy(chain, cfg, params, bounds,
                                                              eval_sigma, eval_paths, rng);
            std::ostringstream table;
            table << "link,mu_mae_m,sigma_mae_m\n";
            for (int k = 0; k < cfg.K; ++k) {
                table << k << "," << acc.mu_mae[k] << "," << acc.sigma_mae[k] << "\n";
            }
            std::cout << table.str();
            std::cout << "standardized residual variance: " << acc.standardized_residual_var
                      << " (calibration gate: [0.5, 2.0])\n";
            if (!eval_out.empty()) {
                write_atomically(eval_out, [&](const std::string& p) {
                    std::ofstream out(p);
                    out << "# seed=" << seed << " paths=" << eval_paths << "\n" << table.str();
                });
            }
        } else if (*gen_problems) {
            Rng rng(seed);
            const Scene nominal = nominal_scene_path.empty()
                                      ? default_tabletop_scene(chain, scene_cfg, rng)
                                      : load_scene(nominal_scene_path);
            if (!nominal_out.empty()) {
                write_atomically(nominal_out,
                                 [&](const std::string& p) { save_scene(nominal, p); });
            }
            pspec.seed = seed;
            const auto problems = generate_problems(chain, nominal, pspec, problem_count);
            fs::create_directories(problems_dir);
            for (std::size_t i = 0; i < problems.size(); ++i) {
                std::ostringstream name;
                name << "problem_" << std::setw(3) << std::setfill('0') << i << ".json";
                write_atomically((fs::path(problems_dir) / name.str()).string(),
                                 [&](const std::string& p) { save_problem(problems[i], p); });
            }
            std::cout << "wrote " << problems.size() << " problems to " << problems_dir << "\n";
        } else if (*plan) {
            const ProblemInstance problem = load_problem(plan_problem);
            std::unique_ptr<DistanceModel> model;
            if (analytic_model) {
                model = std::make_unique<AnalyticDistanceModel>(chain, 0.02);
            } else {
                model = std::make_unique<NeuralDistanceModel>(plan_model);
            }
            plan_cfg.seed = seed;
            plan_cfg.ccik.use_mip = use_mip;
            plan_cfg.verbose_steps = !log_out.empty();
            const PlanResult result = hierarchical_plan(chain, problem, *model, plan_cfg);
            if (!log_out.empty()) {
                write_atomically(log_out, [&](const std::string& p) {
                    std::ofstream out(p);
                    for (const auto& line : result.step_log) out << line << "\n";
                });
            }
            if (!result.success) {
                std::cerr << "planning failed: " << result.failure << "\n";
                return kExitRuntime;
            }
            write_atomically(plan_out, [&](const std::string& p) {
                save_path(result.safe, p, &result.ledger);
            });
            if (!candidate_out.empty()) {
                write_atomically(candidate_out,
                                 [&](const std::string& p) { save_path(result.candidate, p); });
            }
            std::cout << "risk bound " << result.ledger.risk_bound() << ", residual budget "
                      << result.ledger.residual() << ", waypoints "
                      << result.safe.waypoints.size() << "\n";
        } else if (*baseline) {
            const ProblemInstance problem = load_problem(base_problem);
            Rng rng(seed);
            RRTConfig rrt_cfg;
            const auto path = inflate_baseline(chain, problem, ratio, rrt_cfg, base_attempts, rng);
            if (!path) {
                std::cerr << "baseline planning failed (ratio " << ratio << ")\n";
                return kExitRuntime;
            }
            write_atomically(base_out, [&](const std::string& p) { save_path(*path, p); });
            std::cout << "baseline path with " << path->waypoints.size() << " waypoints\n";
        } else if (*evaluate) {
            if (!eval_problems_dir.empty()) {
                std::vector<ProblemInstance> problems;
                std::vector<fs::path> files;
                for (const auto& entry : fs::directory_iterator(eval_problems_dir)) {
                    if (entry.path().extension() == ".json") files.push_back(entry.path());
                }
                std::sort(files.begin(), files.end());
                for (const auto& f : files) problems.push_back(load_problem(f.string()));
                if (problems.empty()) throw std::runtime_error("no problems found");

                std::unique_ptr<DistanceModel> model;
                if (eval_analytic) {
                    model = std::make_unique<AnalyticDistanceModel>(chain, 0.02);
                } else if (!eval_model_ckpt.empty()) {
                    model = std::make_unique<NeuralDistanceModel>(eval_model_ckpt);
                } else {
                    throw std::runtime_error("evaluate sweep needs --model or --analytic-model");
                }
                bench_cfg.mc_samples = mc_samples;
                bench_cfg.seed = seed;
                bench_cfg.jobs = jobs;
                nlohmann::json echo = config_echo_base(seed, jobs);
                echo["samples"] = mc_samples;
                echo["delta"] = bench_cfg.planner.delta;
                echo["attempts"] = bench_cfg.planner.attempts;
                BenchmarkReport rep = run_benchmark(chain, problems, *model, bench_cfg);
                rep.config_echo = echo.dump();
                write_atomically(report_out, [&](const std::string& p) { save_report_csv(rep, p); });
                std::cout << "wrote " << rep.rows.size() << " rows to " << report_out << "\n";
            } else if (!eval_path.empty() && !eval_problem.empty()) {
                const ProblemInstance problem = load_problem(eval_problem);
                RiskLedger ledger;
                const Path path = load_path(eval_path, &ledger);
                Rng rng(seed);
                const RiskEstimate est =
                    mc_path_risk(chain, path, problem.scene, mc_samples, rng, 1e-3, jobs);
                const PathMetrics metrics = path_metrics(chain, path);
                std::cout << "risk " << est.risk << " [" << est.ci_lo << ", " << est.ci_hi
                          << "] over " << est.samples << " samples; length " << metrics.length_rad
                          << " rad, ee displacement " << metrics.ee_disp_m << " m\n";
            } else {
                throw std::runtime_error("evaluate needs --problems-dir or --problem plus --path");
            }
        } else if (*report) {
            std::ifstream in(report_csv);
            if (!in) throw std::runtime_error("cannot open report: " + report_csv);
            BenchmarkReport rep;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || line.rfind("problem,", 0) == 0) continue;
                BenchmarkRow row;
                std::istringstream ls(line);
                std::string cell;
                std::getline(ls, cell, ',');
                row.problem = std::stoi(cell);
                std::getline(ls, row.method, ',');
                std::getline(ls, cell, ',');
                row.success = cell == "1";
                std::getline(ls, cell, ',');
                row.risk.risk = std::stod(cell);
                std::getline(ls, cell, ',');
                row.risk.ci_lo = std::stod(cell);
                std::getline(ls, cell, ',');
                row.risk.ci_hi = std::stod(cell);
                std::getline(ls, cell, ',');
                row.risk_bound = std::stod(cell);
                std::getline(ls, cell, ',');
                row.initial_risk = std::stod(cell);
                std::getline(ls, cell, ',');
                row.metrics.length_rad = std::stod(cell);
                std::getline(ls, cell, ',');
                row.metrics.ee_disp_m = std::stod(cell);
                rep.rows.push_back(row);
            }
            fs::create_directories(report_dir);
            write_risk_cdf_svg(rep, (fs::path(report_dir) / "risk_cdf.svg").string());

            std::ostringstream md;
            md << "# Benchmark summary\n\n";
            md << "| method | mean risk | mean length (rad) | mean EE disp (m) | success |\n";
            md << "|---|---|---|---|---|\n";
            for (const auto& method : rep.methods()) {
                double risk = 0, len = 0, disp = 0;
                int total = 0, ok = 0;
                for (const auto& row : rep.rows) {
                    if (row.method != method) continue;
                    ++total;
                    if (row.success) ++ok;
                }
                if (rep.method_means(method, &risk, &len, &disp)) {
                    md << "| " << method << " | " << risk << " | " << len << " | " << disp
                       << " | " << ok << "/" << total << " |\n";
                }
            }
            write_atomically((fs::path(report_dir) / "summary.md").string(),
                             [&](const std::string& p) {
                                 std::ofstream out(p);
                                 out << md.str();
                             });
            std::cout << "wrote " << report_dir << "/risk_cdf.svg and summary.md\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
