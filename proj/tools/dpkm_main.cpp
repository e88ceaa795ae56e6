#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpkm/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitAllCellsFailed = 3;

struct RunArgs {
    std::string data_path;
    std::vector<int> blobs; // N,d,K
    double blob_spread = 0.06;
    dpkm::harness::ExperimentConfig config;
    std::string out_dir = "results";
    bool no_ball_projection = false;
};

int do_run(RunArgs& args) {
    auto& config = args.config;
    if (!args.blobs.empty()) {
        dpkm::harness::BlobSpec spec;
        spec.n = args.blobs[0];
        spec.dim = args.blobs[1];
        spec.k = args.blobs[2];
        spec.spread = args.blob_spread;
        config.blobs = spec;
        if (config.k == 0) config.k = spec.k;
    } else {
        config.data_path = args.data_path;
    }
    config.ball_projection = !args.no_ball_projection;
    if (config.k == 0) {
        std::fprintf(stderr, "error: --k is required with --data\n");
        return kExitConfig;
    }

    // Stream finished cells into runs.csv as they come; emit_results rewrites
    // it with identical bytes at the end, alongside the summary and timings.
    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw dpkm::harness::IoError("cannot create output directory: " + args.out_dir);
    std::ofstream runs(args.out_dir + "/runs.csv", std::ios::binary);
    if (!runs) throw dpkm::harness::IoError("cannot open for writing: " + args.out_dir + "/runs.csv");
    runs << dpkm::harness::runs_csv_header();

    const auto result = dpkm::harness::run_experiment(config, [&](const dpkm::harness::CellResult& cell) {
        runs << dpkm::harness::runs_csv_row(cell);
        runs.flush();
        if (cell.failed)
            std::fprintf(stderr, "eps=%g rep=%d FAILED: %s\n", cell.epsilon, cell.rep, cell.error.c_str());
        else
            std::fprintf(stderr, "eps=%g rep=%d wcss_dpkm=%.6g wcss_mcmc=%.6g accept=%.3f (%.0f ms)\n",
                         cell.epsilon, cell.rep, cell.wcss_dpkm, cell.wcss_mcmc,
                         cell.acceptance_rate, cell.wall_time_ms);
    });
    runs.close();
    dpkm::harness::emit_results(result, args.out_dir);

    bool any_ok = false;
    for (const auto& cell : result.cells) any_ok = any_ok || !cell.failed;
    if (!any_ok) {
        std::fprintf(stderr, "error: every experiment cell failed\n");
        return kExitAllCellsFailed;
    }
    std::fprintf(stderr, "wrote %s/runs.csv, summary.csv, timings.csv\n", args.out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private k-means with trace post-processing"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run the epsilon sweep (noisy k-means vs. post-processed)");
    auto* data_opt = run->add_option("--data", run_args.data_path, "Input CSV, one numeric row per point");
    auto* blobs_opt = run->add_option("--blobs", run_args.blobs, "Synthetic Gaussian blobs: N,d,K")
                          ->delimiter(',')
                          ->expected(3);
    data_opt->excludes(blobs_opt);
    blobs_opt->excludes(data_opt);
    run->add_option("--spread", run_args.blob_spread, "Blob standard deviation (with --blobs)");
    run->add_option("--k", run_args.config.k, "Number of clusters (defaults to the blob K)");
    run->add_option("--t", run_args.config.t_iters, "Noisy iterations per run")->capture_default_str();
    run->add_option("--eps", run_args.config.epsilons, "Privacy budgets to sweep")->delimiter(',');
    run->add_option("--reps", run_args.config.repetitions, "Repetitions per epsilon")->capture_default_str();
    run->add_option("--chain-steps", run_args.config.chain_steps, "Markov chain length")->capture_default_str();
    run->add_option("--delta", run_args.config.delta, "Proposal component variance")->capture_default_str();
    run->add_option("--restarts", run_args.config.lloyd_restarts, "Lloyd restarts on the best dataset")->capture_default_str();
    run->add_option("--min-sep", run_args.config.min_sep, "Minimum pairwise distance of initial centers")->capture_default_str();
    run->add_option("--seed", run_args.config.seed, "Master seed")->capture_default_str();
    run->add_option("--out", run_args.out_dir, "Output directory")->capture_default_str();
    run->add_flag("--skip-consistency", run_args.config.skip_consistency,
                  "Feed the raw trace to the chain (ablation)");
    run->add_flag("--no-ball-projection", run_args.no_ball_projection,
                  "Do not rescale proposed points into the L1 ball (ablation)");
    run->add_flag("--header", run_args.config.csv_header, "Skip the first line of the input CSV");

    struct {
        int n = 5000, dim = 2, k = 15;
        double spread = 0.06;
        std::uint64_t seed = 1;
        std::string out = "blobs.csv";
    } gen_args;
    auto* gen = app.add_subcommand("gen", "Emit a synthetic blob dataset as CSV");
    gen->add_option("--n", gen_args.n, "Number of points")->capture_default_str();
    gen->add_option("--d", gen_args.dim, "Dimension")->capture_default_str();
    gen->add_option("--k", gen_args.k, "Number of blobs")->capture_default_str();
    gen->add_option("--spread", gen_args.spread, "Blob standard deviation")->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "Seed")->capture_default_str();
    gen->add_option("--out", gen_args.out, "Output CSV path")->capture_default_str();

    struct {
        std::string in;
        std::string out = "summary.csv";
    } sum_args;
    auto* sum = app.add_subcommand("summarize", "Aggregate a runs.csv into per-epsilon means");
    sum->add_option("runs", sum_args.in, "Per-run CSV produced by `run`")->required();
    sum->add_option("--out", sum_args.out, "Output CSV path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            if (run_args.blobs.empty() && run_args.data_path.empty()) {
                std::fprintf(stderr, "error: one of --data or --blobs is required\n");
                return kExitConfig;
            }
            return do_run(run_args);
        }
        if (gen->parsed()) {
            const auto raw = dpkm::harness::gen_blobs_raw(gen_args.n, gen_args.dim, gen_args.k,
                                                          gen_args.spread, gen_args.seed);
            dpkm::harness::write_matrix_csv(gen_args.out, raw.points);
            std::fprintf(stderr, "wrote %d points to %s\n", gen_args.n, gen_args.out.c_str());
            return kExitOk;
        }
        if (sum->parsed()) {
            const auto cells = dpkm::harness::parse_runs_csv(sum_args.in);
            dpkm::harness::write_summary_csv(dpkm::harness::summarize(cells), sum_args.out);
            std::fprintf(stderr, "wrote %s\n", sum_args.out.c_str());
            return kExitOk;
        }
    } catch (const dpkm::harness::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const dpkm::harness::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAllCellsFailed;
    }
    return kExitOk;
}
