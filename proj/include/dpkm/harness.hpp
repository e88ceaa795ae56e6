#ifndef DPKM_HARNESS_HPP
#define DPKM_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpkm/core.hpp"

namespace dpkm::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BlobSpec {
    int n = 0;
    int dim = 0;
    int k = 0;
    double spread = 0.06;
};

struct ExperimentConfig {
    std::string data_path;           // CSV input; ignored when blobs is set
    bool csv_header = false;
    std::optional<BlobSpec> blobs;

    int k = 0;                       // clusters to fit
    int t_iters = 5;
    std::vector<double> epsilons = {0.05, 0.1, 0.2, 0.5, 1.0};
    int repetitions = 10;
    int chain_steps = 30000;
    double delta = 0.001;
    int lloyd_restarts = 10;
    double min_sep = 0.1;
    std::uint64_t seed = 1;

    bool skip_consistency = false;   // feed the raw trace to the chain (ablation)
    bool ball_projection = true;
};

// One (epsilon, repetition) cell. wcss_dpkm scores the final noisy iterate's
// centers on the real dataset; wcss_mcmc scores the post-processed centers on
// the same dataset with the same code path. A failed cell keeps its row with
// NaN metrics.
struct CellResult {
    double epsilon = 0.0;
    int rep = 0;
    double wcss_dpkm = 0.0;
    double wcss_mcmc = 0.0;
    double acceptance_rate = 0.0;
    double wall_time_ms = 0.0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
};

struct SummaryRow {
    double epsilon = 0.0;
    double wcss_dpkm_mean = 0.0;
    double wcss_dpkm_std = 0.0;
    double wcss_mcmc_mean = 0.0;
    double wcss_mcmc_std = 0.0;
};

struct ExperimentResult {
    std::vector<CellResult> cells; // |epsilons| x repetitions, in sweep order
    std::vector<SummaryRow> summary;
};

// Parses a numeric CSV (optionally skipping one header line) and normalizes
// it. Rejects ragged rows and non-numeric cells, naming the offending line.
core::Dataset load_csv(const std::string& path, bool header = false);

struct BlobsRaw {
    std::vector<core::Vec> points;
    std::vector<core::Vec> centers; // the k_true blob centers
};

// k_true Gaussian blobs with random centers in [-1, 1]^dim, n points split
// evenly (remainder to the earlier blobs). Pre-normalization coordinates.
BlobsRaw gen_blobs_raw(int n, int dim, int k_true, double spread, std::uint64_t seed);

// gen_blobs_raw followed by core::normalize.
core::Dataset gen_blobs(int n, int dim, int k_true, double spread, std::uint64_t seed);

// The dataset a config refers to (blobs or CSV). Blob generation derives its
// seed from the master seed, so the full run is reproducible from the config.
core::Dataset resolve_dataset(const ExperimentConfig& config);

// Full sweep: for every epsilon and repetition, run the noisy k-means under a
// cell-specific child seed, score its final centers, post-process the trace
// (consistency projection unless skipped, then the chain and the Lloyd
// finisher), and score the result on the same dataset. A throwing cell is
// recorded as failed without aborting the sweep. on_cell, when set, observes
// each cell as it completes.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::function<void(const CellResult&)>& on_cell = {});

// Per-epsilon mean and sample standard deviation over non-failed cells.
std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells);

// Writes <out_dir>/runs.csv (epsilon,rep,wcss_dpkm,wcss_mcmc,acceptance_rate,
// seed), <out_dir>/summary.csv (epsilon plus mean/std per method), and
// <out_dir>/timings.csv (epsilon,rep,wall_time_ms). runs.csv and summary.csv
// are byte-reproducible under a fixed master seed; wall times are kept apart
// for that reason. Floats use the shortest round-trip representation.
void emit_results(const ExperimentResult& result, const std::string& out_dir);

// Reads a runs.csv back into cell records (NaN metrics mark failed cells).
std::vector<CellResult> parse_runs_csv(const std::string& path);

void write_runs_csv(const std::vector<CellResult>& cells, const std::string& path);
void write_summary_csv(const std::vector<SummaryRow>& summary, const std::string& path);

// Row-level pieces of runs.csv, for writers that stream cells as they finish.
std::string runs_csv_header();
std::string runs_csv_row(const CellResult& cell);

void write_matrix_csv(const std::string& path, const std::vector<core::Vec>& rows);

} // namespace dpkm::harness

#endif
