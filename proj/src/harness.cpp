#include "dpkm/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string_view>
#include <tuple>

#include "dpkm/consistency.hpp"
#include "dpkm/dp_mechanism.hpp"
#include "dpkm/mcmc.hpp"
#include "dpkm/rng.hpp"

namespace dpkm::harness {

namespace {

// shortest representation that parses back to the same double
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_u64(std::uint64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

double parse_double(std::string_view field, const std::string& where) {
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw IoError(where + ": not a number: '" + std::string(field) + "'");
    return value;
}

std::uint64_t parse_u64(std::string_view field, const std::string& where) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw IoError(where + ": not an integer: '" + std::string(field) + "'");
    return value;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // LF line endings everywhere
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

} // namespace

core::Dataset load_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);

    std::vector<core::Vec> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (header && line_no == 1) continue;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        core::Vec row;
        row.reserve(fields.size());
        for (const auto field : fields) {
            const std::string where = path + ":" + std::to_string(line_no);
            const double value = parse_double(field, where);
            if (!std::isfinite(value)) throw IoError(where + ": non-finite value");
            row.push_back(value);
        }
        if (width == 0) width = row.size();
        else if (row.size() != width)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(width) + " fields, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no data rows");
    return core::normalize(rows);
}

BlobsRaw gen_blobs_raw(int n, int dim, int k_true, double spread, std::uint64_t seed) {
    if (k_true < 1 || n < k_true || dim < 1)
        throw ConfigError("gen_blobs: need n >= k_true >= 1 and dim >= 1");
    if (spread < 0.0) throw ConfigError("gen_blobs: spread must be non-negative");

    Rng rng(seed);
    BlobsRaw out;
    out.centers.reserve(k_true);
    for (int b = 0; b < k_true; ++b) {
        core::Vec center(dim);
        for (int j = 0; j < dim; ++j) center[j] = rng.uniform(-1.0, 1.0);
        out.centers.push_back(std::move(center));
    }

    const int base = n / k_true;
    const int remainder = n % k_true;
    out.points.reserve(n);
    for (int b = 0; b < k_true; ++b) {
        const int count = base + (b < remainder ? 1 : 0);
        for (int i = 0; i < count; ++i) {
            core::Vec p(dim);
            for (int j = 0; j < dim; ++j) p[j] = out.centers[b][j] + spread * rng.normal();
            out.points.push_back(std::move(p));
        }
    }
    return out;
}

core::Dataset gen_blobs(int n, int dim, int k_true, double spread, std::uint64_t seed) {
    return core::normalize(gen_blobs_raw(n, dim, k_true, spread, seed).points);
}

core::Dataset resolve_dataset(const ExperimentConfig& config) {
    if (config.blobs) {
        const BlobSpec& b = *config.blobs;
        return gen_blobs(b.n, b.dim, b.k, b.spread, derive_seed(config.seed, 0xB10B5, 0));
    }
    if (config.data_path.empty()) throw ConfigError("no dataset: set a CSV path or blob parameters");
    return load_csv(config.data_path, config.csv_header);
}

namespace {

CellResult run_cell(const core::Dataset& data, const ExperimentConfig& config,
                    double epsilon, std::size_t eps_index, int rep) {
    CellResult cell;
    cell.epsilon = epsilon;
    cell.rep = rep;
    cell.seed = derive_seed(config.seed, eps_index, static_cast<std::uint64_t>(rep));

    const auto start = std::chrono::steady_clock::now();
    try {
        Rng rng(cell.seed);
        const core::Centroids init =
            dp::init_centroids(config.k, data.dim(), config.min_sep, rng);
        const dp::NoisyTrace trace =
            dp::dp_kmeans(data, config.k, config.t_iters, epsilon, init, rng);
        cell.wcss_dpkm = core::wcss(data, trace.iterates.back().centroids);

        // Everything below sees only the released trace; the dataset reappears
        // solely in the final WCSS report.
        const dp::NoisyTrace working =
            config.skip_consistency ? trace : consistency::enforce_consistency(trace);
        mcmc::ChainOptions chain_options;
        chain_options.delta = config.delta;
        chain_options.ball_projection = config.ball_projection;
        const mcmc::ChainResult chain =
            mcmc::run_chain(working, config.chain_steps, chain_options, rng);
        cell.acceptance_rate = chain.acceptance_rate;
        const mcmc::FinalCentroids finish =
            mcmc::final_centroids(chain.best_data, config.k, config.lloyd_restarts, rng);
        cell.wcss_mcmc = core::wcss(data, finish.centroids);
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
        cell.wcss_dpkm = std::numeric_limits<double>::quiet_NaN();
        cell.wcss_mcmc = std::numeric_limits<double>::quiet_NaN();
        cell.acceptance_rate = std::numeric_limits<double>::quiet_NaN();
    }
    const auto end = std::chrono::steady_clock::now();
    cell.wall_time_ms = std::chrono::duration<double, std::milli>(end - start).count();
    return cell;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::function<void(const CellResult&)>& on_cell) {
    if (config.k < 1) throw ConfigError("k must be positive");
    if (config.t_iters < 1) throw ConfigError("T must be positive");
    if (config.repetitions < 1) throw ConfigError("repetitions must be positive");
    if (config.chain_steps < 1) throw ConfigError("chain steps must be positive");
    if (config.lloyd_restarts < 1) throw ConfigError("restarts must be positive");
    if (config.delta <= 0.0) throw ConfigError("delta must be positive");
    if (config.epsilons.empty()) throw ConfigError("epsilon list must be nonempty");
    for (double eps : config.epsilons)
        if (eps <= 0.0) throw ConfigError("epsilons must be positive");

    const core::Dataset data = resolve_dataset(config);

    ExperimentResult result;
    result.cells.reserve(config.epsilons.size() * config.repetitions);
    for (std::size_t ei = 0; ei < config.epsilons.size(); ++ei) {
        for (int rep = 0; rep < config.repetitions; ++rep) {
            CellResult cell = run_cell(data, config, config.epsilons[ei], ei, rep);
            if (on_cell) on_cell(cell);
            result.cells.push_back(std::move(cell));
        }
    }
    result.summary = summarize(result.cells);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells) {
    // keyed by epsilon in first-seen order
    std::vector<double> order;
    std::map<double, std::vector<const CellResult*>> groups;
    for (const CellResult& cell : cells) {
        auto [it, inserted] = groups.try_emplace(cell.epsilon);
        if (inserted) order.push_back(cell.epsilon);
        it->second.push_back(&cell);
    }

    const auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
    };

    std::vector<SummaryRow> rows;
    for (double eps : order) {
        std::vector<double> dpkm, mcmc_vals;
        for (const CellResult* cell : groups[eps]) {
            if (cell->failed) continue;
            dpkm.push_back(cell->wcss_dpkm);
            mcmc_vals.push_back(cell->wcss_mcmc);
        }
        SummaryRow row;
        row.epsilon = eps;
        if (!dpkm.empty()) {
            std::tie(row.wcss_dpkm_mean, row.wcss_dpkm_std) = mean_std(dpkm);
            std::tie(row.wcss_mcmc_mean, row.wcss_mcmc_std) = mean_std(mcmc_vals);
        } else {
            row.wcss_dpkm_mean = row.wcss_dpkm_std = std::numeric_limits<double>::quiet_NaN();
            row.wcss_mcmc_mean = row.wcss_mcmc_std = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(row);
    }
    return rows;
}

std::string runs_csv_header() { return "epsilon,rep,wcss_dpkm,wcss_mcmc,acceptance_rate,seed\n"; }

std::string runs_csv_row(const CellResult& c) {
    return format_double(c.epsilon) + ',' + std::to_string(c.rep) + ',' +
           format_double(c.wcss_dpkm) + ',' + format_double(c.wcss_mcmc) + ',' +
           format_double(c.acceptance_rate) + ',' + format_u64(c.seed) + '\n';
}

void write_runs_csv(const std::vector<CellResult>& cells, const std::string& path) {
    std::ofstream out = open_output(path);
    out << runs_csv_header();
    for (const CellResult& c : cells) out << runs_csv_row(c);
}

void write_summary_csv(const std::vector<SummaryRow>& summary, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "epsilon,wcss_dpkm_mean,wcss_dpkm_std,wcss_mcmc_mean,wcss_mcmc_std\n";
    for (const SummaryRow& r : summary)
        out << format_double(r.epsilon) << ',' << format_double(r.wcss_dpkm_mean) << ','
            << format_double(r.wcss_dpkm_std) << ',' << format_double(r.wcss_mcmc_mean) << ','
            << format_double(r.wcss_mcmc_std) << '\n';
}

void emit_results(const ExperimentResult& result, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    write_runs_csv(result.cells, out_dir + "/runs.csv");
    write_summary_csv(result.summary, out_dir + "/summary.csv");

    std::ofstream out = open_output(out_dir + "/timings.csv");
    out << "epsilon,rep,wall_time_ms\n";
    for (const CellResult& c : result.cells)
        out << format_double(c.epsilon) << ',' << c.rep << ','
            << format_double(c.wall_time_ms) << '\n';
}

std::vector<CellResult> parse_runs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);

    std::vector<CellResult> cells;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue; // header
        const auto fields = split_fields(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (fields.size() != 6) throw IoError(where + ": expected 6 fields");
        CellResult cell;
        cell.epsilon = parse_double(fields[0], where);
        cell.rep = static_cast<int>(parse_u64(fields[1], where));
        cell.wcss_dpkm = parse_double(fields[2], where);
        cell.wcss_mcmc = parse_double(fields[3], where);
        cell.acceptance_rate = parse_double(fields[4], where);
        cell.seed = parse_u64(fields[5], where);
        cell.failed = std::isnan(cell.wcss_dpkm) || std::isnan(cell.wcss_mcmc);
        cells.push_back(cell);
    }
    return cells;
}

void write_matrix_csv(const std::string& path, const std::vector<core::Vec>& rows) {
    std::ofstream out = open_output(path);
    for (const core::Vec& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out << ',';
            out << format_double(row[j]);
        }
        out << '\n';
    }
}

} // namespace dpkm::harness
