#include "dpkm/mcmc.hpp"

#include <cmath>
#include <stdexcept>

namespace dpkm::mcmc {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

double l1_dist(const core::Vec& a, const core::Vec& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
    return s;
}

// ln N(x; mean, delta I) with the normalization constant kept explicit
double gaussian_log_density(const core::Vec& x, const core::Vec& mean, double delta) {
    const double d = static_cast<double>(x.size());
    return -0.5 * d * std::log(kTwoPi * delta) - core::squared_distance(x, mean) / (2.0 * delta);
}

// Sampling weight of cluster c at iterate t; negative noisy counts (possible
// on a raw trace) carry zero mass.
double cluster_weight(const dp::NoisyTrace& trace, int t, int c) {
    return std::max(0.0, trace.iterates[t].noisy_counts[c]);
}

std::vector<core::ClusterStats> stats_per_iterate(const core::Dataset& data,
                                                  const dp::NoisyTrace& trace) {
    std::vector<core::ClusterStats> stats;
    stats.reserve(trace.T);
    for (int t = 0; t < trace.T; ++t)
        stats.push_back(core::cluster_stats(data, trace.partition_centroids(t)));
    return stats;
}

double score_from_stats(const std::vector<core::ClusterStats>& stats,
                        const dp::NoisyTrace& trace) {
    double score = 0.0;
    for (int t = 0; t < trace.T; ++t) {
        const dp::NoisyIterate& iterate = trace.iterates[t];
        for (int c = 0; c < trace.k(); ++c) {
            score -= trace.eps_sum * l1_dist(iterate.noisy_sums[c], stats[t].sums[c]);
            score -= trace.eps_count *
                     std::abs(iterate.noisy_counts[c] - static_cast<double>(stats[t].counts[c]));
        }
    }
    return score;
}

} // namespace

core::Dataset to_dataset(const std::vector<LabeledPoint>& points) {
    core::Dataset out;
    out.points.reserve(points.size());
    for (const LabeledPoint& p : points) out.points.push_back(p.coords);
    return out;
}

double target_log_score(const core::Dataset& data, const dp::NoisyTrace& trace) {
    return score_from_stats(stats_per_iterate(data, trace), trace);
}

void refresh(ChainState& state, const dp::NoisyTrace& trace) {
    state.stats = stats_per_iterate(to_dataset(state.data), trace);
    state.log_score = score_from_stats(state.stats, trace);
}

ChainState init_state(const dp::NoisyTrace& trace) {
    if (trace.T < 1 || trace.iterates.empty())
        throw std::invalid_argument("init_state: empty trace");
    const dp::NoisyIterate& last = trace.iterates.back();
    const int last_t = trace.T - 1;

    ChainState state;
    for (int c = 0; c < trace.k(); ++c) {
        const long copies = std::llround(std::max(0.0, last.noisy_counts[c]));
        for (long i = 0; i < copies; ++i)
            state.data.push_back(LabeledPoint{last.centroids.centers[c], last_t, c});
    }
    if (state.data.empty())
        throw std::runtime_error("init_state: every rounded final count is zero (degenerate trace)");
    refresh(state, trace);
    return state;
}

Proposal propose(const ChainState& state, const dp::NoisyTrace& trace,
                 const ChainOptions& options, Rng& rng) {
    if (state.data.empty()) throw std::invalid_argument("propose: empty state");

    Proposal prop;
    prop.replace_index = rng.uniform_int(static_cast<int>(state.data.size()));
    prop.old_point = state.data[prop.replace_index];

    // (i) iterate, resampled if every cluster there has zero weight
    int t = -1;
    double total_weight = 0.0;
    for (int attempt = 0; attempt < 100; ++attempt) {
        t = rng.uniform_int(trace.T);
        total_weight = 0.0;
        for (int c = 0; c < trace.k(); ++c) total_weight += cluster_weight(trace, t, c);
        if (total_weight > 0.0) break;
        t = -1;
    }
    if (t < 0) throw std::runtime_error("propose: no iterate with positive cluster weights");

    // (ii) cluster from the count-proportional categorical; the walk can only
    // stop on a positive-weight cluster, and so must the rounding fallback
    int z = -1;
    double u = rng.uniform() * total_weight;
    for (int c = 0; c < trace.k(); ++c) {
        const double w = cluster_weight(trace, t, c);
        if (w <= 0.0) continue;
        z = c;
        u -= w;
        if (u < 0.0) break;
    }

    // (iii) point from N(c_z^(t), delta I)
    const core::Vec& mean = trace.iterates[t].centroids.centers[z];
    core::Vec x(mean.size());
    const double sd = std::sqrt(options.delta);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = mean[j] + sd * rng.normal();
    if (options.ball_projection) {
        const double norm = core::l1_norm(x);
        if (norm > 1.0)
            for (double& v : x) v /= norm;
    }
    prop.new_point = LabeledPoint{std::move(x), t, z};

    const LabeledPoint& removed = prop.old_point;
    const double w_old = cluster_weight(trace, removed.gen_t, removed.gen_z);
    const core::Vec& mean_old = trace.iterates[removed.gen_t].centroids.centers[removed.gen_z];
    prop.log_correction =
        std::log(w_old) + gaussian_log_density(removed.coords, mean_old, options.delta) -
        std::log(cluster_weight(trace, t, z)) -
        gaussian_log_density(prop.new_point.coords, mean, options.delta);

    prop.old_cluster.resize(trace.T);
    prop.new_cluster.resize(trace.T);
    for (int ti = 0; ti < trace.T; ++ti) {
        const core::Centroids& centers = trace.partition_centroids(ti);
        prop.old_cluster[ti] = core::assign(removed.coords, centers);
        prop.new_cluster[ti] = core::assign(prop.new_point.coords, centers);
    }
    return prop;
}

double delta_log_score(const ChainState& state, const Proposal& proposal,
                       const dp::NoisyTrace& trace) {
    const core::Vec& x = proposal.old_point.coords;
    const core::Vec& xp = proposal.new_point.coords;
    const std::size_t d = x.size();

    double delta = 0.0;
    for (int t = 0; t < trace.T; ++t) {
        const dp::NoisyIterate& iterate = trace.iterates[t];
        const core::ClusterStats& stats = state.stats[t];
        const int i = proposal.old_cluster[t];
        const int j = proposal.new_cluster[t];

        if (i == j) {
            // same cluster: only its sum moves by x' - x, counts cancel
            const core::Vec& target = iterate.noisy_sums[i];
            const core::Vec& base = stats.sums[i];
            double before = 0.0, after = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                before += std::abs(target[c] - base[c]);
                after += std::abs(target[c] - (base[c] - x[c] + xp[c]));
            }
            delta += trace.eps_sum * (before - after);
            continue;
        }

        const core::Vec& target_i = iterate.noisy_sums[i];
        const core::Vec& target_j = iterate.noisy_sums[j];
        const core::Vec& base_i = stats.sums[i];
        const core::Vec& base_j = stats.sums[j];
        double before = 0.0, after = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            before += std::abs(target_i[c] - base_i[c]) + std::abs(target_j[c] - base_j[c]);
            after += std::abs(target_i[c] - (base_i[c] - x[c])) +
                     std::abs(target_j[c] - (base_j[c] + xp[c]));
        }
        delta += trace.eps_sum * (before - after);

        const double n_i = static_cast<double>(stats.counts[i]);
        const double n_j = static_cast<double>(stats.counts[j]);
        delta += trace.eps_count * (std::abs(iterate.noisy_counts[i] - n_i) -
                                    std::abs(iterate.noisy_counts[i] - (n_i - 1.0)) +
                                    std::abs(iterate.noisy_counts[j] - n_j) -
                                    std::abs(iterate.noisy_counts[j] - (n_j + 1.0)));
    }
    return delta;
}

double accept_prob(const ChainState& state, const Proposal& proposal,
                   const dp::NoisyTrace& trace) {
    const double log_ratio = delta_log_score(state, proposal, trace) + proposal.log_correction;
    return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

namespace {

void apply_proposal(ChainState& state, const Proposal& proposal, double delta,
                    const dp::NoisyTrace& trace) {
    const core::Vec& x = proposal.old_point.coords;
    const core::Vec& xp = proposal.new_point.coords;
    for (int t = 0; t < trace.T; ++t) {
        core::ClusterStats& stats = state.stats[t];
        const int i = proposal.old_cluster[t];
        const int j = proposal.new_cluster[t];
        for (std::size_t c = 0; c < x.size(); ++c) {
            stats.sums[i][c] -= x[c];
            stats.sums[j][c] += xp[c];
        }
        stats.counts[i] -= 1;
        stats.counts[j] += 1;
    }
    state.data[proposal.replace_index] = proposal.new_point;
    state.log_score += delta;
}

} // namespace

bool step(ChainState& state, const dp::NoisyTrace& trace,
          const ChainOptions& options, Rng& rng) {
    const Proposal prop = propose(state, trace, options, rng);
    const double delta = delta_log_score(state, prop, trace);
    const double log_ratio = delta + prop.log_correction;
    const double prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (rng.uniform() >= prob) return false;
    apply_proposal(state, prop, delta, trace);
    return true;
}

ChainResult run_chain(const dp::NoisyTrace& trace, int steps,
                      const ChainOptions& options, Rng& rng) {
    if (steps < 1) throw std::invalid_argument("run_chain: steps must be positive");

    ChainState state = init_state(trace);
    ChainResult result;
    result.score_trace.reserve(static_cast<std::size_t>(steps) + 1);
    result.score_trace.push_back(state.log_score);
    result.best_data = to_dataset(state.data);
    result.best_score = state.log_score;

    long accepted = 0;
    for (int s = 1; s <= steps; ++s) {
        if (step(state, trace, options, rng)) ++accepted;
        if (options.refresh_interval > 0 && s % options.refresh_interval == 0)
            refresh(state, trace);
        result.score_trace.push_back(state.log_score);
        if (state.log_score > result.best_score) {
            result.best_score = state.log_score;
            result.best_data = to_dataset(state.data);
        }
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(steps);
    return result;
}

FinalCentroids final_centroids(const core::Dataset& best, int k, int restarts, Rng& rng) {
    if (restarts < 1) throw std::invalid_argument("final_centroids: restarts must be positive");
    FinalCentroids out;
    for (int r = 0; r < restarts; ++r) {
        const core::Centroids init = dp::init_centroids(k, best.dim(), 0.0, rng);
        const core::LloydResult run = core::lloyd(best, k, init);
        if (r == 0 || run.wcss < out.wcss_on_best) {
            out.centroids = run.centroids;
            out.wcss_on_best = run.wcss;
        }
    }
    return out;
}

} // namespace dpkm::mcmc
