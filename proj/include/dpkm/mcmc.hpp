#ifndef DPKM_MCMC_HPP
#define DPKM_MCMC_HPP

#include <vector>

#include "dpkm/dp_mechanism.hpp"

namespace dpkm::mcmc {

// A simulated point together with the mixture component (iterate, cluster)
// that generated it; the labels feed the backward proposal density when the
// point is later removed. Iterate indices are 0-based throughout.
struct LabeledPoint {
    core::Vec coords;
    int gen_t = 0;
    int gen_z = 0;
};

// Candidate dataset with cached per-iterate cluster statistics. stats[t] holds
// the sums/counts of the partition induced by the trace's partition centroids
// for iterate t; log_score is the exponent of the target density pi(D).
struct ChainState {
    std::vector<LabeledPoint> data;
    std::vector<core::ClusterStats> stats;
    double log_score = 0.0;
};

// Single-point replacement move. old_cluster[t] / new_cluster[t] give the
// cluster of the removed / inserted point under iterate t's partition centers.
struct Proposal {
    int replace_index = 0;
    LabeledPoint new_point;
    LabeledPoint old_point;
    double log_correction = 0.0; // ln q(x) - ln q(x'), from the stored labels
    std::vector<int> old_cluster;
    std::vector<int> new_cluster;
};

struct ChainResult {
    core::Dataset best_data;
    double best_score = 0.0;
    double acceptance_rate = 0.0;
    // score_trace[0] is the initial state's score, then one entry per step;
    // best_score == max(score_trace).
    std::vector<double> score_trace;
};

struct ChainOptions {
    double delta = 0.001;        // variance of each Gaussian proposal component
    bool ball_projection = true; // rescale proposed points into the L1 unit ball
    int refresh_interval = 5000; // recompute caches this often to bound drift (0 = never)
};

// Exponent of the target density: the negative budget-weighted L1 discrepancy
// between the trace statistics and the statistics of D, summed over iterates
// and clusters. Zero iff D reproduces the trace exactly; never positive.
double target_log_score(const core::Dataset& data, const dp::NoisyTrace& trace);

// Initial state: round(max(0, count)) copies of each final-iterate center,
// labeled with the final iterate and their cluster. Throws if every rounded
// count is zero.
ChainState init_state(const dp::NoisyTrace& trace);

// Draws a replacement move: a uniform victim index, a uniform iterate t, a
// cluster z ~ Categorical(counts at t), and a point from N(c_z^(t), delta I),
// optionally rescaled into the L1 ball. The correction term compares the
// proposal density of the removed point (at its stored labels) against the
// new point's.
Proposal propose(const ChainState& state, const dp::NoisyTrace& trace,
                 const ChainOptions& options, Rng& rng);

// Score change of applying the proposal, touching only the affected clusters
// per iterate. Equals target_log_score(D') - target_log_score(D).
double delta_log_score(const ChainState& state, const Proposal& proposal,
                       const dp::NoisyTrace& trace);

// min(1, exp(delta_log_score + log_correction)), computed in log space.
double accept_prob(const ChainState& state, const Proposal& proposal,
                   const dp::NoisyTrace& trace);

// One Metropolis-Hastings step; on accept the replacement is applied and the
// cached statistics and score are updated incrementally.
bool step(ChainState& state, const dp::NoisyTrace& trace,
          const ChainOptions& options, Rng& rng);

// Recompute cached statistics and score from scratch.
void refresh(ChainState& state, const dp::NoisyTrace& trace);

// Full chain: init_state, then `steps` MH steps, tracking the best-scoring
// dataset ever visited (including the initial state).
ChainResult run_chain(const dp::NoisyTrace& trace, int steps,
                      const ChainOptions& options, Rng& rng);

struct FinalCentroids {
    core::Centroids centroids;
    double wcss_on_best = 0.0;
};

// Lloyd finisher: `restarts` runs from random data-independent initial centers
// on the best dataset; returns the run with the lowest WCSS on that dataset.
FinalCentroids final_centroids(const core::Dataset& best, int k, int restarts, Rng& rng);

core::Dataset to_dataset(const std::vector<LabeledPoint>& points);

} // namespace dpkm::mcmc

#endif
