#ifndef DPKM_DP_MECHANISM_HPP
#define DPKM_DP_MECHANISM_HPP

#include <optional>
#include <vector>

#include "dpkm/core.hpp"
#include "dpkm/rng.hpp"

namespace dpkm::dp {

// One iteration of the noisy trace. Counts may be negative or fractional;
// centroids are derived from the noisy statistics by derive_centroids().
struct NoisyIterate {
    std::vector<core::Vec> noisy_sums; // K vectors of dimension d
    std::vector<double> noisy_counts;  // K
    core::Centroids centroids;
};

// Full record of a noisy k-means run: the data-independent initial centers
// plus the T per-iteration noisy statistics. This is the only data-derived
// information the post-processing stages may read.
struct NoisyTrace {
    core::Centroids initial_centroids;
    std::vector<NoisyIterate> iterates; // exactly T entries
    double epsilon = 0.0;
    int T = 0;
    // Per-statistic budget shares; both equal epsilon / (2T) under the even
    // split between sums and counts.
    double eps_sum = 0.0;
    double eps_count = 0.0;

    int k() const { return initial_centroids.k(); }
    int dim() const { return initial_centroids.dim(); }
    // Centers that induce the partition scored against iterate t (0-based):
    // the initial centers for t = 0, otherwise iterate t-1's centers.
    const core::Centroids& partition_centroids(int t) const {
        return t == 0 ? initial_centroids : iterates[t - 1].centroids;
    }
};

struct DpKmeansOptions {
    // Keep the previous center when the noisy count falls below this; a raw
    // division by a near-zero or negative count produces unbounded centers.
    double count_floor = 1.0;
    // Test hook: replace the Laplace scale (0 disables noise entirely).
    std::optional<double> noise_scale_override;
};

// Laplace scale used for every query of a T-iteration run at budget epsilon.
inline double laplace_scale(double epsilon, int t_iters) {
    return 2.0 * static_cast<double>(t_iters) / epsilon;
}

// One draw from Laplace(0, scale), via the inverse-CDF transform.
double sample_laplace(double scale, Rng& rng);

// K centers drawn uniformly from [-1/d, 1/d]^d, rejecting candidates closer
// than min_sep (Euclidean) to an already accepted one. Never reads a dataset.
// Throws if the retry cap is exhausted (min_sep too large for the box).
core::Centroids init_centroids(int k, int dim, double min_sep, Rng& rng);

// Safeguarded centroid update: sums[c] / counts[c] unless counts[c] is below
// count_floor, in which case the previous center is kept.
core::Centroids derive_centroids(const std::vector<core::Vec>& sums,
                                 const std::vector<double>& counts,
                                 const core::Centroids& previous,
                                 double count_floor);

// T noisy Lloyd iterations under an epsilon budget: per iteration and cluster,
// the true count and each sum coordinate get independent Laplace(2T/epsilon)
// noise, and centers are re-derived from the noisy values. Requires normalized
// data (||x||_1 <= 1).
NoisyTrace dp_kmeans(const core::Dataset& data, int k, int t_iters, double epsilon,
                     const core::Centroids& init, Rng& rng,
                     const DpKmeansOptions& options = {});

} // namespace dpkm::dp

#endif
