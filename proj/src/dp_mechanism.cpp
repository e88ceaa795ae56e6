#include "dpkm/dp_mechanism.hpp"

#include <cmath>
#include <stdexcept>

namespace dpkm::dp {

double sample_laplace(double scale, Rng& rng) {
    if (scale <= 0.0) throw std::invalid_argument("sample_laplace: scale must be positive");
    double u;
    do {
        u = rng.uniform() - 0.5; // [-0.5, 0.5), reject the endpoint
    } while (u == -0.5);
    const double sign = (u > 0.0) ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

core::Centroids init_centroids(int k, int dim, double min_sep, Rng& rng) {
    if (k < 1 || dim < 1) throw std::invalid_argument("init_centroids: k and dim must be positive");
    if (min_sep < 0.0) throw std::invalid_argument("init_centroids: min_sep must be non-negative");

    const double half_width = 1.0 / static_cast<double>(dim);
    const long max_attempts = 1000L * k;
    const double min_sep2 = min_sep * min_sep;

    core::Centroids centroids;
    centroids.centers.reserve(k);
    long attempts = 0;
    while (centroids.k() < k) {
        if (++attempts > max_attempts)
            throw std::runtime_error("init_centroids: could not place " + std::to_string(k) +
                                     " centers with pairwise separation > " + std::to_string(min_sep));
        core::Vec candidate(dim);
        for (int j = 0; j < dim; ++j) candidate[j] = rng.uniform(-half_width, half_width);
        bool ok = true;
        for (const core::Vec& c : centroids.centers) {
            if (core::squared_distance(candidate, c) <= min_sep2) {
                ok = false;
                break;
            }
        }
        if (ok) centroids.centers.push_back(std::move(candidate));
    }
    return centroids;
}

core::Centroids derive_centroids(const std::vector<core::Vec>& sums,
                                 const std::vector<double>& counts,
                                 const core::Centroids& previous,
                                 double count_floor) {
    core::Centroids out = previous;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < count_floor) continue;
        core::Vec& center = out.centers[c];
        for (std::size_t j = 0; j < center.size(); ++j)
            center[j] = sums[c][j] / counts[c];
    }
    return out;
}

NoisyTrace dp_kmeans(const core::Dataset& data, int k, int t_iters, double epsilon,
                     const core::Centroids& init, Rng& rng,
                     const DpKmeansOptions& options) {
    if (t_iters < 1) throw std::invalid_argument("dp_kmeans: T must be positive");
    if (epsilon <= 0.0) throw std::invalid_argument("dp_kmeans: epsilon must be positive");
    if (init.k() != k) throw std::invalid_argument("dp_kmeans: init must have k centers");
    for (const core::Vec& x : data.points) {
        if (core::l1_norm(x) > 1.0 + 1e-9)
            throw std::invalid_argument("dp_kmeans: data must be normalized to the L1 unit ball");
    }

    const double scale = options.noise_scale_override.value_or(laplace_scale(epsilon, t_iters));
    const int d = data.dim();

    NoisyTrace trace;
    trace.initial_centroids = init;
    trace.epsilon = epsilon;
    trace.T = t_iters;
    trace.eps_sum = epsilon / (2.0 * t_iters);
    trace.eps_count = trace.eps_sum;
    trace.iterates.reserve(t_iters);

    const core::Centroids* previous = &init;
    for (int t = 0; t < t_iters; ++t) {
        const core::ClusterStats stats = core::cluster_stats(data, *previous);
        NoisyIterate iterate;
        iterate.noisy_counts.resize(k);
        iterate.noisy_sums.assign(k, core::Vec(d));
        for (int c = 0; c < k; ++c) {
            double count = static_cast<double>(stats.counts[c]);
            if (scale > 0.0) count += sample_laplace(scale, rng);
            iterate.noisy_counts[c] = count;
            for (int j = 0; j < d; ++j) {
                double s = stats.sums[c][j];
                if (scale > 0.0) s += sample_laplace(scale, rng);
                iterate.noisy_sums[c][j] = s;
            }
        }
        iterate.centroids = derive_centroids(iterate.noisy_sums, iterate.noisy_counts,
                                             *previous, options.count_floor);
        trace.iterates.push_back(std::move(iterate));
        previous = &trace.iterates.back().centroids;
    }
    return trace;
}

} // namespace dpkm::dp
