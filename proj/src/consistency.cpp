#include "dpkm/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpkm::consistency {

namespace {

// Projection onto { x : each group of size k has the same total }: shift every
// element of group t by (mean total - total_t) / k.
void project_equal_totals(std::vector<double>& x, int groups, int k) {
    double mean_total = 0.0;
    std::vector<double> totals(groups, 0.0);
    for (int t = 0; t < groups; ++t) {
        double s = 0.0;
        for (int c = 0; c < k; ++c) s += x[static_cast<std::size_t>(t) * k + c];
        totals[t] = s;
        mean_total += s;
    }
    mean_total /= groups;
    for (int t = 0; t < groups; ++t) {
        const double shift = (mean_total - totals[t]) / k;
        for (int c = 0; c < k; ++c) x[static_cast<std::size_t>(t) * k + c] += shift;
    }
}

// Dykstra's alternating projections between the equal-totals subspace and the
// non-negative orthant. Ends on the clamping step so the sign constraint holds
// exactly; the totals agree up to the sweep tolerance.
void project_counts(std::vector<double>& x, int groups, int k,
                    const ProjectionOptions& options) {
    const std::size_t n = x.size();
    std::vector<double> p(n, 0.0), q(n, 0.0), y(n), previous(n);

    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        previous = x;

        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + p[i];
        project_equal_totals(y, groups, k);
        for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + p[i] - y[i];

        for (std::size_t i = 0; i < n; ++i) x[i] = std::max(0.0, y[i] + q[i]);
        for (std::size_t i = 0; i < n; ++i) q[i] = y[i] + q[i] - x[i];

        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(x[i] - previous[i]));
        if (change < options.tolerance) break;
    }
}

} // namespace

dp::NoisyTrace enforce_consistency(const dp::NoisyTrace& trace,
                                   const ProjectionOptions& options) {
    const int t_iters = trace.T;
    if (t_iters < 1 || trace.iterates.size() != static_cast<std::size_t>(t_iters))
        throw std::invalid_argument("enforce_consistency: malformed trace");
    const int k = trace.k();
    const int d = trace.dim();

    dp::NoisyTrace out = trace;

    // Sums: one closed-form shift per coordinate (no sign constraint).
    std::vector<double> column(static_cast<std::size_t>(t_iters) * k);
    for (int j = 0; j < d; ++j) {
        for (int t = 0; t < t_iters; ++t)
            for (int c = 0; c < k; ++c)
                column[static_cast<std::size_t>(t) * k + c] = trace.iterates[t].noisy_sums[c][j];
        project_equal_totals(column, t_iters, k);
        for (int t = 0; t < t_iters; ++t)
            for (int c = 0; c < k; ++c)
                out.iterates[t].noisy_sums[c][j] = column[static_cast<std::size_t>(t) * k + c];
    }

    // Counts: equal totals intersected with the non-negative orthant.
    std::vector<double> counts(static_cast<std::size_t>(t_iters) * k);
    for (int t = 0; t < t_iters; ++t)
        for (int c = 0; c < k; ++c)
            counts[static_cast<std::size_t>(t) * k + c] = trace.iterates[t].noisy_counts[c];
    project_counts(counts, t_iters, k, options);
    for (int t = 0; t < t_iters; ++t)
        for (int c = 0; c < k; ++c)
            out.iterates[t].noisy_counts[c] = counts[static_cast<std::size_t>(t) * k + c];

    const core::Centroids* previous = &out.initial_centroids;
    for (int t = 0; t < t_iters; ++t) {
        out.iterates[t].centroids = dp::derive_centroids(out.iterates[t].noisy_sums,
                                                         out.iterates[t].noisy_counts,
                                                         *previous, options.count_floor);
        previous = &out.iterates[t].centroids;
    }
    return out;
}

} // namespace dpkm::consistency
