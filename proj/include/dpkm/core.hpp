#ifndef DPKM_CORE_HPP
#define DPKM_CORE_HPP

#include <vector>

namespace dpkm::core {

// A d-dimensional coordinate vector.
using Vec = std::vector<double>;

// Points of a normalized dataset live in the L1 unit ball (||x||_1 <= 1).
struct Dataset {
    std::vector<Vec> points;

    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
    int size() const { return static_cast<int>(points.size()); }
};

struct Centroids {
    std::vector<Vec> centers;

    int k() const { return static_cast<int>(centers.size()); }
    int dim() const { return centers.empty() ? 0 : static_cast<int>(centers.front().size()); }
};

// Per-cluster sums and counts of a partition.
struct ClusterStats {
    std::vector<Vec> sums;   // K vectors of dimension d
    std::vector<int> counts; // K
};

// Index of the nearest center by squared Euclidean distance.
// Ties break to the smallest index. Throws on dimension mismatch.
int assign(const Vec& point, const Centroids& centroids);

// Sums and counts of the partition induced by assign().
ClusterStats cluster_stats(const Dataset& data, const Centroids& centroids);

// Within-cluster sum of squares: sum over points of the squared distance to
// the nearest center.
double wcss(const Dataset& data, const Centroids& centroids);

// Maps each attribute affinely onto [-1, 1] (min -> -1, max -> +1; a constant
// attribute maps to 0), then scales every point by 1/d so that ||x||_1 <= 1.
// Throws on empty or ragged input.
Dataset normalize(const std::vector<Vec>& raw);

struct LloydResult {
    Centroids centroids;
    double wcss = 0.0;
    // Centroids after each update step, iterates[0] being the first update of
    // the initial centers. Stops early at an assignment fixpoint.
    std::vector<Centroids> iterates;
};

// Standard Lloyd iterations from the given initial centers. Runs until the
// assignment vector is unchanged or max_iters is reached. An empty cluster
// keeps its previous center.
LloydResult lloyd(const Dataset& data, int k, const Centroids& init, int max_iters = 100);

double squared_distance(const Vec& a, const Vec& b);
double l1_norm(const Vec& v);

} // namespace dpkm::core

#endif
