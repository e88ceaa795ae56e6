#include "dpkm/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpkm::core {

double squared_distance(const Vec& a, const Vec& b) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d2 += diff * diff;
    }
    return d2;
}

double l1_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

namespace {

void check_dims(int point_dim, const Centroids& centroids, const char* where) {
    if (centroids.k() == 0) throw std::invalid_argument(std::string(where) + ": no centers");
    for (const Vec& c : centroids.centers) {
        if (static_cast<int>(c.size()) != point_dim)
            throw std::invalid_argument(std::string(where) + ": dimension mismatch");
    }
}

} // namespace

int assign(const Vec& point, const Centroids& centroids) {
    check_dims(static_cast<int>(point.size()), centroids, "assign");
    int best = 0;
    double best_d2 = squared_distance(point, centroids.centers[0]);
    for (int k = 1; k < centroids.k(); ++k) {
        const double d2 = squared_distance(point, centroids.centers[k]);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = k;
        }
    }
    return best;
}

ClusterStats cluster_stats(const Dataset& data, const Centroids& centroids) {
    check_dims(data.dim(), centroids, "cluster_stats");
    const int k = centroids.k();
    const int d = data.dim();
    ClusterStats stats;
    stats.sums.assign(k, Vec(d, 0.0));
    stats.counts.assign(k, 0);
    for (const Vec& x : data.points) {
        const int c = assign(x, centroids);
        stats.counts[c] += 1;
        Vec& s = stats.sums[c];
        for (int j = 0; j < d; ++j) s[j] += x[j];
    }
    return stats;
}

double wcss(const Dataset& data, const Centroids& centroids) {
    check_dims(data.dim(), centroids, "wcss");
    double total = 0.0;
    for (const Vec& x : data.points)
        total += squared_distance(x, centroids.centers[assign(x, centroids)]);
    return total;
}

Dataset normalize(const std::vector<Vec>& raw) {
    if (raw.empty()) throw std::invalid_argument("normalize: empty input");
    const std::size_t d = raw.front().size();
    if (d == 0) throw std::invalid_argument("normalize: zero-dimensional rows");
    for (const Vec& row : raw) {
        if (row.size() != d) throw std::invalid_argument("normalize: ragged rows");
    }

    Vec lo(raw.front()), hi(raw.front());
    for (const Vec& row : raw) {
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], row[j]);
            hi[j] = std::max(hi[j], row[j]);
        }
    }

    const double scale = 1.0 / static_cast<double>(d);
    Dataset out;
    out.points.reserve(raw.size());
    for (const Vec& row : raw) {
        Vec p(d);
        for (std::size_t j = 0; j < d; ++j) {
            // constant attribute maps to 0
            const double v = (hi[j] == lo[j]) ? 0.0 : -1.0 + 2.0 * (row[j] - lo[j]) / (hi[j] - lo[j]);
            p[j] = v * scale;
        }
        out.points.push_back(std::move(p));
    }
    return out;
}

LloydResult lloyd(const Dataset& data, int k, const Centroids& init, int max_iters) {
    if (k < 1) throw std::invalid_argument("lloyd: k must be positive");
    if (init.k() != k) throw std::invalid_argument("lloyd: init must have k centers");
    check_dims(data.dim(), init, "lloyd");

    LloydResult result;
    Centroids current = init;
    std::vector<int> labels(data.points.size(), -1);

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < data.points.size(); ++i) {
            const int c = assign(data.points[i], current);
            if (c != labels[i]) {
                labels[i] = c;
                changed = true;
            }
        }
        if (!changed) break; // assignment fixpoint: another update would be a no-op

        const ClusterStats stats = cluster_stats(data, current);
        for (int c = 0; c < k; ++c) {
            if (stats.counts[c] == 0) continue; // empty cluster keeps its center
            Vec& center = current.centers[c];
            for (int j = 0; j < data.dim(); ++j)
                center[j] = stats.sums[c][j] / static_cast<double>(stats.counts[c]);
        }
        result.iterates.push_back(current);
    }

    result.centroids = current;
    result.wcss = wcss(data, current);
    return result;
}

} // namespace dpkm::core
