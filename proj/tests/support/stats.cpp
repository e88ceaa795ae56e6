#include "support/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dpkm::test {

double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double variance(const std::vector<double>& xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size());
}

double laplace_cdf(double x, double scale) {
    if (x < 0.0) return 0.5 * std::exp(x / scale);
    return 1.0 - 0.5 * std::exp(-x / scale);
}

double ks_statistic_laplace(std::vector<double> draws, double scale) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double f = laplace_cdf(draws[i], scale);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return d;
}

namespace {

std::vector<double> ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0; // average rank, 1-based
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: bad input");
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double ma = mean(ra), mb = mean(rb);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

double chi_square_crit_1pct(int dof) {
    static const double table[] = {
        6.635,  9.210,  11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209,
        24.725, 26.217, 27.688, 29.141, 30.578, 32.000, 33.409, 34.805, 36.191, 37.566,
        38.932, 40.289, 41.638, 42.980, 44.314, 45.642, 46.963, 48.278, 49.588, 50.892};
    if (dof < 1 || dof > 30) throw std::invalid_argument("chi_square_crit_1pct: dof out of range");
    return table[dof - 1];
}

} // namespace dpkm::test
