#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpkm/consistency.hpp"
#include "dpkm/mcmc.hpp"
#include "support/stats.hpp"

using namespace dpkm;
using core::Centroids;
using core::Dataset;
using core::Vec;

namespace {

Dataset random_ball_dataset(int n, int d, Rng& rng) {
    Dataset data;
    for (int i = 0; i < n; ++i) {
        Vec p(d);
        for (int j = 0; j < d; ++j) p[j] = rng.uniform(-1.0 / d, 1.0 / d);
        data.points.push_back(std::move(p));
    }
    return data;
}

// A consistency-processed trace from a real noisy run on random data.
dp::NoisyTrace sample_trace(Rng& rng, int n = 40, int k = 2, int d = 2, int t_iters = 3,
                            double epsilon = 2.0) {
    const Dataset data = random_ball_dataset(n, d, rng);
    const auto init = dp::init_centroids(k, d, 0.0, rng);
    return consistency::enforce_consistency(dp::dp_kmeans(data, k, t_iters, epsilon, init, rng));
}

// Hand-built trace: one iterate, one cluster, one dimension.
dp::NoisyTrace tiny_trace(double noisy_sum, double noisy_count, double epsilon) {
    dp::NoisyTrace trace;
    trace.initial_centroids.centers = {{0.0}};
    trace.T = 1;
    trace.epsilon = epsilon;
    trace.eps_sum = trace.eps_count = epsilon / 2.0;
    dp::NoisyIterate iterate;
    iterate.noisy_sums = {{noisy_sum}};
    iterate.noisy_counts = {noisy_count};
    iterate.centroids = dp::derive_centroids(iterate.noisy_sums, iterate.noisy_counts,
                                             trace.initial_centroids, 1.0);
    trace.iterates.push_back(iterate);
    return trace;
}

// Score recomputed with nothing but core::cluster_stats, mirroring the target
// definition term by term.
double score_oracle(const Dataset& data, const dp::NoisyTrace& trace) {
    double score = 0.0;
    for (int t = 0; t < trace.T; ++t) {
        const auto stats = core::cluster_stats(data, trace.partition_centroids(t));
        for (int c = 0; c < trace.k(); ++c) {
            double l1 = 0.0;
            for (int j = 0; j < trace.dim(); ++j)
                l1 += std::abs(trace.iterates[t].noisy_sums[c][j] - stats.sums[c][j]);
            score -= trace.eps_sum * l1;
            score -= trace.eps_count * std::abs(trace.iterates[t].noisy_counts[c] - stats.counts[c]);
        }
    }
    return score;
}

mcmc::Proposal identity_proposal(const mcmc::ChainState& state, const dp::NoisyTrace& trace,
                                 int index) {
    mcmc::Proposal prop;
    prop.replace_index = index;
    prop.old_point = state.data[index];
    prop.new_point = state.data[index];
    prop.log_correction = 0.0;
    for (int t = 0; t < trace.T; ++t) {
        const int c = core::assign(state.data[index].coords, trace.partition_centroids(t));
        prop.old_cluster.push_back(c);
        prop.new_cluster.push_back(c);
    }
    return prop;
}

} // namespace

TEST_CASE("target_log_score is zero when the dataset reproduces the trace") {
    Rng rng(41);
    const Dataset data = random_ball_dataset(25, 2, rng);
    const auto init = dp::init_centroids(2, 2, 0.0, rng);
    dp::DpKmeansOptions options;
    options.noise_scale_override = 0.0; // exact statistics in the trace
    const auto trace = dp::dp_kmeans(data, 2, 3, 1.0, init, rng, options);
    CHECK(mcmc::target_log_score(data, trace) == 0.0);
}

TEST_CASE("target_log_score matches the hand computation") {
    const auto trace = tiny_trace(2.0, 3.0, 0.5);
    const Dataset data{{{1.0}, {1.0}}};
    // sums match exactly; the count misses by one
    CHECK(mcmc::target_log_score(data, trace) == doctest::Approx(-trace.eps_count));
}

TEST_CASE("target_log_score equals the per-iterate recomputation oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const auto trace = sample_trace(rng);
        const Dataset data = random_ball_dataset(15, 2, rng);
        CHECK(mcmc::target_log_score(data, trace) ==
              doctest::Approx(score_oracle(data, trace)).epsilon(1e-12));
    }
}

TEST_CASE("init_state rounds the final counts into copies of the final centers") {
    dp::NoisyTrace trace;
    trace.initial_centroids.centers = {{0.0, 0.0}, {0.1, 0.1}};
    trace.T = 1;
    trace.epsilon = 1.0;
    trace.eps_sum = trace.eps_count = 0.5;
    dp::NoisyIterate iterate;
    iterate.noisy_sums = {{1.0, 0.0}, {0.0, 1.0}};
    iterate.noisy_counts = {3.4, 0.6};
    iterate.centroids.centers = {{0.25, 0.0}, {0.0, 0.5}};
    trace.iterates.push_back(iterate);

    const auto state = mcmc::init_state(trace);
    REQUIRE(state.data.size() == 4);
    for (int i = 0; i < 3; ++i) {
        CHECK(state.data[i].coords == Vec{0.25, 0.0});
        CHECK(state.data[i].gen_t == 0);
        CHECK(state.data[i].gen_z == 0);
    }
    CHECK(state.data[3].coords == Vec{0.0, 0.5});
    CHECK(state.data[3].gen_z == 1);
    CHECK(state.log_score == doctest::Approx(mcmc::target_log_score(mcmc::to_dataset(state.data), trace)));

    iterate.noisy_counts = {0.4, 0.3}; // rounds to zero copies everywhere
    trace.iterates[0] = iterate;
    CHECK_THROWS_AS(mcmc::init_state(trace), std::runtime_error);
}

TEST_CASE("init_state caches match a from-scratch recomputation") {
    Rng rng(43);
    const auto trace = sample_trace(rng);
    const auto state = mcmc::init_state(trace);
    const auto fresh = core::cluster_stats(mcmc::to_dataset(state.data),
                                           trace.partition_centroids(0));
    CHECK(state.stats[0].counts == fresh.counts);
    for (int c = 0; c < trace.k(); ++c)
        for (int j = 0; j < trace.dim(); ++j)
            CHECK(state.stats[0].sums[c][j] == doctest::Approx(fresh.sums[c][j]));
}

TEST_CASE("propose: single cluster forces z = 0 and delta -> 0 pins the point") {
    Rng rng(44);
    const auto trace = tiny_trace(2.0, 3.0, 0.5);
    const auto state = mcmc::init_state(trace);

    mcmc::ChainOptions options;
    options.delta = 1e-300;
    for (int i = 0; i < 20; ++i) {
        const auto prop = mcmc::propose(state, trace, options, rng);
        CHECK(prop.new_point.gen_z == 0);
        CHECK(std::abs(prop.new_point.coords[0] - trace.iterates[0].centroids.centers[0][0]) < 1e-100);
    }
}

TEST_CASE("propose samples clusters with count-proportional frequencies") {
    dp::NoisyTrace trace;
    trace.initial_centroids.centers = {{0.0, 0.0}, {0.2, 0.0}, {0.0, 0.2}, {-0.2, 0.0}};
    trace.T = 1;
    trace.epsilon = 1.0;
    trace.eps_sum = trace.eps_count = 0.5;
    dp::NoisyIterate iterate;
    iterate.noisy_counts = {1.0, 2.0, 3.0, 4.0};
    iterate.noisy_sums = {{0.0, 0.0}, {0.4, 0.0}, {0.0, 0.6}, {-0.8, 0.0}};
    iterate.centroids = dp::derive_centroids(iterate.noisy_sums, iterate.noisy_counts,
                                             trace.initial_centroids, 1.0);
    trace.iterates.push_back(iterate);

    Rng rng(45);
    const auto state = mcmc::init_state(trace);
    mcmc::ChainOptions options;
    options.delta = 0.001;

    const int samples = 100000;
    std::vector<double> freq(4, 0.0);
    for (int i = 0; i < samples; ++i)
        freq[mcmc::propose(state, trace, options, rng).new_point.gen_z] += 1.0;

    const std::vector<double> expected = {0.1, 0.2, 0.3, 0.4};
    double chi2 = 0.0;
    for (int c = 0; c < 4; ++c) {
        CHECK(std::abs(freq[c] / samples - expected[c]) < 0.01);
        const double e = expected[c] * samples;
        chi2 += (freq[c] - e) * (freq[c] - e) / e;
    }
    CHECK(chi2 < test::chi_square_crit_1pct(3));
}

TEST_CASE("propose draws new points from N(c_z, delta I) before projection") {
    const auto trace = tiny_trace(0.6, 3.0, 0.5); // center at 0.2
    Rng rng(46);
    const auto state = mcmc::init_state(trace);
    mcmc::ChainOptions options;
    options.delta = 0.01;
    options.ball_projection = false;

    const int samples = 100000;
    std::vector<double> draws(samples);
    for (int i = 0; i < samples; ++i)
        draws[i] = mcmc::propose(state, trace, options, rng).new_point.coords[0];
    CHECK(std::abs(test::mean(draws) - 0.2) < 0.005);
    CHECK(test::variance(draws) == doctest::Approx(options.delta).epsilon(0.05));
}

TEST_CASE("proposals stay in the L1 ball when projection is on") {
    Rng rng(47);
    const auto trace = sample_trace(rng, 30, 2, 2, 2, 1.0);
    const auto state = mcmc::init_state(trace);
    mcmc::ChainOptions options;
    options.delta = 0.5; // large spread so raw draws often leave the ball
    for (int i = 0; i < 200; ++i) {
        const auto prop = mcmc::propose(state, trace, options, rng);
        CHECK(core::l1_norm(prop.new_point.coords) <= 1.0 + 1e-12);
    }
}

TEST_CASE("propose resamples iterates whose clusters all have zero weight") {
    // raw (unprojected) traces can carry nonpositive counts
    dp::NoisyTrace trace;
    trace.initial_centroids.centers = {{0.0}};
    trace.T = 2;
    trace.epsilon = 1.0;
    trace.eps_sum = trace.eps_count = 0.25;
    dp::NoisyIterate dead;
    dead.noisy_sums = {{1.0}};
    dead.noisy_counts = {-2.0};
    dead.centroids.centers = {{0.1}};
    dp::NoisyIterate alive = dead;
    alive.noisy_counts = {3.0};
    trace.iterates = {dead, alive};

    mcmc::ChainState state;
    state.data.push_back(mcmc::LabeledPoint{{0.1}, 1, 0});

    Rng rng(56);
    mcmc::ChainOptions options;
    for (int i = 0; i < 50; ++i)
        CHECK(mcmc::propose(state, trace, options, rng).new_point.gen_t == 1);

    trace.iterates[1].noisy_counts = {0.0}; // nothing to sample anywhere
    CHECK_THROWS_AS(mcmc::propose(state, trace, options, rng), std::runtime_error);
}

TEST_CASE("proposal cluster assignments agree with core::assign") {
    Rng rng(48);
    const auto trace = sample_trace(rng);
    const auto state = mcmc::init_state(trace);
    mcmc::ChainOptions options;
    for (int i = 0; i < 20; ++i) {
        const auto prop = mcmc::propose(state, trace, options, rng);
        for (int t = 0; t < trace.T; ++t) {
            CHECK(prop.old_cluster[t] ==
                  core::assign(prop.old_point.coords, trace.partition_centroids(t)));
            CHECK(prop.new_cluster[t] ==
                  core::assign(prop.new_point.coords, trace.partition_centroids(t)));
        }
    }
}

TEST_CASE("delta_log_score: identical replacement changes nothing") {
    Rng rng(49);
    const auto trace = sample_trace(rng);
    const auto state = mcmc::init_state(trace);
    const auto prop = identity_proposal(state, trace, 0);
    CHECK(mcmc::delta_log_score(state, prop, trace) == 0.0);
    CHECK(mcmc::accept_prob(state, prop, trace) == 1.0);
}

TEST_CASE("delta_log_score equals the from-scratch difference") {
    Rng rng(50);
    mcmc::ChainOptions options;
    for (int trial = 0; trial < 5; ++trial) {
        const auto trace = sample_trace(rng);
        auto state = mcmc::init_state(trace);
        // wander a little so states differ from D0
        for (int s = 0; s < 50; ++s) mcmc::step(state, trace, options, rng);

        const double base = mcmc::target_log_score(mcmc::to_dataset(state.data), trace);
        for (int i = 0; i < 20; ++i) {
            const auto prop = mcmc::propose(state, trace, options, rng);
            auto altered = mcmc::to_dataset(state.data);
            altered.points[prop.replace_index] = prop.new_point.coords;
            const double expected = mcmc::target_log_score(altered, trace) - base;
            CHECK(std::abs(mcmc::delta_log_score(state, prop, trace) - expected) < 1e-9);
        }
    }
}

TEST_CASE("accept_prob equals the explicit ratio") {
    Rng rng(51);
    mcmc::ChainOptions options;
    const auto trace = sample_trace(rng);
    auto state = mcmc::init_state(trace);
    for (int s = 0; s < 30; ++s) mcmc::step(state, trace, options, rng);

    const double base = mcmc::target_log_score(mcmc::to_dataset(state.data), trace);
    for (int i = 0; i < 100; ++i) {
        const auto prop = mcmc::propose(state, trace, options, rng);
        auto altered = mcmc::to_dataset(state.data);
        altered.points[prop.replace_index] = prop.new_point.coords;
        const double full = mcmc::target_log_score(altered, trace) - base + prop.log_correction;
        const double expected = std::min(1.0, std::exp(full));
        const double got = mcmc::accept_prob(state, prop, trace);
        CHECK(got == doctest::Approx(expected).epsilon(1e-9));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("step keeps caches exact on accept and the state intact on reject") {
    Rng rng(52);
    mcmc::ChainOptions options;
    const auto trace = sample_trace(rng);
    auto state = mcmc::init_state(trace);

    int accepts = 0, rejects = 0;
    for (int s = 0; s < 200 && (accepts < 20 || rejects < 20); ++s) {
        const auto before = state;
        const bool accepted = mcmc::step(state, trace, options, rng);
        if (accepted) {
            ++accepts;
            auto recomputed = state;
            mcmc::refresh(recomputed, trace);
            CHECK(std::abs(state.log_score - recomputed.log_score) < 1e-9);
            for (int t = 0; t < trace.T; ++t) {
                CHECK(state.stats[t].counts == recomputed.stats[t].counts);
                for (int c = 0; c < trace.k(); ++c)
                    for (int j = 0; j < trace.dim(); ++j)
                        CHECK(std::abs(state.stats[t].sums[c][j] -
                                       recomputed.stats[t].sums[c][j]) < 1e-9);
            }
        } else {
            ++rejects;
            CHECK(state.log_score == before.log_score);
            CHECK(state.data.size() == before.data.size());
            for (std::size_t i = 0; i < state.data.size(); ++i)
                CHECK(state.data[i].coords == before.data[i].coords);
            for (int t = 0; t < trace.T; ++t)
                CHECK(state.stats[t].counts == before.stats[t].counts);
        }
    }
    CHECK(accepts > 0);
    CHECK(rejects > 0);
}

TEST_CASE("run_chain tracks the best state and is deterministic") {
    Rng trace_rng(53);
    const auto trace = sample_trace(trace_rng);
    mcmc::ChainOptions options;

    Rng a(99), b(99);
    const auto ra = mcmc::run_chain(trace, 500, options, a);
    const auto rb = mcmc::run_chain(trace, 500, options, b);

    CHECK(ra.score_trace.size() == 501);
    CHECK(ra.acceptance_rate >= 0.0);
    CHECK(ra.acceptance_rate <= 1.0);
    double best = ra.score_trace[0];
    for (double s : ra.score_trace) best = std::max(best, s);
    CHECK(ra.best_score == best);

    CHECK(ra.score_trace == rb.score_trace);
    CHECK(ra.best_score == rb.best_score);
    CHECK(ra.acceptance_rate == rb.acceptance_rate);
    REQUIRE(ra.best_data.size() == rb.best_data.size());
    for (int i = 0; i < ra.best_data.size(); ++i)
        CHECK(ra.best_data.points[i] == rb.best_data.points[i]);

    Rng c(100);
    const auto rc = mcmc::run_chain(trace, 1, options, c);
    CHECK(rc.best_score >= rc.score_trace[0]);
}

TEST_CASE("incremental score matches batch recomputation over a long run") {
    Rng rng(54);
    const auto trace = sample_trace(rng, 60, 3, 2, 3, 1.0);
    auto state = mcmc::init_state(trace);
    mcmc::ChainOptions options;
    for (int s = 1; s <= 2000; ++s) {
        mcmc::step(state, trace, options, rng);
        if (s % 500 == 0) {
            auto recomputed = state;
            mcmc::refresh(recomputed, trace);
            CHECK(std::abs(state.log_score - recomputed.log_score) < 1e-6);
        }
    }
}

TEST_CASE("final_centroids returns the best of the replicated restarts") {
    Rng data_rng(55);
    const Dataset data = random_ball_dataset(80, 2, data_rng);

    // restarts = 1 reduces to a single lloyd run with the same draw stream
    {
        Rng impl(7), oracle(7);
        const auto got = mcmc::final_centroids(data, 3, 1, impl);
        const auto init = dp::init_centroids(3, 2, 0.0, oracle);
        const auto expected = core::lloyd(data, 3, init);
        CHECK(got.centroids.centers == expected.centroids.centers);
        CHECK(got.wcss_on_best == expected.wcss);
    }

    // the returned WCSS is the minimum over restarts
    {
        Rng impl(8), oracle(8);
        const auto got = mcmc::final_centroids(data, 3, 5, impl);
        double best = 1e300;
        for (int r = 0; r < 5; ++r) {
            const auto init = dp::init_centroids(3, 2, 0.0, oracle);
            best = std::min(best, core::lloyd(data, 3, init).wcss);
        }
        CHECK(got.wcss_on_best == best);
        CHECK(got.wcss_on_best == doctest::Approx(core::wcss(data, got.centroids)));
    }
}
