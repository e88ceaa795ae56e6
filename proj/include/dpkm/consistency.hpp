#ifndef DPKM_CONSISTENCY_HPP
#define DPKM_CONSISTENCY_HPP

#include "dpkm/dp_mechanism.hpp"

namespace dpkm::consistency {

struct ProjectionOptions {
    double tolerance = 1e-10; // max-norm change between sweeps
    int max_sweeps = 10000;
    double count_floor = 1.0; // for re-deriving centroids
};

// Euclidean projection of the trace statistics onto the consistency set:
//   - the componentwise total of the sums is identical across iterations,
//   - the total of the counts is identical across iterations,
//   - every count is non-negative.
// The sums block is an affine constraint with a closed-form shift; the counts
// block alternates that shift with clamping at zero (Dykstra), which converges
// to the exact L2 projection onto the intersection. Centroids are re-derived
// from the projected values with the safeguarded division rule.
dp::NoisyTrace enforce_consistency(const dp::NoisyTrace& trace,
                                   const ProjectionOptions& options = {});

} // namespace dpkm::consistency

#endif
