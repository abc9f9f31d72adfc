#pragma once

#include <cstdint>

#include "phalanx/errors.hpp"
#include "phalanx/types.hpp"

namespace phalanx {

struct MatcherParams {
    double distance_tolerance = 15.0;  // px, inclusive
    int angle_tolerance = 16;          // angle units, inclusive (16 = 22.5 degrees)
    int bin_dx = 10;                   // accumulator cell width, px
    int bin_dy = 10;
    int bin_dtheta = 8;  // accumulator cell width, angle units
    double score_scale = 100.0;
};

// Throws ConfigError unless every tolerance and bin width is positive.
void validate(const MatcherParams& params);

// Rigid motion mapping gallery coordinates into the probe frame:
//   probe_point ~ rotate(dtheta) * gallery_point + (dx, dy).
// dtheta is canonical modulo 256.
struct Alignment {
    int dx = 0;
    int dy = 0;
    int dtheta = 0;
    std::int64_t votes = 0;  // accumulator support behind the estimate
};

// min(|a-b|, 256-|a-b|), in 0..128.
int circular_angle_diff(std::uint8_t a, std::uint8_t b);

// Generalized-Hough vote over all angle-compatible cross-template minutia
// pairs; returns the accumulator peak's centroid. Ties between equally
// supported cells prefer the smallest (|dx|+|dy|, dtheta); any remainder is
// settled by (dx, dy, cell id) so the result is a total order. Zero
// compatible pairs yield the identity with votes = 0.
// Throws MatcherError if either template is empty.
Alignment estimate_alignment(const MinutiaTemplate& probe, const MinutiaTemplate& gallery,
                             const MatcherParams& params = {});

// Aligns the templates, then greedily pairs minutiae in increasing distance
// order (each used at most once) subject to the distance and angle
// tolerances. With m accepted pairs, score = score_scale * m^2 / (n_p * n_g).
// Total function: empty input scores 0.
double match_score(const MinutiaTemplate& probe, const MinutiaTemplate& gallery,
                   const MatcherParams& params = {});

}  // namespace phalanx
