#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "phalanx/errors.hpp"

namespace phalanx {

struct RocPoint {
    double threshold = 0.0;
    std::int64_t genuine_accepted = 0;   // genuine scores >= threshold
    std::int64_t imposter_accepted = 0;  // imposter scores >= threshold
    double far = 0.0;                    // imposter_accepted / n_imposter
    double gar = 0.0;                    // genuine_accepted / n_genuine
    bool sentinel = false;               // the above-maximum endpoint
};

// Points in descending threshold order: every distinct observed score plus
// one sentinel above the maximum (so a FAR = 0 endpoint always exists; the
// minimum observed score supplies the FAR = 1, GAR = 1 endpoint).
struct RocCurve {
    std::vector<RocPoint> points;
    std::int64_t n_genuine = 0;
    std::int64_t n_imposter = 0;
};

// Acceptance rule is score >= threshold; exact counting, no binning.
// Throws EvalError(empty_score_list) if either list is empty.
RocCurve roc_curve(std::span<const double> genuine, std::span<const double> imposter);

struct OperatingPoint {
    double far_target = 0.0;
    bool attainable = false;
    double threshold = 0.0;
    std::int64_t genuine_accepted = 0;
    double gar = 0.0;
    double ci_lower = 0.0;  // Clopper-Pearson on (genuine_accepted, n_genuine)
    double ci_upper = 0.0;
};

// GAR at the smallest observed-score threshold whose FAR <= far_target.
// The sentinel is not an admissible threshold: when even the largest observed
// score has FAR > target (curves cannot extend past 1/n_imposter), the point
// comes back with attainable = false rather than a fabricated rate.
OperatingPoint gar_at_far(const RocCurve& curve, double far_target, double confidence = 0.95);

// (FAR + FRR)/2 at the threshold minimizing |FAR - FRR| (exact rational
// comparison; ties toward the lower threshold). The sentinel participates in
// the sweep.
double eer(const RocCurve& curve);

// Exact binomial interval: lower solves P(X >= k | n, p) = alpha/2 (0 when
// k = 0), upper solves P(X <= k | n, p) = alpha/2 (1 when k = n), both by
// bisection on the exact tail to absolute tolerance 1e-10.
std::pair<double, double> clopper_pearson(std::int64_t k, std::int64_t n,
                                          double confidence = 0.95);

// Sample Pearson coefficient. Throws EvalError (range on size mismatch or
// n < 2, degenerate_variance when either side is constant).
double pearson_correlation(std::span<const double> x, std::span<const double> y);

struct DistributionStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1); 0 when n = 1
    std::vector<std::int64_t> histogram;
};

// Histogram over [edges[i], edges[i+1]) cells; samples outside the edge range
// are clamped into the end cells so mass always equals the sample count.
DistributionStats summarize_distribution(std::span<const double> samples,
                                         std::span<const double> bin_edges);

// CSV: threshold,far,gar rows, descending threshold, 6 decimals.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);

}  // namespace phalanx
