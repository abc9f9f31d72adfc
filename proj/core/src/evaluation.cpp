#include "phalanx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace phalanx {

RocCurve roc_curve(std::span<const double> genuine, std::span<const double> imposter) {
    if (genuine.empty() || imposter.empty())
        throw EvalError(EvalFault::empty_score_list, "roc_curve needs nonempty score lists");

    std::vector<double> g(genuine.begin(), genuine.end());
    std::vector<double> i(imposter.begin(), imposter.end());
    std::sort(g.begin(), g.end(), std::greater<>());
    std::sort(i.begin(), i.end(), std::greater<>());

    std::vector<double> thresholds;
    thresholds.reserve(g.size() + i.size() + 1);
    thresholds.insert(thresholds.end(), g.begin(), g.end());
    thresholds.insert(thresholds.end(), i.begin(), i.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocCurve curve;
    curve.n_genuine = static_cast<std::int64_t>(g.size());
    curve.n_imposter = static_cast<std::int64_t>(i.size());
    curve.points.reserve(thresholds.size() + 1);

    // Sentinel above every score: the guaranteed FAR = 0 endpoint.
    double sentinel = thresholds.front() + 1.0;
    curve.points.push_back({sentinel, 0, 0, 0.0, 0.0, true});

    std::size_t gi = 0, ii = 0;
    for (double t : thresholds) {
        while (gi < g.size() && g[gi] >= t) ++gi;
        while (ii < i.size() && i[ii] >= t) ++ii;
        RocPoint p;
        p.threshold = t;
        p.genuine_accepted = static_cast<std::int64_t>(gi);
        p.imposter_accepted = static_cast<std::int64_t>(ii);
        p.far = static_cast<double>(p.imposter_accepted) / static_cast<double>(curve.n_imposter);
        p.gar = static_cast<double>(p.genuine_accepted) / static_cast<double>(curve.n_genuine);
        curve.points.push_back(p);
    }
    return curve;
}

OperatingPoint gar_at_far(const RocCurve& curve, double far_target, double confidence) {
    if (!(far_target > 0.0) || !(far_target <= 1.0))
        throw EvalError(EvalFault::range, "far_target outside (0, 1]");
    if (curve.points.empty() || curve.n_genuine <= 0 || curve.n_imposter <= 0)
        throw EvalError(EvalFault::range, "malformed curve");

    OperatingPoint op;
    op.far_target = far_target;

    // Points run from high to low threshold; scan backwards for the smallest
    // admissible (non-sentinel) threshold. FAR compared exactly via counts.
    const long double bound = static_cast<long double>(far_target) *
                              static_cast<long double>(curve.n_imposter);
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
        if (it->sentinel) continue;
        if (static_cast<long double>(it->imposter_accepted) <= bound) {
            op.attainable = true;
            op.threshold = it->threshold;
            op.genuine_accepted = it->genuine_accepted;
            op.gar = it->gar;
            auto ci = clopper_pearson(it->genuine_accepted, curve.n_genuine, confidence);
            op.ci_lower = ci.first;
            op.ci_upper = ci.second;
            break;
        }
    }
    return op;
}

double eer(const RocCurve& curve) {
    if (curve.points.empty() || curve.n_genuine <= 0 || curve.n_imposter <= 0)
        throw EvalError(EvalFault::range, "malformed curve");
    const std::int64_t ng = curve.n_genuine, ni = curve.n_imposter;
    // |FAR - FRR| compared as exact integers over the common denominator
    // ni*ng: diff = |ia*ng - (ng - ga)*ni|.
    std::int64_t best_diff = -1;
    const RocPoint* best = nullptr;
    for (const RocPoint& p : curve.points) {  // descending; later = lower threshold
        std::int64_t diff =
            std::llabs(p.imposter_accepted * ng - (ng - p.genuine_accepted) * ni);
        if (best == nullptr || diff <= best_diff) {  // ties go to the lower threshold
            best_diff = diff;
            best = &p;
        }
    }
    double far = static_cast<double>(best->imposter_accepted) / static_cast<double>(ni);
    double frr = static_cast<double>(ng - best->genuine_accepted) / static_cast<double>(ng);
    return (far + frr) / 2.0;
}

namespace {

// log of the binomial tail over an index window, by log-sum-exp. The window
// covers every term that can influence the first ~40 significant digits;
// windowing only matters for very large n.
long double binomial_tail(std::int64_t n, std::int64_t lo, std::int64_t hi, double p) {
    if (lo > hi) return 0.0L;
    if (p <= 0.0) return lo <= 0 ? 1.0L : 0.0L;
    if (p >= 1.0) return hi >= n ? 1.0L : 0.0L;

    const long double lp = std::log(static_cast<long double>(p));
    const long double lq = std::log1p(static_cast<long double>(-p));
    const long double lg_n1 = std::lgammal(static_cast<long double>(n) + 1.0L);

    // Clip to a +-60 sigma window around the mean; omitted mass is far below
    // the 1e-10 bisection tolerance.
    const long double mean = static_cast<long double>(n) * p;
    const long double sigma = std::sqrt(mean * (1.0L - p)) + 1.0L;
    std::int64_t wlo = std::max(lo, static_cast<std::int64_t>(mean - 60.0L * sigma) - 2);
    std::int64_t whi = std::min(hi, static_cast<std::int64_t>(mean + 60.0L * sigma) + 2);
    if (wlo > whi) {
        // The whole window is negligible relative to 1.
        return 0.0L;
    }

    long double max_log = -1e30L;
    for (std::int64_t k = wlo; k <= whi; ++k) {
        long double lk = lg_n1 - std::lgammal(static_cast<long double>(k) + 1.0L) -
                         std::lgammal(static_cast<long double>(n - k) + 1.0L) +
                         static_cast<long double>(k) * lp +
                         static_cast<long double>(n - k) * lq;
        if (lk > max_log) max_log = lk;
    }
    long double sum = 0.0L;
    for (std::int64_t k = wlo; k <= whi; ++k) {
        long double lk = lg_n1 - std::lgammal(static_cast<long double>(k) + 1.0L) -
                         std::lgammal(static_cast<long double>(n - k) + 1.0L) +
                         static_cast<long double>(k) * lp +
                         static_cast<long double>(n - k) * lq;
        sum += std::exp(lk - max_log);
    }
    long double result = std::exp(max_log) * sum;
    return std::min(result, 1.0L);
}

}  // namespace

std::pair<double, double> clopper_pearson(std::int64_t k, std::int64_t n, double confidence) {
    if (n < 1) throw EvalError(EvalFault::range, "n must be >= 1");
    if (k < 0 || k > n) throw EvalError(EvalFault::range, "k outside 0..n");
    if (!(confidence > 0.0) || !(confidence < 1.0))
        throw EvalError(EvalFault::range, "confidence outside (0, 1)");
    const long double half_alpha = (1.0L - static_cast<long double>(confidence)) / 2.0L;

    double lower = 0.0;
    if (k > 0) {
        // P(X >= k | p) grows with p; find where it crosses alpha/2.
        double lo = 0.0, hi = 1.0;
        for (int iter = 0; iter < 80; ++iter) {
            double mid = 0.5 * (lo + hi);
            long double tail = binomial_tail(n, k, n, mid);
            if (tail >= half_alpha)
                hi = mid;
            else
                lo = mid;
        }
        lower = 0.5 * (lo + hi);
    }

    double upper = 1.0;
    if (k < n) {
        // P(X <= k | p) falls with p.
        double lo = 0.0, hi = 1.0;
        for (int iter = 0; iter < 80; ++iter) {
            double mid = 0.5 * (lo + hi);
            long double tail = binomial_tail(n, 0, k, mid);
            if (tail >= half_alpha)
                lo = mid;
            else
                hi = mid;
        }
        upper = 0.5 * (lo + hi);
    }
    return {lower, upper};
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw EvalError(EvalFault::range, "length mismatch");
    if (x.size() < 2) throw EvalError(EvalFault::range, "need at least 2 samples");
    const std::size_t n = x.size();
    long double mx = 0.0L, my = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxx = 0.0L, syy = 0.0L, sxy = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0L || syy == 0.0L)
        throw EvalError(EvalFault::degenerate_variance, "constant input has no correlation");
    long double r = sxy / std::sqrt(sxx * syy);
    return static_cast<double>(std::min(1.0L, std::max(-1.0L, r)));
}

DistributionStats summarize_distribution(std::span<const double> samples,
                                         std::span<const double> bin_edges) {
    if (samples.empty()) throw EvalError(EvalFault::empty_score_list, "no samples");
    if (bin_edges.size() < 2) throw EvalError(EvalFault::range, "need at least 2 bin edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (!(bin_edges[i] > bin_edges[i - 1]))
            throw EvalError(EvalFault::range, "bin edges must increase");

    DistributionStats stats;
    stats.histogram.assign(bin_edges.size() - 1, 0);
    long double sum = 0.0L;
    for (double s : samples) {
        sum += s;
        // Clamp into the end cells: mass always equals the sample count.
        auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), s);
        std::ptrdiff_t bin = (it - bin_edges.begin()) - 1;
        bin = std::max<std::ptrdiff_t>(0, std::min<std::ptrdiff_t>(bin, stats.histogram.size() - 1));
        ++stats.histogram[static_cast<std::size_t>(bin)];
    }
    long double mean = sum / samples.size();
    stats.mean = static_cast<double>(mean);
    if (samples.size() == 1) {
        stats.stddev = 0.0;
        return stats;
    }
    long double ss = 0.0L;
    for (double s : samples) {
        long double d = s - mean;
        ss += d * d;
    }
    stats.stddev = static_cast<double>(std::sqrt(ss / (samples.size() - 1)));
    return stats;
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    std::string buf;
    buf.reserve(1 << 20);
    buf += "threshold,far,gar\n";
    char line[96];
    for (const RocPoint& p : curve.points) {
        std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f\n", p.threshold, p.far, p.gar);
        buf += line;
        if (buf.size() > (1 << 20) - 256) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("short write to " + path.string());
}

}  // namespace phalanx
