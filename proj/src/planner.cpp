#include "fsd/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fsd::planner {

namespace {

// Index of the nearest point in `pts`; -1 when none is inside `gate`.
int nearest_within(const Vec2& p, const std::vector<Vec2>& pts, double gate) {
    int best = -1;
    double best_d2 = gate * gate;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d2 = (pts[i] - p).squared_norm();
        if (d2 <= best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// Greedy nearest-neighbour chain starting from element 0. Deterministic;
// midpoint sets coming from a lap are locally dense so the chain follows
// the direction of travel.
std::vector<int> chain_order(const std::vector<Vec2>& pts) {
    const std::size_t n = pts.size();
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> used(n, 0);
    int cur = 0;
    order.push_back(0);
    used[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j]) continue;
            const double d2 = (pts[j] - pts[cur]).squared_norm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(j);
            }
        }
        order.push_back(best);
        used[best] = 1;
        cur = best;
    }
    return order;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const auto side = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return (q - p).cross(r - p);
    };
    const double s1 = side(a, b, c), s2 = side(a, b, d);
    const double s3 = side(c, d, a), s4 = side(c, d, b);
    return ((s1 > 0) != (s2 > 0)) && ((s3 > 0) != (s4 > 0));
}

}  // namespace

std::vector<Midpoint> pair_cones(const std::vector<Vec2>& blue, const std::vector<Vec2>& red,
                                 double gate, double min_gap) {
    if (blue.size() < 2 || red.size() < 2)
        throw PlanningError("pair_cones: need at least 2 cones per side");

    std::vector<Midpoint> mids;
    for (std::size_t b = 0; b < blue.size(); ++b) {
        const int r = nearest_within(blue[b], red, gate);
        if (r < 0) continue;
        const int back = nearest_within(red[r], blue, gate);
        if (back != static_cast<int>(b)) continue;  // keep mutual pairs only
        if ((blue[b] - red[r]).norm() < min_gap) continue;
        Midpoint m;
        m.position = (blue[b] + red[r]) * 0.5;
        m.half_gap = 0.5 * (blue[b] - red[r]).norm();
        mids.push_back(m);
    }
    if (mids.size() < 2) throw PlanningError("pair_cones: fewer than 2 valid pairs");

    std::vector<Vec2> pts(mids.size());
    for (std::size_t i = 0; i < mids.size(); ++i) pts[i] = mids[i].position;
    const std::vector<int> order = chain_order(pts);
    std::vector<Midpoint> ordered(mids.size());
    for (std::size_t i = 0; i < order.size(); ++i) ordered[i] = mids[order[i]];
    return ordered;
}

double circumcircle_curvature(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ab = b - a, ac = c - a, bc = c - b;
    const double cross = ab.cross(ac);
    const double denom = ab.norm() * ac.norm() * bc.norm();
    if (denom < 1e-12) return 0.0;
    return 2.0 * cross / denom;
}

track::ReferencePath build_reference(const std::vector<Midpoint>& midpoints, bool closed,
                                     double ds, double margin) {
    if (midpoints.size() < 3) throw PlanningError("build_reference: need at least 3 midpoints");

    const std::size_t n = midpoints.size();
    const std::size_t n_segs = closed ? n : n - 1;

    // Self-intersection of the midpoint polyline is a mapping failure.
    for (std::size_t i = 0; i < n_segs; ++i) {
        for (std::size_t j = i + 2; j < n_segs; ++j) {
            if (closed && i == 0 && j == n_segs - 1) continue;
            if (segments_cross(midpoints[i].position, midpoints[(i + 1) % n].position,
                               midpoints[j].position, midpoints[(j + 1) % n].position))
                throw PlanningError("build_reference: midpoint chain self-intersects");
        }
    }

    // Arc length of the raw chain.
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        cum[i] = cum[i - 1] + (midpoints[i].position - midpoints[i - 1].position).norm();
    const double total =
        closed ? cum.back() + (midpoints.front().position - midpoints.back().position).norm()
               : cum.back();
    if (total < 2.0 * ds) throw PlanningError("build_reference: chain too short");

    const auto point_on_chain = [&](double s) {
        if (closed) {
            s = std::fmod(s, total);
            if (s < 0.0) s += total;
        } else {
            s = std::clamp(s, 0.0, total);
        }
        std::size_t i = 0;
        while (i + 1 < n && cum[i + 1] < s) ++i;
        const Vec2 a = midpoints[i].position;
        const Vec2 b = midpoints[(i + 1) % n].position;
        const double seg_start = cum[i];
        const double seg_len = (b - a).norm();
        const double t = seg_len > 0.0 ? (s - seg_start) / seg_len : 0.0;
        const double gap = midpoints[i].half_gap +
                           t * (midpoints[(i + 1) % n].half_gap - midpoints[i].half_gap);
        return std::make_pair(a + (b - a) * t, gap);
    };

    const int n_samples = std::max(3, static_cast<int>(std::floor(total / ds)) + (closed ? 0 : 1));
    std::vector<track::PathSample> samples(n_samples);
    const double step = closed ? total / n_samples : total / (n_samples - 1);
    for (int i = 0; i < n_samples; ++i) {
        const double s = i * step;
        const auto [pos, gap] = point_on_chain(s);
        samples[i].s = s;
        samples[i].position = pos;
        const double bound = std::max(0.2, gap - margin);
        samples[i].ey_min = -bound;
        samples[i].ey_max = bound;
    }

    // Heading by central difference, curvature by circumcircle.
    for (int i = 0; i < n_samples; ++i) {
        const int prev = closed ? (i + n_samples - 1) % n_samples : std::max(0, i - 1);
        const int next = closed ? (i + 1) % n_samples : std::min(n_samples - 1, i + 1);
        const Vec2 d = samples[next].position - samples[prev].position;
        samples[i].heading = std::atan2(d.y, d.x);
        if (prev != i && next != i)
            samples[i].kappa = circumcircle_curvature(samples[prev].position,
                                                      samples[i].position, samples[next].position);
    }
    if (!closed) {
        samples.front().kappa = samples[1].kappa;
        samples.back().kappa = samples[n_samples - 2].kappa;
    }

    return track::ReferencePath(std::move(samples), closed);
}

}  // namespace fsd::planner
