#include "fsd/track.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fsd/csv.hpp"
#include "fsd/rng.hpp"

namespace fsd::track {

Vec2 Segment::point_at(double s) const {
    if (kappa == 0.0)
        return start + heading_vec(heading) * s;
    // Rotate around the arc center by the swept angle.
    const double radius = 1.0 / kappa;  // signed
    const Vec2 center = start + left_normal(heading_vec(heading)) * radius;
    const double swept = s * kappa;
    return center + rotate(start - center, swept);
}

double Segment::heading_at(double s) const { return heading + s * kappa; }

TrackSpec TrackSpec::from_config(const Config& cfg) {
    TrackSpec s;
    s.n_segments = cfg.get_int("track.n_segments", s.n_segments);
    s.min_radius = cfg.get_double("track.min_radius", s.min_radius);
    s.width = cfg.get_double("track.width", s.width);
    s.spacing = cfg.get_double("track.spacing", s.spacing);
    s.scale = cfg.get_double("track.scale", s.scale);
    return s;
}

void TrackSpec::to_config(Config& cfg) const {
    cfg.set("track.n_segments", n_segments);
    cfg.set("track.min_radius", min_radius);
    cfg.set("track.width", width);
    cfg.set("track.spacing", spacing);
    cfg.set("track.scale", scale);
}

double Track::total_length() const {
    double total = 0.0;
    for (const auto& seg : segments) total += seg.length;
    return total;
}

namespace {

// Locate the segment containing arc length s (s already wrapped to [0, L)).
const Segment* locate(const std::vector<Segment>& segments, double s, double* local) {
    double acc = 0.0;
    for (const auto& seg : segments) {
        if (s <= acc + seg.length) {
            *local = s - acc;
            return &seg;
        }
        acc += seg.length;
    }
    *local = segments.back().length;
    return &segments.back();
}

double wrap_length(double s, double total) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
    return s;
}

}  // namespace

Vec2 Track::centerline_at(double s) const {
    double local = 0.0;
    const Segment* seg = locate(segments, wrap_length(s, total_length()), &local);
    return seg->point_at(local);
}

double Track::heading_at(double s) const {
    double local = 0.0;
    const Segment* seg = locate(segments, wrap_length(s, total_length()), &local);
    return wrap_angle(seg->heading_at(local));
}

double Track::kappa_at(double s) const {
    double local = 0.0;
    const Segment* seg = locate(segments, wrap_length(s, total_length()), &local);
    return seg->kappa;
}

std::vector<Cone> Track::all_cones() const {
    std::vector<Cone> all = blue_cones;
    all.insert(all.end(), red_cones.begin(), red_cones.end());
    return all;
}

void Track::save_cones_csv(const std::string& path) const {
    CsvWriter w(path);
    w.header({"x", "y", "color"});
    for (const auto& c : blue_cones) {
        w.field(c.position.x);
        w.field(c.position.y);
        w.field("blue");
        w.end_row();
    }
    for (const auto& c : red_cones) {
        w.field(c.position.x);
        w.field(c.position.y);
        w.field("red");
        w.end_row();
    }
}

std::vector<Cone> Track::load_cones_csv(const std::string& path) {
    std::vector<Cone> cones;
    for (const auto& row : read_csv(path, true)) {
        if (row.size() != 3) throw std::runtime_error("cone csv: expected x,y,color in " + path);
        Cone c;
        c.position = {std::stod(row[0]), std::stod(row[1])};
        if (row[2] == "blue")
            c.color = ConeColor::kBlue;
        else if (row[2] == "red")
            c.color = ConeColor::kRed;
        else
            throw std::runtime_error("cone csv: unknown color '" + row[2] + "'");
        cones.push_back(c);
    }
    return cones;
}

void Track::save_centerline_csv(const std::string& path, double ds) const {
    CsvWriter w(path);
    w.header({"s", "x", "y", "heading", "kappa"});
    const double total = total_length();
    for (double s = 0.0; s < total; s += ds) {
        const Vec2 p = centerline_at(s);
        w.field(s);
        w.field(p.x);
        w.field(p.y);
        w.field(heading_at(s));
        w.field(kappa_at(s));
        w.end_row();
    }
}

namespace {

Track circle_track(double radius, double width, double spacing) {
    Track t;
    t.width = width;
    t.spacing = spacing;
    Segment seg;
    seg.start = {radius, 0.0};
    seg.heading = M_PI / 2.0;  // CCW
    seg.kappa = 1.0 / radius;
    seg.length = 2.0 * M_PI * radius;
    t.segments.push_back(seg);
    return t;
}

void place_cones(Track& t) {
    const double total = t.total_length();
    const double half = t.width / 2.0;
    for (double s = 0.0; s < total - 1e-9; s += t.spacing) {
        const Vec2 p = t.centerline_at(s);
        const Vec2 n = left_normal(heading_vec(t.heading_at(s)));
        t.blue_cones.push_back({p + n * half, ConeColor::kBlue});
        t.red_cones.push_back({p - n * half, ConeColor::kRed});
    }
}

struct Corner {
    Vec2 vertex;
    double turn{0.0};    // exterior angle, > 0 for a CCW polygon
    double radius{0.0};  // fillet radius
    double tangent{0.0}; // distance from vertex to arc tangent points
};

}  // namespace

Track generate_loop(const TrackSpec& spec, std::uint64_t seed) {
    if (spec.min_radius < 4.0) throw GenerationError("generate_loop: min_radius must be >= 4 m");
    if (spec.width < 3.0) throw GenerationError("generate_loop: width must be >= 3 m");

    if (spec.n_segments <= 1) {
        Track t = circle_track(spec.min_radius, spec.width, spec.spacing);
        place_cones(t);
        return t;
    }

    Rng rng(seed);
    const int n = spec.n_segments;
    const double base_radius = spec.scale > 0.0 ? spec.scale : 3.0 * spec.min_radius;
    // Keep same-side cone pitch above half the nominal spacing on the inner
    // offset: radius ratio (rho - w/2) / rho must stay > 0.5.
    const double fillet_floor = std::max(spec.min_radius, 1.1 * spec.width);

    const int max_attempts = 64;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const double jitter = 0.5 / (1.0 + 0.2 * attempt);

        // Jittered polygon on a circle, kept CCW and convex.
        std::vector<Vec2> verts(n);
        for (int i = 0; i < n; ++i) {
            const double ang = 2.0 * M_PI * (i + rng.uniform(-0.3 * jitter, 0.3 * jitter)) / n;
            const double rad = base_radius * (1.0 + rng.uniform(-0.35 * jitter, 0.35 * jitter));
            verts[i] = {rad * std::cos(ang), rad * std::sin(ang)};
        }

        bool convex = true;
        for (int i = 0; i < n && convex; ++i) {
            const Vec2& a = verts[i];
            const Vec2& b = verts[(i + 1) % n];
            const Vec2& c = verts[(i + 2) % n];
            if ((b - a).cross(c - b) <= 1e-9) convex = false;
        }
        if (!convex) continue;

        std::vector<Corner> corners(n);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            const Vec2& prev = verts[(i + n - 1) % n];
            const Vec2& cur = verts[i];
            const Vec2& next = verts[(i + 1) % n];
            const Vec2 din = cur - prev;
            const Vec2 dout = next - cur;
            const double turn = std::atan2(din.cross(dout), din.dot(dout));
            if (turn <= 1e-3 || turn >= M_PI - 1e-3) {
                ok = false;
                break;
            }
            Corner c;
            c.vertex = cur;
            c.turn = turn;
            c.radius = fillet_floor * (1.0 + rng.uniform(0.0, 0.8));
            c.tangent = c.radius * std::tan(turn / 2.0);
            corners[i] = c;
        }
        if (!ok) continue;

        // Fillets of adjacent corners must leave some straight in between.
        for (int i = 0; i < n && ok; ++i) {
            const double edge = (verts[(i + 1) % n] - verts[i]).norm();
            if (corners[i].tangent + corners[(i + 1) % n].tangent > edge - 0.5) ok = false;
        }
        if (!ok) continue;

        Track t;
        t.width = spec.width;
        t.spacing = spec.spacing;
        for (int i = 0; i < n; ++i) {
            const Corner& c = corners[i];
            const Corner& cn = corners[(i + 1) % n];
            const Vec2 dir = verts[(i + 1) % n] - verts[i];
            const double edge_heading = std::atan2(dir.y, dir.x);
            const double edge_len = dir.norm();

            Segment straight;
            straight.start = verts[i] + dir * (c.tangent / edge_len);
            straight.heading = edge_heading;
            straight.length = edge_len - c.tangent - cn.tangent;
            straight.kappa = 0.0;
            t.segments.push_back(straight);

            Segment arc;
            arc.start = straight.point_at(straight.length);
            arc.heading = edge_heading;
            arc.kappa = 1.0 / cn.radius;
            arc.length = cn.radius * cn.turn;
            t.segments.push_back(arc);
        }

        // Closure check; the construction is exact up to roundoff.
        const Vec2 end = t.segments.back().point_at(t.segments.back().length);
        if ((end - t.segments.front().start).norm() > 1e-6) continue;

        place_cones(t);

        // Sharp corners can fold same-side cones together across the wedge;
        // such a layout is unusable as a track.
        bool spaced = true;
        for (const auto* side : {&t.blue_cones, &t.red_cones}) {
            for (std::size_t i = 0; i < side->size() && spaced; ++i)
                for (std::size_t j = i + 1; j < side->size(); ++j)
                    if (((*side)[i].position - (*side)[j].position).norm() <
                        0.55 * spec.spacing) {
                        spaced = false;
                        break;
                    }
        }
        if (!spaced) continue;
        return t;
    }
    throw GenerationError("generate_loop: no feasible layout after retries");
}

ReferencePath::ReferencePath(std::vector<PathSample> samples, bool closed)
    : samples_(std::move(samples)), closed_(closed) {
    if (samples_.size() < 2) throw std::invalid_argument("ReferencePath: need at least 2 samples");
    for (std::size_t i = 1; i < samples_.size(); ++i)
        if (!(samples_[i].s > samples_[i - 1].s))
            throw std::invalid_argument("ReferencePath: s must be strictly increasing");
    if (closed_) {
        // Closing segment from the last sample back to the first.
        length_ = samples_.back().s + (samples_.back().position - samples_.front().position).norm();
    } else {
        length_ = samples_.back().s;
    }
}

ReferencePath ReferencePath::from_track(const Track& track, double ds, double cone_radius) {
    std::vector<PathSample> samples;
    const double total = track.total_length();
    const double bound = track.width / 2.0 - cone_radius;
    for (double s = 0.0; s < total - 0.5 * ds; s += ds) {
        PathSample ps;
        ps.s = s;
        ps.position = track.centerline_at(s);
        ps.heading = track.heading_at(s);
        ps.kappa = track.kappa_at(s);
        ps.ey_min = -bound;
        ps.ey_max = bound;
        samples.push_back(ps);
    }
    return ReferencePath(std::move(samples), true);
}

double ReferencePath::wrap_s(double s) const {
    if (!closed_) return std::clamp(s, 0.0, length_);
    return wrap_length(s, length_);
}

PathFrame ReferencePath::project(const Vec2& position, double psi, double max_distance) const {
    const std::size_t n = samples_.size();
    const std::size_t seg_count = closed_ ? n : n - 1;

    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    std::size_t best_i = 0;
    double best_t = 0.0;

    for (std::size_t i = 0; i < seg_count; ++i) {
        const PathSample& a = samples_[i];
        const PathSample& b = samples_[(i + 1) % n];
        const Vec2 ab = b.position - a.position;
        const double len2 = ab.squared_norm();
        if (len2 < 1e-18) continue;
        double t = std::clamp((position - a.position).dot(ab) / len2, 0.0, 1.0);
        const Vec2 proj = a.position + ab * t;
        const double d2 = (position - proj).squared_norm();
        const double seg_len = std::sqrt(len2);
        const double s_here = a.s + t * seg_len;
        // Equidistant candidates resolve to the smallest s.
        if (d2 < best_d2 - 1e-12 || (d2 < best_d2 + 1e-12 && s_here < best_s)) {
            best_d2 = d2;
            best_s = s_here;
            best_i = i;
            best_t = t;
        }
    }

    if (std::sqrt(best_d2) > max_distance)
        throw OffTrackError("path_frame: pose is farther than allowed from the path");

    const PathSample& a = samples_[best_i];
    const PathSample& b = samples_[(best_i + 1) % n];
    const Vec2 ab = b.position - a.position;
    const Vec2 proj = a.position + ab * best_t;
    const Vec2 dir = ab * (1.0 / ab.norm());

    PathFrame f;
    f.s = best_s;
    f.e_y = (position - proj).dot(left_normal(dir));
    const double h = a.heading + best_t * wrap_angle(b.heading - a.heading);
    f.e_psi = wrap_angle(psi - h);
    return f;
}

PathSample ReferencePath::interpolate(double s) const {
    s = wrap_s(s);
    const std::size_t n = samples_.size();
    // Binary search for the sample interval containing s.
    std::size_t lo = 0;
    if (s >= samples_.back().s) {
        lo = n - 1;
    } else {
        std::size_t hi = n - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (samples_[mid].s <= s)
                lo = mid;
            else
                hi = mid;
        }
    }
    const PathSample& a = samples_[lo];
    const PathSample& b = samples_[(lo + 1) % n];
    const double ds = (lo == n - 1) ? length_ - a.s : b.s - a.s;
    const double t = ds > 0.0 ? (s - a.s) / ds : 0.0;

    PathSample out;
    out.s = s;
    out.position = a.position + (b.position - a.position) * t;
    out.heading = wrap_angle(a.heading + t * wrap_angle(b.heading - a.heading));
    out.kappa = a.kappa + t * (b.kappa - a.kappa);
    out.ey_min = a.ey_min + t * (b.ey_min - a.ey_min);
    out.ey_max = a.ey_max + t * (b.ey_max - a.ey_max);
    return out;
}

double ReferencePath::kappa_at(double s) const {
    if (s < -1e-9 || s > length_ + 1e-9)
        throw std::out_of_range("curvature_at: s outside [0, length]");
    return interpolate(s).kappa;
}

double ReferencePath::heading_at(double s) const { return interpolate(s).heading; }

void ReferencePath::save_csv(const std::string& path) const {
    CsvWriter w(path);
    w.header({"s", "x", "y", "heading", "kappa", "ey_min", "ey_max"});
    for (const auto& ps : samples_) {
        w.field(ps.s);
        w.field(ps.position.x);
        w.field(ps.position.y);
        w.field(ps.heading);
        w.field(ps.kappa);
        w.field(ps.ey_min);
        w.field(ps.ey_max);
        w.end_row();
    }
}

}  // namespace fsd::track
