#include "fsd/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fsd::gridmap {

double update_cell(double s_prev, double lomeas, double s_max) {
    if (!std::isfinite(s_prev) || !std::isfinite(lomeas))
        throw std::invalid_argument("update_cell: non-finite input");
    return std::clamp(s_prev + lomeas, -s_max, s_max);
}

ConeMap::ConeMap(double resolution, double s_max) : resolution_(resolution), s_max_(s_max) {
    if (!(resolution > 0.0)) throw std::invalid_argument("ConeMap: resolution must be > 0");
}

CellIndex ConeMap::world_to_cell(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
            static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
}

Vec2 ConeMap::cell_center(const CellIndex& c) const {
    return {origin_.x + (c.i + 0.5) * resolution_, origin_.y + (c.j + 0.5) * resolution_};
}

bool ConeMap::in_bounds(const CellIndex& c) const {
    return c.i >= 0 && c.j >= 0 && c.i < nx_ && c.j < ny_;
}

double ConeMap::log_odds(track::ConeColor channel, const CellIndex& c) const {
    if (!in_bounds(c)) return 0.0;
    return at(channel == track::ConeColor::kRed ? red_ : blue_, c);
}

double& ConeMap::at(std::vector<double>& ch, const CellIndex& c) { return ch[c.j * nx_ + c.i]; }
const double& ConeMap::at(const std::vector<double>& ch, const CellIndex& c) const {
    return ch[c.j * nx_ + c.i];
}

void ConeMap::ensure_contains(const Vec2& p) {
    // Grow with a margin so the 3x3 stamp never lands out of bounds.
    CellIndex c = world_to_cell(p);
    if (nx_ == 0) {
        origin_ = {p.x - 16.0 * resolution_, p.y - 16.0 * resolution_};
        nx_ = ny_ = 32;
        red_.assign(static_cast<std::size_t>(nx_) * ny_, 0.0);
        blue_.assign(red_.size(), 0.0);
        return;
    }
    if (c.i >= 2 && c.j >= 2 && c.i < nx_ - 2 && c.j < ny_ - 2) return;

    const int pad = 32;
    const int grow_left = c.i < 2 ? pad + std::max(0, 2 - c.i) : 0;
    const int grow_down = c.j < 2 ? pad + std::max(0, 2 - c.j) : 0;
    const int grow_right = c.i >= nx_ - 2 ? pad + std::max(0, c.i - nx_ + 3) : 0;
    const int grow_up = c.j >= ny_ - 2 ? pad + std::max(0, c.j - ny_ + 3) : 0;

    const int new_nx = nx_ + grow_left + grow_right;
    const int new_ny = ny_ + grow_down + grow_up;
    std::vector<double> new_red(static_cast<std::size_t>(new_nx) * new_ny, 0.0);
    std::vector<double> new_blue(new_red.size());
    for (int j = 0; j < ny_; ++j) {
        for (int i = 0; i < nx_; ++i) {
            new_red[(j + grow_down) * new_nx + (i + grow_left)] = red_[j * nx_ + i];
            new_blue[(j + grow_down) * new_nx + (i + grow_left)] = blue_[j * nx_ + i];
        }
    }
    origin_.x -= grow_left * resolution_;
    origin_.y -= grow_down * resolution_;
    nx_ = new_nx;
    ny_ = new_ny;
    red_ = std::move(new_red);
    blue_ = std::move(new_blue);
}

void ConeMap::add_evidence(track::ConeColor channel, const Vec2& world, double lomeas) {
    ensure_contains(world);
    const CellIndex c = world_to_cell(world);
    auto& ch = channel == track::ConeColor::kRed ? red_ : blue_;
    at(ch, c) = update_cell(at(ch, c), lomeas, s_max_);
}

namespace {

double log_odds_of(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("confidence must be inside (0, 1)");
    return std::log(p / (1.0 - p));
}

}  // namespace

void ConeMap::integrate_detections(const std::vector<ConeDetection>& detections,
                                   const Pose2& pose, double stamp_weight) {
    for (const auto& det : detections) {
        const double lomeas = log_odds_of(det.confidence);
        const Vec2 world = body_to_world(det.position, pose.p, pose.psi);
        ensure_contains(world);
        const CellIndex c = world_to_cell(world);
        auto& ch = det.color == track::ConeColor::kRed ? red_ : blue_;
        for (int di = -1; di <= 1; ++di) {
            for (int dj = -1; dj <= 1; ++dj) {
                const double w = (di == 0 && dj == 0) ? 1.0 : stamp_weight;
                if (w == 0.0) continue;
                const CellIndex nc{c.i + di, c.j + dj};
                at(ch, nc) = update_cell(at(ch, nc), w * lomeas, s_max_);
            }
        }
    }
}

void ConeMap::integrate_uncolored(const std::vector<Vec2>& positions_body, const Pose2& pose,
                                  double confidence, double stamp_weight) {
    std::vector<ConeDetection> dets;
    dets.reserve(positions_body.size() * 2);
    for (const auto& p : positions_body) {
        dets.push_back({p, track::ConeColor::kRed, confidence});
        dets.push_back({p, track::ConeColor::kBlue, confidence});
    }
    integrate_detections(dets, pose, stamp_weight);
}

std::vector<ExtractedCone> ConeMap::extract_cones(double threshold) const {
    if (!(threshold > 0.0)) throw std::invalid_argument("extract_cones: threshold must be > 0");
    std::vector<ExtractedCone> cones;
    if (nx_ == 0) return cones;

    for (const track::ConeColor color : {track::ConeColor::kRed, track::ConeColor::kBlue}) {
        const auto& ch = color == track::ConeColor::kRed ? red_ : blue_;
        const auto& other = color == track::ConeColor::kRed ? blue_ : red_;

        // Cells over threshold where this channel dominates. A cell at or
        // over threshold in both channels with equal log-odds has no
        // resolvable colour and is claimed by neither.
        std::vector<char> mask(ch.size(), 0);
        for (std::size_t k = 0; k < ch.size(); ++k)
            mask[k] = ch[k] >= threshold && (other[k] < threshold || ch[k] > other[k]) ? 1 : 0;

        std::vector<char> seen(ch.size(), 0);
        std::vector<std::size_t> stack;
        for (std::size_t start = 0; start < ch.size(); ++start) {
            if (!mask[start] || seen[start]) continue;
            double weight_sum = 0.0, peak = 0.0;
            Vec2 centroid{0.0, 0.0};
            stack.assign(1, start);
            seen[start] = 1;
            while (!stack.empty()) {
                const std::size_t k = stack.back();
                stack.pop_back();
                const CellIndex c{static_cast<int>(k % nx_), static_cast<int>(k / nx_)};
                const double w = ch[k];
                weight_sum += w;
                peak = std::max(peak, w);
                centroid = centroid + cell_center(c) * w;
                for (int di = -1; di <= 1; ++di) {
                    for (int dj = -1; dj <= 1; ++dj) {
                        const CellIndex nc{c.i + di, c.j + dj};
                        if (!in_bounds(nc)) continue;
                        const std::size_t nk = static_cast<std::size_t>(nc.j) * nx_ + nc.i;
                        if (mask[nk] && !seen[nk]) {
                            seen[nk] = 1;
                            stack.push_back(nk);
                        }
                    }
                }
            }
            cones.push_back({centroid * (1.0 / weight_sum), color, peak});
        }
    }
    return cones;
}

void ConeMap::save_pgm(track::ConeColor channel, const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const auto& ch = channel == track::ConeColor::kRed ? red_ : blue_;
    out << "P2\n" << nx_ << " " << ny_ << "\n255\n";
    // Row 0 at the top corresponds to the largest y.
    for (int j = ny_ - 1; j >= 0; --j) {
        for (int i = 0; i < nx_; ++i) {
            const double s = nx_ > 0 ? ch[static_cast<std::size_t>(j) * nx_ + i] : 0.0;
            const int v = static_cast<int>(std::lround((s + s_max_) / (2.0 * s_max_) * 255.0));
            out << std::clamp(v, 0, 255) << (i + 1 == nx_ ? "" : " ");
        }
        out << "\n";
    }
}

}  // namespace fsd::gridmap
