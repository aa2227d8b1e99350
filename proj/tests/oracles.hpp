// Independent reference implementations used only by tests. Everything here
// is deliberately brute force so it cannot share a failure mode with the
// library code it checks.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "fsd/geometry.hpp"

namespace oracles {

// Central finite-difference gradient of a scalar function.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central finite-difference Jacobian of a vector function.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    for (int i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
}

// O(n^2) union-find connected components of the <= eps graph.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

// Partition as a canonical set of sorted index groups (size >= min_pts).
inline std::set<std::vector<std::size_t>> brute_force_clusters(
    const std::vector<fsd::Vec2>& points, double eps, int min_pts) {
    UnionFind uf(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if ((points[i] - points[j]).norm() <= eps) uf.unite(i, j);
    std::vector<std::vector<std::size_t>> groups(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) groups[uf.find(i)].push_back(i);
    std::set<std::vector<std::size_t>> out;
    for (auto& g : groups)
        if (static_cast<int>(g.size()) >= min_pts) {
            std::sort(g.begin(), g.end());
            out.insert(g);
        }
    return out;
}

// Dense projection onto a sampled closed curve.
struct BruteProjection {
    double s;
    double distance;
};
inline BruteProjection brute_project(const std::function<fsd::Vec2(double)>& curve, double total,
                                     const fsd::Vec2& p, int samples = 10000) {
    BruteProjection best{0.0, std::numeric_limits<double>::infinity()};
    for (int i = 0; i < samples; ++i) {
        const double s = total * i / samples;
        const double d = (curve(s) - p).norm();
        if (d < best.distance) best = {s, d};
    }
    return best;
}

// Direct Bayes posterior for a cell observation history per the grid-map
// model: prior odds 1, each observation multiplies the odds by p/(1-p).
inline double direct_bayes_log_odds(const std::vector<double>& confidences) {
    double p_occ = 0.5, p_free = 0.5;
    for (double c : confidences) {
        p_occ *= c;
        p_free *= (1.0 - c);
        // Normalize to dodge underflow; the odds ratio is untouched.
        const double z = p_occ + p_free;
        p_occ /= z;
        p_free /= z;
    }
    return std::log(p_occ / p_free);
}

// Global optimum of a strictly convex QP (min 1/2 x'Hx + g'x, Ax <= b) by
// exhaustive enumeration of active sets.
inline double enumerate_qp_optimum(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                   const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                   Eigen::VectorXd* argmin = nullptr) {
    const int n = static_cast<int>(g.size());
    const int m = static_cast<int>(b.size());
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;

    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> active;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) active.push_back(i);
        if (static_cast<int>(active.size()) > n) continue;

        const int k = static_cast<int>(active.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
        kkt.topLeftCorner(n, n) = H;
        for (int i = 0; i < k; ++i) {
            kkt.block(n + i, 0, 1, n) = A.row(active[i]);
            kkt.block(0, n + i, n, 1) = A.row(active[i]).transpose();
        }
        Eigen::VectorXd rhs(n + k);
        rhs.head(n) = -g;
        for (int i = 0; i < k; ++i) rhs[n + i] = b[active[i]];

        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd x = sol.head(n);
        const Eigen::VectorXd lambda = sol.tail(k);

        if (lambda.size() > 0 && lambda.minCoeff() < -1e-9) continue;  // not dual feasible
        if (m > 0 && (A * x - b).maxCoeff() > 1e-9) continue;          // not primal feasible

        const double obj = 0.5 * x.dot(H * x) + g.dot(x);
        if (obj < best) {
            best = obj;
            best_x = x;
        }
    }
    if (argmin && best_x.size() > 0) *argmin = best_x;
    return best;
}

}  // namespace oracles
