#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace fsd::control {

// Dense convex QP:  min 1/2 x'Hx + g'x  s.t.  A x <= b.
struct QpProblem {
    Eigen::MatrixXd H;  // symmetric PD (a small ridge is the caller's job)
    Eigen::VectorXd g;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    int n_vars() const { return static_cast<int>(g.size()); }
    int n_cons() const { return static_cast<int>(b.size()); }
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;       // per constraint row, >= 0 for active rows
    QpStatus status{QpStatus::kOptimal};
    int iterations{0};
    double kkt_residual{0.0};
    std::vector<int> active_set;  // sorted row indices
};

struct QpWarmStart {
    Eigen::VectorXd x0;            // must satisfy A x0 <= b + feas_tol
    std::vector<int> working_set;  // rows to seed; pruned to those active at x0
};

// Primal active-set method. Requires a feasible start (the unconstrained
// case accepts any x0); a violated start returns kInfeasible without
// iterating. Deterministic: ties in blocking and dropping decisions break
// toward the lowest row index, so identical inputs give identical outputs.
QpResult solve_qp(const QpProblem& problem, const std::optional<QpWarmStart>& warm = std::nullopt);

// Objective value helper.
double qp_objective(const QpProblem& problem, const Eigen::VectorXd& x);

}  // namespace fsd::control
