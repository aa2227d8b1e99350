#include "fsd/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsd::control {

namespace {

constexpr double kFeasTol = 1e-7;
constexpr double kActiveTol = 1e-8;
constexpr double kLambdaTol = 1e-9;
constexpr double kStepTol = 1e-11;

// KKT solve for the equality-constrained subproblem on the working set:
//   [H  Aw'] [p     ]   [-(Hx + g)]
//   [Aw 0  ] [lambda] = [0        ]
// Returns false when the KKT matrix is singular (dependent working set).
bool solve_kkt(const QpProblem& qp, const Eigen::VectorXd& x, const std::vector<int>& w,
               Eigen::VectorXd* p, Eigen::VectorXd* lambda) {
    const int n = qp.n_vars();
    const int m = static_cast<int>(w.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = qp.H;
    for (int i = 0; i < m; ++i) {
        kkt.block(n + i, 0, 1, n) = qp.A.row(w[i]);
        kkt.block(0, n + i, n, 1) = qp.A.row(w[i]).transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
    rhs.head(n) = -(qp.H * x + qp.g);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    *p = sol.head(n);
    *lambda = sol.tail(m);
    return true;
}

}  // namespace

double qp_objective(const QpProblem& problem, const Eigen::VectorXd& x) {
    return 0.5 * x.dot(problem.H * x) + problem.g.dot(x);
}

QpResult solve_qp(const QpProblem& problem, const std::optional<QpWarmStart>& warm) {
    const int n = problem.n_vars();
    const int m = problem.n_cons();
    if (problem.H.rows() != n || problem.H.cols() != n)
        throw std::invalid_argument("solve_qp: Hessian shape mismatch");
    if (problem.A.rows() != m || (m > 0 && problem.A.cols() != n))
        throw std::invalid_argument("solve_qp: constraint shape mismatch");

    QpResult res;
    res.lambda = Eigen::VectorXd::Zero(m);

    Eigen::VectorXd x = warm ? warm->x0 : Eigen::VectorXd::Zero(n);
    if (m > 0) {
        const Eigen::VectorXd violation = problem.A * x - problem.b;
        if (violation.maxCoeff() > kFeasTol) {
            res.status = QpStatus::kInfeasible;
            res.x = x;
            return res;
        }
    }

    // Working set: seeded rows that are actually active at x.
    std::vector<int> w;
    if (warm) {
        for (int i : warm->working_set) {
            if (i < 0 || i >= m) continue;
            if (std::abs(problem.A.row(i).dot(x) - problem.b[i]) <= kActiveTol)
                w.push_back(i);
        }
        std::sort(w.begin(), w.end());
        w.erase(std::unique(w.begin(), w.end()), w.end());
        if (static_cast<int>(w.size()) > n) w.resize(n);
    }

    const int max_iter = std::min(400, 50 + 2 * (m + n));
    Eigen::VectorXd p, lambda_w;
    res.status = QpStatus::kMaxIter;  // until proven optimal

    for (int iter = 1; iter <= max_iter; ++iter) {
        res.iterations = iter;
        if (!solve_kkt(problem, x, w, &p, &lambda_w)) {
            // Dependent working set; drop the most recent row and retry.
            if (w.empty()) break;
            w.pop_back();
            continue;
        }

        if (p.norm() <= kStepTol) {
            // Stationary on the working set: check multipliers.
            int drop = -1;
            double most_negative = -kLambdaTol;
            for (int i = 0; i < static_cast<int>(w.size()); ++i) {
                if (lambda_w[i] < most_negative) {
                    most_negative = lambda_w[i];
                    drop = i;
                }
            }
            if (drop < 0) {
                res.status = QpStatus::kOptimal;
                for (int i = 0; i < static_cast<int>(w.size()); ++i)
                    res.lambda[w[i]] = lambda_w[i];
                break;
            }
            w.erase(w.begin() + drop);
            continue;
        }

        // Step toward the subproblem optimum, stopping at the first
        // blocking constraint outside the working set.
        double alpha = 1.0;
        int blocking = -1;
        for (int i = 0; i < m; ++i) {
            if (std::find(w.begin(), w.end(), i) != w.end()) continue;
            const double api = problem.A.row(i).dot(p);
            if (api <= kActiveTol) continue;
            const double gap = problem.b[i] - problem.A.row(i).dot(x);
            const double ratio = std::max(0.0, gap) / api;
            if (ratio < alpha - 1e-14) {
                alpha = ratio;
                blocking = i;
            }
        }
        x += alpha * p;
        if (blocking >= 0) {
            w.push_back(blocking);
            std::sort(w.begin(), w.end());
        }
    }

    res.x = x;
    std::sort(w.begin(), w.end());
    res.active_set = w;

    // KKT residual: stationarity with the recovered multipliers plus primal
    // feasibility.
    Eigen::VectorXd grad = problem.H * x + problem.g;
    for (int i = 0; i < static_cast<int>(w.size()); ++i) grad += res.lambda[w[i]] * problem.A.row(w[i]).transpose();
    double primal = 0.0;
    if (m > 0) primal = std::max(0.0, (problem.A * x - problem.b).maxCoeff());
    res.kkt_residual = std::max(grad.cwiseAbs().maxCoeff(), primal);
    return res;
}

}  // namespace fsd::control
