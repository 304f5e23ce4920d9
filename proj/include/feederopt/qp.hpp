#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace feederopt {

/// Coordinate-list entry of a sparse matrix.
struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Convex quadratic program
///     minimize   1/2 x'Hx + f'x
///     subject to l <= Ax <= u
/// H is symmetric positive semidefinite and supplied as its upper triangle
/// (row <= col); duplicate coordinates are summed. Infinite bounds are
/// allowed in l and u.
struct QuadraticProgram {
    int num_vars = 0;
    int num_constraints = 0;
    std::vector<Triplet> H;
    std::vector<Triplet> A;
    std::vector<double> f;
    std::vector<double> l;
    std::vector<double> u;

    void validate() const;  // throws std::invalid_argument on any mismatch
};

enum class QPStatus { Solved, MaxIter, Infeasible };

struct QPSolution {
    std::vector<double> x;
    std::vector<double> y;  // constraint multipliers
    QPStatus status = QPStatus::MaxIter;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool polished = false;
    /// Nonzero only when status == Infeasible: a multiplier direction dy with
    /// A'dy ~ 0 and u'[dy]+ + l'[dy]- < 0 certifying primal infeasibility.
    std::vector<double> infeasibility_certificate;
};

/// Operator-splitting (ADMM) settings. The defaults suit mildly
/// ill-conditioned network QPs; rho adapts every adaptive_rho_interval
/// iterations when the primal/dual residual ratio exceeds
/// adaptive_rho_threshold.
struct SolverSettings {
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 50000;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    int scaling_iters = 10;
    int check_interval = 25;
    int adaptive_rho_interval = 50;
    double adaptive_rho_threshold = 10.0;
    bool polish = true;
    double eps_prim_inf = 1e-7;
};

/// Solve the QP. Termination residuals are measured on the unscaled problem:
///     primal: ||Ax - z||_inf      with z the projected constraint iterate
///     dual:   ||Hx + f + A'y||_inf
/// A Solved status certifies both within eps_abs plus the relative terms.
QPSolution solve_qp(const QuadraticProgram& qp, const SolverSettings& settings = {});

/// KKT residual pair for a candidate primal/dual point:
///     ( ||clip(Ax, l, u) - Ax||_inf , ||Hx + f + A'y||_inf ).
std::pair<double, double> check_kkt(const QuadraticProgram& qp, const std::vector<double>& x,
                                    const std::vector<double>& y);

/// Plain-text sparse dump of (H, f, A, l, u) for cross-checking against
/// external solvers: one `name row col value` triplet per line.
void dump_qp(const QuadraticProgram& qp, const std::string& path);

}  // namespace feederopt
