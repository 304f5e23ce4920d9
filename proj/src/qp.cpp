#include "feederopt/qp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace feederopt {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

SpMat build_symmetric_h(const QuadraticProgram& qp) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(qp.H.size() * 2);
    for (const Triplet& t : qp.H) {
        trips.emplace_back(t.row, t.col, t.value);
        if (t.row != t.col) trips.emplace_back(t.col, t.row, t.value);
    }
    SpMat H(qp.num_vars, qp.num_vars);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
}

SpMat build_a(const QuadraticProgram& qp) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(qp.A.size());
    for (const Triplet& t : qp.A) trips.emplace_back(t.row, t.col, t.value);
    SpMat A(qp.num_constraints, qp.num_vars);
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
}

Vec col_inf_norms(const SpMat& m) {
    Vec norms = Vec::Zero(m.cols());
    for (int j = 0; j < m.outerSize(); ++j) {
        for (SpMat::InnerIterator it(m, j); it; ++it) {
            norms[j] = std::max(norms[j], std::abs(it.value()));
        }
    }
    return norms;
}

Vec row_inf_norms(const SpMat& m) {
    Vec norms = Vec::Zero(m.rows());
    for (int j = 0; j < m.outerSize(); ++j) {
        for (SpMat::InnerIterator it(m, j); it; ++it) {
            norms[it.row()] = std::max(norms[it.row()], std::abs(it.value()));
        }
    }
    return norms;
}

struct Scaling {
    Vec D;      // variable scaling, x = D * x_scaled
    Vec E;      // constraint scaling
    double c = 1.0;  // cost scaling
};

/// Modified Ruiz equilibration of the stacked [H A'; A 0] system plus cost
/// normalization, applied in place to the scaled problem data.
Scaling ruiz_equilibrate(SpMat& H, Vec& f, SpMat& A, Vec& l, Vec& u, int iters) {
    const int n = static_cast<int>(H.rows());
    const int m = static_cast<int>(A.rows());
    Scaling s;
    s.D = Vec::Ones(n);
    s.E = Vec::Ones(m);

    for (int k = 0; k < iters; ++k) {
        Vec dh = col_inf_norms(H);
        Vec da = m > 0 ? col_inf_norms(A) : Vec::Zero(n);
        Vec delta_d(n);
        for (int j = 0; j < n; ++j) {
            const double norm = std::max(dh[j], da[j]);
            delta_d[j] = norm > 0.0 ? 1.0 / std::sqrt(norm) : 1.0;
        }
        Vec delta_e = Vec::Ones(m);
        if (m > 0) {
            Vec ra = row_inf_norms(A);
            for (int i = 0; i < m; ++i) delta_e[i] = ra[i] > 0.0 ? 1.0 / std::sqrt(ra[i]) : 1.0;
        }

        H = delta_d.asDiagonal() * H * delta_d.asDiagonal();
        if (m > 0) A = delta_e.asDiagonal() * A * delta_d.asDiagonal();
        f = delta_d.cwiseProduct(f);
        for (int i = 0; i < m; ++i) {
            if (std::isfinite(l[i])) l[i] *= delta_e[i];
            if (std::isfinite(u[i])) u[i] *= delta_e[i];
        }
        s.D = s.D.cwiseProduct(delta_d);
        s.E = s.E.cwiseProduct(delta_e);

        // Cost normalization.
        const Vec hn = col_inf_norms(H);
        const double h_mean = n > 0 ? hn.sum() / n : 0.0;
        const double denom = std::max(h_mean, inf_norm(f));
        const double gamma = denom > 0.0 ? 1.0 / denom : 1.0;
        H *= gamma;
        f *= gamma;
        s.c *= gamma;
    }
    return s;
}

struct KktSystem {
    SpMat K;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    bool analyzed = false;

    bool factorize(const SpMat& H, const SpMat& A, double sigma, const Vec& rho) {
        const int n = static_cast<int>(H.rows());
        const int m = static_cast<int>(A.rows());
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(H.nonZeros() + 2 * A.nonZeros() + n + m);
        for (int j = 0; j < H.outerSize(); ++j) {
            for (SpMat::InnerIterator it(H, j); it; ++it) {
                trips.emplace_back(static_cast<int>(it.row()), j, it.value());
            }
        }
        for (int j = 0; j < n; ++j) trips.emplace_back(j, j, sigma);
        for (int j = 0; j < A.outerSize(); ++j) {
            for (SpMat::InnerIterator it(A, j); it; ++it) {
                trips.emplace_back(n + static_cast<int>(it.row()), j, it.value());
                trips.emplace_back(j, n + static_cast<int>(it.row()), it.value());
            }
        }
        for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho[i]);
        K.resize(n + m, n + m);
        K.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
            ldlt.analyzePattern(K);
            analyzed = true;
        }
        ldlt.factorize(K);
        return ldlt.info() == Eigen::Success;
    }
};

struct Residuals {
    double primal = 0.0;        // ||Ax - z||_inf
    double dual = 0.0;          // ||Hx + f + A'y||_inf
    double primal_scale = 0.0;  // max(||Ax||, ||z||)
    double dual_scale = 0.0;    // max(||Hx||, ||A'y||, ||f||)
};

Residuals unscaled_residuals(const SpMat& H, const Vec& f, const SpMat& A, const Vec& x,
                             const Vec& z, const Vec& y) {
    Residuals r;
    const Vec Hx = H * x;
    const Vec Ax = A * x;
    const Vec Aty = A.transpose() * y;
    r.primal = inf_norm(Ax - z);
    r.dual = inf_norm(Hx + f + Aty);
    r.primal_scale = std::max(inf_norm(Ax), inf_norm(z));
    r.dual_scale = std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(f)});
    return r;
}

/// Primal infeasibility certificate test on a multiplier direction dy.
bool certifies_infeasibility(const SpMat& A, const Vec& l, const Vec& u, const Vec& dy,
                             double eps) {
    const double nrm = inf_norm(dy);
    if (nrm < 1e-14) return false;
    if (inf_norm(Vec(A.transpose() * dy)) > eps * nrm) return false;
    double support = 0.0;
    for (int i = 0; i < dy.size(); ++i) {
        const double pos = std::max(dy[i], 0.0);
        const double neg = std::min(dy[i], 0.0);
        if (pos > eps * nrm) {
            if (!std::isfinite(u[i])) return false;  // unbounded above, no certificate
            support += u[i] * pos;
        }
        if (neg < -eps * nrm) {
            if (!std::isfinite(l[i])) return false;
            support += l[i] * neg;
        }
    }
    return support <= -eps * nrm;
}

struct PolishOutcome {
    bool accepted = false;
    Vec x, y;
    Residuals res;
};

/// Solve the equality-constrained KKT system of the detected active set with
/// light regularization and iterative refinement against the unregularized
/// system; accept only if both residuals improve.
PolishOutcome polish_solution(const SpMat& H, const Vec& f, const SpMat& A, const Vec& l,
                              const Vec& u, const Vec& y, const Residuals& current) {
    PolishOutcome out;
    const int n = static_cast<int>(H.rows());
    const int m = static_cast<int>(A.rows());

    const double y_tol = 1e-10 * std::max(1.0, inf_norm(y));
    std::vector<int> active;
    Vec b_act_all(m);
    for (int i = 0; i < m; ++i) {
        if (y[i] < -y_tol && std::isfinite(l[i])) {
            b_act_all[i] = l[i];
            active.push_back(i);
        } else if (y[i] > y_tol && std::isfinite(u[i])) {
            b_act_all[i] = u[i];
            active.push_back(i);
        }
    }
    const int na = static_cast<int>(active.size());

    // Active-row slice of A.
    std::vector<Eigen::Triplet<double>> atrips;
    std::vector<int> row_map(m, -1);
    for (int k = 0; k < na; ++k) row_map[active[k]] = k;
    for (int j = 0; j < A.outerSize(); ++j) {
        for (SpMat::InnerIterator it(A, j); it; ++it) {
            const int k = row_map[it.row()];
            if (k >= 0) atrips.emplace_back(k, j, it.value());
        }
    }
    SpMat A_act(na, n);
    A_act.setFromTriplets(atrips.begin(), atrips.end());
    Vec b_act(na);
    for (int k = 0; k < na; ++k) b_act[k] = b_act_all[active[k]];

    const double delta = 1e-9;
    std::vector<Eigen::Triplet<double>> ktrips;
    ktrips.reserve(H.nonZeros() + 2 * A_act.nonZeros() + n + na);
    for (int j = 0; j < H.outerSize(); ++j) {
        for (SpMat::InnerIterator it(H, j); it; ++it) {
            ktrips.emplace_back(static_cast<int>(it.row()), j, it.value());
        }
    }
    for (int j = 0; j < n; ++j) ktrips.emplace_back(j, j, delta);
    for (int j = 0; j < A_act.outerSize(); ++j) {
        for (SpMat::InnerIterator it(A_act, j); it; ++it) {
            ktrips.emplace_back(n + static_cast<int>(it.row()), j, it.value());
            ktrips.emplace_back(j, n + static_cast<int>(it.row()), it.value());
        }
    }
    for (int k = 0; k < na; ++k) ktrips.emplace_back(n + k, n + k, -delta);
    SpMat K(n + na, n + na);
    K.setFromTriplets(ktrips.begin(), ktrips.end());

    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) return out;

    Vec rhs(n + na);
    rhs.head(n) = -f;
    rhs.tail(na) = b_act;
    Vec sol = ldlt.solve(rhs);
    // Refine against the unregularized KKT system.
    for (int pass = 0; pass < 3; ++pass) {
        Vec resid(n + na);
        resid.head(n) = -f - (H * sol.head(n) + A_act.transpose() * sol.tail(na));
        resid.tail(na) = b_act - A_act * sol.head(n);
        sol += ldlt.solve(resid);
    }
    if (!sol.allFinite()) return out;

    Vec x_pol = sol.head(n);
    Vec y_pol = Vec::Zero(m);
    for (int k = 0; k < na; ++k) y_pol[active[k]] = sol[n + k];

    Vec Ax = A * x_pol;
    Vec z_pol = Ax.cwiseMax(l).cwiseMin(u);
    Residuals res = unscaled_residuals(H, f, A, x_pol, z_pol, y_pol);
    if (res.primal <= current.primal && res.dual <= current.dual) {
        out.accepted = true;
        out.x = std::move(x_pol);
        out.y = std::move(y_pol);
        out.res = res;
    }
    return out;
}

double objective_value(const SpMat& H, const Vec& f, const Vec& x) {
    return 0.5 * x.dot(H * x) + f.dot(x);
}

}  // namespace

void QuadraticProgram::validate() const {
    if (num_vars < 0 || num_constraints < 0) {
        throw std::invalid_argument("QuadraticProgram: negative dimensions");
    }
    if (static_cast<int>(f.size()) != num_vars) {
        throw std::invalid_argument("QuadraticProgram: f size mismatch");
    }
    if (static_cast<int>(l.size()) != num_constraints ||
        static_cast<int>(u.size()) != num_constraints) {
        throw std::invalid_argument("QuadraticProgram: bound size mismatch");
    }
    for (const Triplet& t : H) {
        if (t.row < 0 || t.col < 0 || t.row >= num_vars || t.col >= num_vars) {
            throw std::invalid_argument("QuadraticProgram: H index out of range");
        }
        if (t.row > t.col) {
            throw std::invalid_argument("QuadraticProgram: H must be given as its upper triangle");
        }
        if (!std::isfinite(t.value)) throw std::invalid_argument("QuadraticProgram: H value not finite");
    }
    for (const Triplet& t : A) {
        if (t.row < 0 || t.col < 0 || t.row >= num_constraints || t.col >= num_vars) {
            throw std::invalid_argument("QuadraticProgram: A index out of range");
        }
        if (!std::isfinite(t.value)) throw std::invalid_argument("QuadraticProgram: A value not finite");
    }
    for (double v : f) {
        if (!std::isfinite(v)) throw std::invalid_argument("QuadraticProgram: f value not finite");
    }
    for (int i = 0; i < num_constraints; ++i) {
        if (std::isnan(l[i]) || std::isnan(u[i])) {
            throw std::invalid_argument("QuadraticProgram: NaN bound");
        }
        if (l[i] > u[i]) throw std::invalid_argument("QuadraticProgram: l > u");
    }
}

QPSolution solve_qp(const QuadraticProgram& qp, const SolverSettings& settings) {
    qp.validate();
    const int n = qp.num_vars;
    const int m = qp.num_constraints;

    QPSolution sol;
    if (n == 0) {
        // Degenerate program with no decisions: feasibility is a constant check.
        sol.x.clear();
        sol.y.assign(m, 0.0);
        bool feasible = true;
        for (int i = 0; i < m; ++i) {
            if (qp.l[i] > 0.0 || qp.u[i] < 0.0) feasible = false;
        }
        sol.status = feasible ? QPStatus::Solved : QPStatus::Infeasible;
        if (!feasible) sol.infeasibility_certificate.assign(m, 0.0);
        return sol;
    }

    SpMat H0 = build_symmetric_h(qp);
    SpMat A0 = build_a(qp);
    Vec f0 = Eigen::Map<const Vec>(qp.f.data(), n);
    Vec l0 = Eigen::Map<const Vec>(qp.l.data(), m);
    Vec u0 = Eigen::Map<const Vec>(qp.u.data(), m);

    // Scaled working copies.
    SpMat H = H0;
    SpMat A = A0;
    Vec f = f0, l = l0, u = u0;
    Scaling scal = ruiz_equilibrate(H, f, A, l, u, settings.scaling_iters);

    Vec rho(m);
    for (int i = 0; i < m; ++i) {
        const bool eq = std::isfinite(l[i]) && std::isfinite(u[i]) && u[i] - l[i] < 1e-14;
        rho[i] = eq ? settings.rho * 1e3 : settings.rho;
    }

    KktSystem kkt;
    if (!kkt.factorize(H, A, settings.sigma, rho)) {
        sol.status = QPStatus::MaxIter;  // numerical breakdown
        sol.x.assign(n, 0.0);
        sol.y.assign(m, 0.0);
        return sol;
    }

    Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
    Vec x_u = Vec::Zero(n), z_u = Vec::Zero(m), y_u = Vec::Zero(m);
    Vec rhs(n + m), xz(n + m);

    double eps_abs = settings.eps_abs;
    double eps_rel = settings.eps_rel;
    bool tightened = false;
    bool converged = false;
    Residuals res;
    int iter = 0;

    auto to_unscaled = [&]() {
        x_u = scal.D.cwiseProduct(x);
        for (int i = 0; i < m; ++i) z_u[i] = z[i] / scal.E[i];
        y_u = scal.E.cwiseProduct(y) / scal.c;
    };

    while (iter < settings.max_iter) {
        ++iter;
        rhs.head(n) = settings.sigma * x - f;
        for (int i = 0; i < m; ++i) rhs[n + i] = z[i] - y[i] / rho[i];
        xz = kkt.ldlt.solve(rhs);

        const auto x_tilde = xz.head(n);
        const auto nu = xz.tail(m);
        Vec z_tilde = z + (nu - y).cwiseQuotient(rho);

        const double a = settings.alpha;
        Vec x_next = a * x_tilde + (1.0 - a) * x;
        Vec z_relaxed = a * z_tilde + (1.0 - a) * z;
        Vec z_next = (z_relaxed + y.cwiseQuotient(rho)).cwiseMax(l).cwiseMin(u);
        Vec y_next = y + rho.cwiseProduct(z_relaxed - z_next);

        Vec dy = y_next - y;
        x = std::move(x_next);
        z = std::move(z_next);
        y = std::move(y_next);

        if (iter % settings.check_interval != 0 && iter != settings.max_iter) continue;

        to_unscaled();
        res = unscaled_residuals(H0, f0, A0, x_u, z_u, y_u);
        const double eps_p = eps_abs + eps_rel * res.primal_scale;
        const double eps_d = eps_abs + eps_rel * res.dual_scale;
        if (res.primal <= eps_p && res.dual <= eps_d) {
            converged = true;
            if (!tightened && settings.polish) {
                PolishOutcome pol = polish_solution(H0, f0, A0, l0, u0, y_u, res);
                if (pol.accepted) {
                    x_u = pol.x;
                    y_u = pol.y;
                    z_u = (A0 * x_u).cwiseMax(l0).cwiseMin(u0);
                    res = pol.res;
                    sol.polished = true;
                    break;
                }
                // Polish rejected: push the iteration two decades further so
                // the reported residuals keep a margin over the tolerance.
                tightened = true;
                eps_abs = std::max(settings.eps_abs / 100.0, 1e-12);
                eps_rel = std::max(settings.eps_rel / 100.0, 1e-12);
                converged = false;
                continue;
            }
            break;
        }

        if (m > 0 && certifies_infeasibility(A0, l0, u0,
                                             Vec(scal.E.cwiseProduct(dy) / scal.c),
                                             settings.eps_prim_inf)) {
            Vec cert = scal.E.cwiseProduct(dy) / scal.c;
            sol.status = QPStatus::Infeasible;
            sol.x.assign(x_u.data(), x_u.data() + n);
            sol.y.assign(y_u.data(), y_u.data() + m);
            sol.infeasibility_certificate.assign(cert.data(), cert.data() + m);
            sol.iterations = iter;
            sol.primal_residual = res.primal;
            sol.dual_residual = res.dual;
            sol.objective = objective_value(H0, f0, x_u);
            return sol;
        }

        if (iter % settings.adaptive_rho_interval == 0) {
            const double rp_n = res.primal / std::max(res.primal_scale, 1e-10);
            const double rd_n = res.dual / std::max(res.dual_scale, 1e-10);
            const double ratio = rp_n / std::max(rd_n, 1e-16);
            if (ratio > settings.adaptive_rho_threshold ||
                ratio < 1.0 / settings.adaptive_rho_threshold) {
                const double scale = std::sqrt(ratio);
                for (int i = 0; i < m; ++i) {
                    rho[i] = std::clamp(rho[i] * scale, 1e-6, 1e6);
                }
                if (!kkt.factorize(H, A, settings.sigma, rho)) break;
            }
        }
    }

    if (converged && tightened && settings.polish) {
        PolishOutcome pol = polish_solution(H0, f0, A0, l0, u0, y_u, res);
        if (pol.accepted) {
            x_u = pol.x;
            y_u = pol.y;
            res = pol.res;
            sol.polished = true;
        }
    }
    if (!converged) {
        to_unscaled();
        res = unscaled_residuals(H0, f0, A0, x_u, z_u, y_u);
        // The tightened target is best-effort; the caller's tolerance decides.
        converged = res.primal <= settings.eps_abs + settings.eps_rel * res.primal_scale &&
                    res.dual <= settings.eps_abs + settings.eps_rel * res.dual_scale;
    }

    // Report the constraint violation of the returned point as the primal
    // residual, matching check_kkt.
    Vec Ax = A0 * x_u;
    const double violation = m > 0 ? inf_norm(Ax - Ax.cwiseMax(l0).cwiseMin(u0)) : 0.0;

    sol.status = converged ? QPStatus::Solved : QPStatus::MaxIter;
    sol.x.assign(x_u.data(), x_u.data() + n);
    sol.y.assign(y_u.data(), y_u.data() + m);
    sol.primal_residual = violation;
    sol.dual_residual = res.dual;
    sol.objective = objective_value(H0, f0, x_u);
    sol.iterations = iter;
    return sol;
}

std::pair<double, double> check_kkt(const QuadraticProgram& qp, const std::vector<double>& x,
                                    const std::vector<double>& y) {
    if (static_cast<int>(x.size()) != qp.num_vars ||
        static_cast<int>(y.size()) != qp.num_constraints) {
        throw std::invalid_argument("check_kkt: dimension mismatch");
    }
    SpMat H = build_symmetric_h(qp);
    SpMat A = build_a(qp);
    Vec xv = Eigen::Map<const Vec>(x.data(), qp.num_vars);
    Vec yv = Eigen::Map<const Vec>(y.data(), qp.num_constraints);
    Vec f = Eigen::Map<const Vec>(qp.f.data(), qp.num_vars);
    Vec l = Eigen::Map<const Vec>(qp.l.data(), qp.num_constraints);
    Vec u = Eigen::Map<const Vec>(qp.u.data(), qp.num_constraints);

    Vec Ax = A * xv;
    const double primal = qp.num_constraints > 0
                              ? inf_norm(Ax.cwiseMax(l).cwiseMin(u) - Ax)
                              : 0.0;
    const double dual = inf_norm(H * xv + f + A.transpose() * yv);
    return {primal, dual};
}

void dump_qp(const QuadraticProgram& qp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write QP dump: " + path);
    out.precision(17);
    out << "# vars " << qp.num_vars << " constraints " << qp.num_constraints << '\n';
    for (const Triplet& t : qp.H) out << "H " << t.row << ' ' << t.col << ' ' << t.value << '\n';
    for (int j = 0; j < qp.num_vars; ++j) out << "f " << j << " 0 " << qp.f[j] << '\n';
    for (const Triplet& t : qp.A) out << "A " << t.row << ' ' << t.col << ' ' << t.value << '\n';
    for (int i = 0; i < qp.num_constraints; ++i) {
        out << "l " << i << " 0 " << qp.l[i] << '\n';
        out << "u " << i << " 0 " << qp.u[i] << '\n';
    }
}

}  // namespace feederopt
