#pragma once

#include <sahdl/core.hpp>

#include <optional>
#include <sstream>

namespace sahdl {

/// Proximal operator of t*|.|, applied entrywise: max(v - t, 0) + min(v + t, 0).
inline double soft_threshold(double v, double t) {
    return std::max(v - t, 0.0) + std::min(v + t, 0.0);
}

template <class Derived>
Vector soft_threshold(const Eigen::MatrixBase<Derived>& v, double t) {
    if (t < 0) throw ParameterError("soft_threshold: negative threshold");
    return v.unaryExpr([t](double x) { return soft_threshold(x, t); });
}

struct AdmmParams {
    double epsilon = 1.0 / 64.0;  ///< l1 weight of the attention lasso
    double rho = 1.0;             ///< augmented-Lagrangian penalty
    std::optional<double> theta;  ///< dual step; unset means theta = rho
    int max_iter = 200;
    double tol = 1e-6;

    double dual_step() const { return theta.value_or(rho); }

    void validate() const {
        if (!(epsilon > 0)) throw ParameterError("ADMM epsilon must be positive");
        if (!(rho > 0)) throw ParameterError("ADMM rho must be positive");
        if (!(dual_step() > 0)) throw ParameterError("ADMM theta must be positive");
        if (max_iter < 1) throw ParameterError("ADMM max_iter must be at least 1");
        if (!(tol > 0)) throw ParameterError("ADMM tol must be positive");
    }
};

/// Reconstruct `center` from the columns of `neighbors` under an l1 penalty.
struct AttentionProblem {
    Vector center;     ///< x, length dim
    Matrix neighbors;  ///< P, dim x N_sa
    double epsilon = 1.0 / 64.0;
};

struct AttentionSolution {
    Vector z;  ///< smooth-block iterate
    Vector q;  ///< sparse iterate; the returned attention weights
    Vector m;  ///< scaled multiplier
    int iterations = 0;
    bool converged = false;
    double objective = 0;  ///< ||x - P q||^2 + 2 eps ||q||_1
    std::vector<double> objective_trace;  ///< objective of each iterate q, one entry per iteration
};

/// ||x - P w||^2 + 2 eps ||w||_1
template <class DerivedP, class DerivedX, class DerivedW>
double attention_objective(const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedX>& x,
                           const Eigen::MatrixBase<DerivedW>& w, double epsilon) {
    return (x - P * w).squaredNorm() + 2.0 * epsilon * w.template lpNorm<1>();
}

/// ADMM for  min_z ||x - P z||^2 + 2 eps ||z||_1  split as z = q:
///
///   z <- (P'P + rho I)^{-1} (P'x + rho q - m)
///   q <- soft_threshold(z + m / rho, eps / rho)
///   m <- m + theta (z - q)
///
/// started from z = q = m = 0. Stops once both the primal residual ||z - q||_inf
/// and the dual residual rho ||q - q_prev||_inf are within tol. If max_iter runs
/// out first, the lowest-objective q seen is returned with converged = false.
template <class DerivedP, class DerivedX>
AttentionSolution solve_lasso_admm(const Eigen::MatrixBase<DerivedP>& P, const Eigen::MatrixBase<DerivedX>& x,
                                   double epsilon, const AdmmParams& params) {
    params.validate();
    if (!(epsilon > 0)) throw ParameterError("attention epsilon must be positive");
    const Index n = P.cols();
    if (n < 1) throw ParameterError("attention problem needs at least one neighbor column");
    if (P.rows() != x.rows()) throw ParameterError("attention problem: P and x have different dimension");
    if (!P.allFinite() || !x.allFinite()) throw InputError("attention problem has non-finite entries");

    const double rho = params.rho;
    const double theta = params.dual_step();
    const double threshold = epsilon / rho;

    // rho is fixed, so one factorization serves every iteration.
    const Matrix gram = P.transpose() * P;
    const Eigen::LLT<Matrix> factor(gram + rho * Matrix::Identity(n, n));
    const Vector ptx = P.transpose() * x;

    AttentionSolution sol;
    sol.z = Vector::Zero(n);
    sol.q = Vector::Zero(n);
    sol.m = Vector::Zero(n);

    Vector best_q = sol.q;
    double best_obj = attention_objective(P, x, sol.q, epsilon);
    Vector q_prev(n);

    for (int it = 1; it <= params.max_iter; ++it) {
        q_prev = sol.q;
        sol.z = factor.solve(ptx + rho * sol.q - sol.m);
        sol.q = soft_threshold(sol.z + sol.m / rho, threshold);
        sol.m += theta * (sol.z - sol.q);
        sol.iterations = it;

        if (!sol.z.allFinite() || !sol.m.allFinite()) {
            std::ostringstream os;
            os << "ADMM iterate became non-finite at iteration " << it << " (rho=" << rho << ", eps=" << epsilon
               << ", |P|_F=" << P.norm() << ", |x|=" << x.norm() << ")";
            throw NumericalError(os.str());
        }

        const double obj = attention_objective(P, x, sol.q, epsilon);
        sol.objective_trace.push_back(obj);
        if (obj < best_obj) {
            best_obj = obj;
            best_q = sol.q;
        }

        const double primal = (sol.z - sol.q).template lpNorm<Eigen::Infinity>();
        const double dual = rho * (sol.q - q_prev).template lpNorm<Eigen::Infinity>();
        if (primal <= params.tol && dual <= params.tol) {
            sol.converged = true;
            break;
        }
    }

    if (!sol.converged) sol.q = best_q;
    sol.objective = attention_objective(P, x, sol.q, epsilon);
    return sol;
}

inline AttentionSolution solve_attention(const AttentionProblem& prob, const AdmmParams& params) {
    return solve_lasso_admm(prob.neighbors, prob.center, prob.epsilon, params);
}

}  // namespace sahdl
