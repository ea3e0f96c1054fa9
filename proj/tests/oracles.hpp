#pragma once

// Reference computations for the tests. Everything here is written from the
// defining formulas with plain loops and deliberately shares no code with the
// library beyond the Matrix/Vector aliases.

#include <sahdl/core.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using sahdl::Index;
using sahdl::Matrix;
using sahdl::Vector;

inline double soft(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

/// ||x - P z||^2 + 2 eps ||z||_1, accumulated elementwise.
inline double lasso_objective(const Matrix& P, const Vector& x, const Vector& z, double eps) {
    double r2 = 0;
    for (Index i = 0; i < P.rows(); ++i) {
        double r = x(i);
        for (Index j = 0; j < P.cols(); ++j) r -= P(i, j) * z(j);
        r2 += r * r;
    }
    double l1 = 0;
    for (Index j = 0; j < z.size(); ++j) l1 += std::abs(z(j));
    return r2 + 2 * eps * l1;
}

/// Cyclic coordinate descent on ||x - P z||^2 + 2 eps ||z||_1 with an explicit residual.
inline Vector cd_lasso(const Matrix& P, const Vector& x, double eps, double tol = 1e-10, int max_sweeps = 200000) {
    const Index n = P.cols();
    Vector z = Vector::Zero(n);
    Vector resid = x;
    for (int s = 0; s < max_sweeps; ++s) {
        double max_change = 0;
        for (Index j = 0; j < n; ++j) {
            double col2 = 0, rho = 0;
            for (Index i = 0; i < P.rows(); ++i) {
                col2 += P(i, j) * P(i, j);
                rho += P(i, j) * (resid(i) + P(i, j) * z(j));
            }
            const double znew = col2 > 0 ? soft(rho, eps) / col2 : 0.0;
            const double d = znew - z(j);
            if (d != 0)
                for (Index i = 0; i < P.rows(); ++i) resid(i) -= P(i, j) * d;
            z(j) = znew;
            max_change = std::max(max_change, std::abs(d));
        }
        if (max_change < tol) break;
    }
    return z;
}

/// Brute-force kNN: full distance table, stable sort on (distance, index).
inline std::vector<std::vector<Index>> knn(const Matrix& X, Index k) {
    const Index n = X.cols();
    std::vector<std::vector<Index>> out;
    for (Index c = 0; c < n; ++c) {
        std::vector<std::pair<double, Index>> all;
        for (Index j = 0; j < n; ++j) {
            if (j == c) continue;
            double d2 = 0;
            for (Index i = 0; i < X.rows(); ++i) d2 += (X(i, c) - X(i, j)) * (X(i, c) - X(i, j));
            all.emplace_back(std::sqrt(d2), j);
        }
        std::stable_sort(all.begin(), all.end(), [](auto a, auto b) {
            return a.first < b.first || (a.first == b.first && a.second < b.second);
        });
        std::vector<Index> idx;
        for (Index i = 0; i < k; ++i) idx.push_back(all[static_cast<std::size_t>(i)].second);
        out.push_back(idx);
    }
    return out;
}

/// Normalized graph Laplacian I - D^-1/2 A D^-1/2 of an edge list (multi-edges add up).
inline Matrix graph_laplacian(Index n, const std::vector<std::pair<Index, Index>>& edges) {
    Matrix A = Matrix::Zero(n, n);
    for (auto [u, v] : edges) {
        A(u, v) += 1;
        A(v, u) += 1;
    }
    Vector deg = A.rowwise().sum();
    Matrix L = Matrix::Identity(n, n);
    for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < n; ++v) L(u, v) -= A(u, v) / std::sqrt(deg(u) * deg(v));
    return L;
}

/// 1/2 sum_c sum_e sum_{u,v} W(e) H(u,e) H(v,e) / delta(e) (S(c,u)/sqrt(d(u)) - S(c,v)/sqrt(d(v)))^2
inline double hypergraph_double_sum(const Matrix& H, const Vector& W, const Matrix& S) {
    const Index nv = H.rows(), ne = H.cols();
    Vector edge_deg = Vector::Zero(ne), vert_deg = Vector::Zero(nv);
    for (Index e = 0; e < ne; ++e)
        for (Index v = 0; v < nv; ++v) edge_deg(e) += H(v, e);
    for (Index v = 0; v < nv; ++v)
        for (Index e = 0; e < ne; ++e) vert_deg(v) += W(e) * H(v, e);
    double total = 0;
    for (Index c = 0; c < S.rows(); ++c)
        for (Index e = 0; e < ne; ++e) {
            if (edge_deg(e) == 0) continue;
            for (Index u = 0; u < nv; ++u)
                for (Index v = 0; v < nv; ++v) {
                    const double diff = S(c, u) / std::sqrt(vert_deg(u)) - S(c, v) / std::sqrt(vert_deg(v));
                    total += W(e) * H(u, e) * H(v, e) / edge_deg(e) * diff * diff;
                }
        }
    return 0.5 * total;
}

/// Literal objective: reconstruction by explicit loops, l1 by loops, and the
/// hypergraph term through the double sum above.
inline double sahdl_objective(const Matrix& X, const Matrix& D, const Matrix& S, const Matrix& H, const Vector& W,
                              double alpha, double beta) {
    double recon = 0;
    for (Index i = 0; i < X.rows(); ++i)
        for (Index n = 0; n < X.cols(); ++n) {
            double r = X(i, n);
            for (Index k = 0; k < D.cols(); ++k) r -= D(i, k) * S(k, n);
            recon += r * r;
        }
    double l1 = 0;
    for (Index k = 0; k < S.rows(); ++k)
        for (Index n = 0; n < S.cols(); ++n) l1 += std::abs(S(k, n));
    return recon + 2 * alpha * l1 + beta * hypergraph_double_sum(H, W, S);
}

/// Minimizer of a 1-d function that is exactly quadratic on each side of 0.
/// Each branch is fitted from three evaluations, then the branch minima are compared.
template <class F>
double piecewise_quadratic_argmin(F f, double scale = 1.0) {
    const double f0 = f(0.0);
    auto branch = [&](double sign) {
        const double h = sign * scale;
        const double f1 = f(h), f2 = f(2 * h);
        // f(t) = f0 + b t + a t^2 on this side
        const double a = (f2 - 2 * f1 + f0) / (2 * h * h);
        const double b = (4 * f1 - f2 - 3 * f0) / (2 * h);
        double t = a > 0 ? -b / (2 * a) : 0.0;
        if (t * sign < 0) t = 0.0;
        return std::pair{t, f0 + b * t + a * t * t};
    };
    const auto [tp, fp] = branch(+1.0);
    const auto [tn, fn] = branch(-1.0);
    if (fp <= fn && fp <= f0) return tp;
    if (fn < fp && fn <= f0) return tn;
    return 0.0;
}

/// Gradient descent on ||U - B S||_F^2 + ridge ||B||_F^2 with step 1/L.
inline Matrix ridge_gd(const Matrix& S, const Matrix& U, double ridge, int iters = 200000) {
    Matrix B = Matrix::Zero(U.rows(), S.rows());
    const Matrix sst = S * S.transpose();
    const double L = 2 * (Eigen::SelfAdjointEigenSolver<Matrix>(sst).eigenvalues().maxCoeff() + ridge);
    for (int it = 0; it < iters; ++it) {
        const Matrix grad = -2 * (U - B * S) * S.transpose() + 2 * ridge * B;
        B -= grad / L;
        if (grad.norm() < 1e-13) break;
    }
    return B;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = scale * g(rng);
    return m;
}

}  // namespace oracle
