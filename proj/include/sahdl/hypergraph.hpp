#pragma once

#include <sahdl/core.hpp>
#include <sahdl/sparse_attention.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <numeric>
#include <thread>

namespace sahdl {

enum class Modal : std::uint8_t { saf, lb };

/// Weighted hypergraph G = (V, E, W) stored as a dense |V| x |E| incidence matrix.
struct Hypergraph {
    Matrix incidence;
    Vector edge_weights;
    std::vector<Modal> modal_tags;

    Index num_vertices() const { return incidence.rows(); }
    Index num_edges() const { return incidence.cols(); }

    static Hypergraph empty(Index num_vertices) {
        return {Matrix(num_vertices, 0), Vector(0), {}};
    }

    void validate() const {
        if (edge_weights.size() != incidence.cols() || static_cast<Index>(modal_tags.size()) != incidence.cols())
            throw ParameterError("hypergraph: weights/tags do not match edge count");
        if (!incidence.allFinite() || (incidence.array() < 0).any())
            throw ParameterError("hypergraph: incidence entries must be finite and nonnegative");
        if (!(edge_weights.array() > 0).all()) throw ParameterError("hypergraph: edge weights must be positive");
    }
};

struct DegreePair {
    Vector vertex_degrees;  ///< d(v) = sum_e W(e) H(v, e)
    Vector edge_degrees;    ///< delta(e) = sum_v H(v, e)
};

/// Normalized hypergraph Laplacian I - Dv^-1/2 H W De^-1 H' Dv^-1/2.
struct LaplacianMatrix {
    Matrix delta;

    Index size() const { return delta.rows(); }

    /// tr(Delta S' S) for codes S with one column per vertex.
    double quadratic_form(const Matrix& codes) const {
        return ((codes * delta).cwiseProduct(codes)).sum();
    }
};

// ---------------------------------------------------------------------------
// k nearest neighbours
// ---------------------------------------------------------------------------

struct Neighborhood {
    std::vector<Index> indices;    // ascending distance, ties by ascending index
    std::vector<double> distances;
};

/// Exact Euclidean kNN over the columns of X, excluding the query column itself.
inline std::vector<Neighborhood> knn_neighbors(const FeatureMatrix& X, Index k) {
    X.validate();
    const Index n = X.size();
    if (k < 1) throw ParameterError("knn: k must be at least 1");
    if (k >= n)
        throw ParameterError("knn: k=" + std::to_string(k) + " must be smaller than the sample count " +
                             std::to_string(n));

    std::vector<Neighborhood> out(static_cast<std::size_t>(n));
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(static_cast<std::size_t>(n));
    for (Index c = 0; c < n; ++c) {
        cand.clear();
        for (Index j = 0; j < n; ++j)
            if (j != c) cand.emplace_back((X.values.col(c) - X.values.col(j)).norm(), j);
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        auto& nb = out[static_cast<std::size_t>(c)];
        nb.indices.resize(static_cast<std::size_t>(k));
        nb.distances.resize(static_cast<std::size_t>(k));
        for (Index i = 0; i < k; ++i) {
            nb.distances[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(i)].first;
            nb.indices[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(i)].second;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Modal construction
// ---------------------------------------------------------------------------

struct SafOptions {
    Index k = 10;
    AdmmParams attention;
    /// false reproduces the plain kNN hypergraph: every attention weight is 1.
    bool use_attention = true;
    unsigned threads = 1;
};

/// Mean neighbour distance of a center; 1 when every neighbour coincides with it.
inline double center_bandwidth(const Neighborhood& nb) {
    const double mean = std::accumulate(nb.distances.begin(), nb.distances.end(), 0.0) /
                        static_cast<double>(nb.distances.size());
    return mean > 0 ? mean : 1.0;
}

/// One hyperedge per center vertex c holding c itself (entry 1) and its k
/// neighbours, each weighted by exp(-(dist / sigma_c)^2) * max(q_i, 0) where q
/// is the sparse code of x_c over its neighbours.
inline Hypergraph build_saf_hypergraph(const FeatureMatrix& X, const SafOptions& opts) {
    const auto hoods = knn_neighbors(X, opts.k);
    if (opts.use_attention) opts.attention.validate();
    const Index n = X.size();

    Hypergraph hg;
    hg.incidence = Matrix::Zero(n, n);
    hg.edge_weights = Vector::Ones(n);
    hg.modal_tags.assign(static_cast<std::size_t>(n), Modal::saf);

    std::atomic<int> unconverged{0};

    // Each center writes only its own column.
    auto build_edge = [&](Index c) {
        const auto& nb = hoods[static_cast<std::size_t>(c)];
        const auto kk = static_cast<Index>(nb.indices.size());
        Vector weights = Vector::Ones(kk);
        if (opts.use_attention) {
            Matrix P(X.dim(), kk);
            for (Index i = 0; i < kk; ++i) P.col(i) = X.values.col(nb.indices[static_cast<std::size_t>(i)]);
            const auto sol = solve_lasso_admm(P, X.values.col(c), opts.attention.epsilon, opts.attention);
            if (!sol.converged) ++unconverged;
            weights = sol.q.cwiseMax(0.0);
        }
        const double sigma = center_bandwidth(nb);
        auto col = hg.incidence.col(c);
        for (Index i = 0; i < kk; ++i) {
            const double r = nb.distances[static_cast<std::size_t>(i)] / sigma;
            col(nb.indices[static_cast<std::size_t>(i)]) = std::exp(-r * r) * weights(i);
        }
        col(c) = 1.0;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (Index c = 0; c < n; ++c) build_edge(c);
    } else {
        std::atomic<Index> next{0};
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    try {
                        for (Index c = next++; c < n; c = next++) build_edge(c);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    if (unconverged > 0)
        warn("attention ADMM hit max_iter on " + std::to_string(unconverged.load()) + " of " + std::to_string(n) +
             " centers; using best iterate");
    return hg;
}

/// One 0/1 hyperedge per class with at least one labeled member. Unlabeled
/// vertices belong to no label hyperedge.
inline Hypergraph build_lb_hypergraph(const LabelVector& labels) {
    labels.validate();
    const auto n = static_cast<Index>(labels.size());
    std::vector<Index> column_of(static_cast<std::size_t>(labels.num_classes), -1);
    Index edges = 0;
    for (int c = 0; c < labels.num_classes; ++c)
        if (std::find(labels.labels.begin(), labels.labels.end(), c) != labels.labels.end())
            column_of[static_cast<std::size_t>(c)] = edges++;

    Hypergraph hg;
    hg.incidence = Matrix::Zero(n, edges);
    hg.edge_weights = Vector::Ones(edges);
    hg.modal_tags.assign(static_cast<std::size_t>(edges), Modal::lb);
    for (Index v = 0; v < n; ++v) {
        const int l = labels.labels[static_cast<std::size_t>(v)];
        if (l != kUnlabeled) hg.incidence(v, column_of[static_cast<std::size_t>(l)]) = 1.0;
    }
    return hg;
}

/// Column-wise concatenation [first | second].
inline Hypergraph fuse(const Hypergraph& first, const Hypergraph& second) {
    if (first.num_vertices() != second.num_vertices())
        throw ParameterError("fuse: vertex counts differ (" + std::to_string(first.num_vertices()) + " vs " +
                             std::to_string(second.num_vertices()) + ")");
    Hypergraph hg;
    hg.incidence.resize(first.num_vertices(), first.num_edges() + second.num_edges());
    hg.incidence << first.incidence, second.incidence;
    hg.edge_weights.resize(first.num_edges() + second.num_edges());
    hg.edge_weights << first.edge_weights, second.edge_weights;
    hg.modal_tags = first.modal_tags;
    hg.modal_tags.insert(hg.modal_tags.end(), second.modal_tags.begin(), second.modal_tags.end());
    return hg;
}

// ---------------------------------------------------------------------------
// Degrees and Laplacian. Sums run in ascending index order.
// ---------------------------------------------------------------------------

/// Edges with zero degree are reported and later skipped by laplacian().
inline DegreePair degrees(const Hypergraph& hg) {
    hg.validate();
    const Index nv = hg.num_vertices();
    const Index ne = hg.num_edges();
    DegreePair dp{Vector::Zero(nv), Vector::Zero(ne)};

    for (Index e = 0; e < ne; ++e) {
        double s = 0;
        for (Index v = 0; v < nv; ++v) s += hg.incidence(v, e);
        dp.edge_degrees(e) = s;
    }
    for (Index v = 0; v < nv; ++v) {
        double s = 0;
        for (Index e = 0; e < ne; ++e) s += hg.edge_weights(e) * hg.incidence(v, e);
        dp.vertex_degrees(v) = s;
    }

    Index empty = 0;
    for (Index e = 0; e < ne; ++e) empty += dp.edge_degrees(e) == 0;
    if (empty > 0) warn("dropping " + std::to_string(empty) + " hyperedge(s) with zero degree");

    for (Index v = 0; v < nv; ++v)
        if (!(dp.vertex_degrees(v) > 0))
            throw InternalError("vertex " + std::to_string(v) + " has zero degree");
    return dp;
}

inline LaplacianMatrix laplacian(const Hypergraph& hg, const DegreePair& dp) {
    const Index nv = hg.num_vertices();
    const Index ne = hg.num_edges();
    if (dp.vertex_degrees.size() != nv || dp.edge_degrees.size() != ne)
        throw ParameterError("laplacian: degree vectors do not match the hypergraph");
    for (Index v = 0; v < nv; ++v)
        if (!(dp.vertex_degrees(v) > 0))
            throw InternalError("laplacian: vertex " + std::to_string(v) + " has zero degree");

    const Vector inv_sqrt_dv = dp.vertex_degrees.cwiseSqrt().cwiseInverse();

    // theta(u, v) = sum_e  H(u,e) W(e) H(v,e) / (delta(e) sqrt(d(u) d(v)))
    Matrix theta = Matrix::Zero(nv, nv);
    std::vector<Index> members;
    for (Index e = 0; e < ne; ++e) {
        if (dp.edge_degrees(e) == 0) continue;
        const double scale = hg.edge_weights(e) / dp.edge_degrees(e);
        members.clear();
        for (Index v = 0; v < nv; ++v)
            if (hg.incidence(v, e) != 0) members.push_back(v);
        for (Index u : members) {
            const double hu = hg.incidence(u, e) * inv_sqrt_dv(u) * scale;
            for (Index v : members) theta(u, v) += hu * hg.incidence(v, e) * inv_sqrt_dv(v);
        }
    }

    LaplacianMatrix lap;
    lap.delta = Matrix::Identity(nv, nv) - theta;
    lap.delta = (0.5 * (lap.delta + lap.delta.transpose())).eval();
    check_finite(lap.delta, "hypergraph Laplacian");
    return lap;
}

inline LaplacianMatrix laplacian(const Hypergraph& hg) { return laplacian(hg, degrees(hg)); }

}  // namespace sahdl
