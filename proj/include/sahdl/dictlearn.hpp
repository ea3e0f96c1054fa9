#pragma once

#include <sahdl/core.hpp>
#include <sahdl/hypergraph.hpp>
#include <sahdl/sparse_attention.hpp>

#include <functional>
#include <numeric>
#include <optional>

namespace sahdl {

/// dim x K atoms; columns kept at unit l2 norm.
struct Dictionary {
    Matrix atoms;

    Index size() const { return atoms.cols(); }
    Index dim() const { return atoms.rows(); }
};

/// K x N codes, one column per sample.
struct SparseCodes {
    Matrix codes;
};

struct SahdlParams {
    double alpha = 1.0 / 64.0;    ///< l1 weight on the codes
    double beta = 8.0;            ///< hypergraph regularizer weight
    std::optional<double> gamma;  ///< l1 weight when encoding test samples; unset means alpha
    Index dict_size = 200;
    int max_outer_iter = 100;
    double obj_tol = 1e-6;  ///< relative objective change that ends training
    std::uint64_t seed = 0;

    double test_gamma() const { return gamma.value_or(alpha); }

    void validate() const {
        if (!(alpha > 0)) throw ParameterError("alpha must be positive");
        if (!(beta >= 0)) throw ParameterError("beta must be nonnegative");
        if (!(test_gamma() > 0)) throw ParameterError("gamma must be positive");
        if (dict_size < 1) throw ParameterError("dictionary size must be at least 1");
        if (max_outer_iter < 1) throw ParameterError("max_outer_iter must be at least 1");
        if (!(obj_tol >= 0)) throw ParameterError("obj_tol must be nonnegative");
    }
};

/// Linear map from codes to class scores, C x K.
struct Classifier {
    Matrix plane;
    double ridge = 1e-3;
};

enum class Mode { inductive, transductive };

struct TrainedModel {
    Dictionary dictionary;
    SparseCodes codes;  ///< codes of every hypergraph vertex
    Classifier classifier;
    std::vector<double> objective_trace;
    Mode mode = Mode::inductive;
    SparseCodes test_codes;  ///< empty when no test features were given
};

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// ||X - D S||_F^2 + 2 alpha ||S||_1
inline double reconstruction_objective(const Matrix& X, const Matrix& D, const Matrix& S, double alpha) {
    return (X - D * S).squaredNorm() + 2.0 * alpha * S.cwiseAbs().sum();
}

inline void check_shapes(const FeatureMatrix& X, const Dictionary& D, const SparseCodes& S) {
    if (D.dim() != X.dim() || S.codes.rows() != D.size() || S.codes.cols() != X.size())
        throw ParameterError("shape mismatch: X is " + std::to_string(X.dim()) + "x" + std::to_string(X.size()) +
                             ", D is " + std::to_string(D.dim()) + "x" + std::to_string(D.size()) + ", S is " +
                             std::to_string(S.codes.rows()) + "x" + std::to_string(S.codes.cols()));
}

/// ||X - D S||_F^2 + 2 alpha ||S||_1 + beta tr(Delta S' S)
inline double objective(const FeatureMatrix& X, const Dictionary& D, const SparseCodes& S,
                        const LaplacianMatrix& delta, double alpha, double beta) {
    check_shapes(X, D, S);
    if (delta.size() != X.size()) throw ParameterError("Laplacian size does not match the sample count");
    return reconstruction_objective(X.values, D.atoms, S.codes, alpha) + beta * delta.quadratic_form(S.codes);
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {
inline Vector random_unit_vector(Index dim, Rng& rng) {
    std::normal_distribution<double> gauss;
    Vector v(dim);
    do {
        for (Index i = 0; i < dim; ++i) v(i) = gauss(rng);
    } while (v.norm() == 0);
    return v / v.norm();
}

/// Normalized copy of a random column of X, or a random unit vector if it is zero.
inline Vector random_data_atom(const Matrix& X, Rng& rng) {
    std::uniform_int_distribution<Index> pick(0, X.cols() - 1);
    Vector v = X.col(pick(rng));
    const double norm = v.norm();
    return norm > 0 ? Vector(v / norm) : random_unit_vector(X.rows(), rng);
}
}  // namespace detail

/// K data columns sampled without replacement (with replacement when K > N),
/// normalized to unit length.
inline Dictionary init_dictionary(const FeatureMatrix& X, Index K, Rng& rng) {
    if (X.size() < 1) throw ParameterError("init_dictionary: no samples");
    if (K < 1) throw ParameterError("init_dictionary: K must be at least 1");
    const Index n = X.size();

    std::vector<Index> picks;
    if (K <= n) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        picks.assign(order.begin(), order.begin() + K);
    } else {
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (Index k = 0; k < K; ++k) picks.push_back(pick(rng));
    }

    Dictionary D{Matrix(X.dim(), K)};
    for (Index k = 0; k < K; ++k) {
        const auto col = X.values.col(picks[static_cast<std::size_t>(k)]);
        const double norm = col.norm();
        D.atoms.col(k) = norm > 0 ? Vector(col / norm) : detail::random_unit_vector(X.dim(), rng);
    }
    return D;
}

inline Dictionary init_dictionary(const FeatureMatrix& X, Index K, std::uint64_t seed) {
    auto rng = make_rng(seed, Stream::dictionary);
    return init_dictionary(X, K, rng);
}

// ---------------------------------------------------------------------------
// Code update: exact coordinate minimization of the objective over one S(k, n)
// ---------------------------------------------------------------------------

/// Precomputed D'D and D'X for Gauss-Seidel sweeps over the codes with D fixed.
class CodeSweep {
public:
    /// delta may be null when beta == 0.
    CodeSweep(const Matrix& X, const Matrix& D, const LaplacianMatrix* delta, double alpha, double beta)
        : gram_(D.transpose() * D), dtx_(D.transpose() * X), delta_(delta), alpha_(alpha), beta_(beta) {
        if (beta_ != 0 && (delta_ == nullptr || delta_->size() != X.cols()))
            throw ParameterError("code update: Laplacian missing or of wrong size");
    }

    Index atoms() const { return gram_.rows(); }
    Index samples() const { return dtx_.cols(); }

    /// S(k, n) <- soft(J, alpha) / ((D'D)_kk + beta Delta_nn) with
    /// J = (D'X)_kn - beta sum_{r!=n} Delta_nr S_kr - sum_{l!=k} (D'D)_kl S_ln.
    void update_entry(Matrix& S, Index k, Index n) const {
        double j = dtx_(k, n);
        if (beta_ != 0) {
            const auto& delta = delta_->delta;
            double coupling = 0;
            for (Index r = 0; r < S.cols(); ++r)
                if (r != n) coupling += delta(r, n) * S(k, r);
            j -= beta_ * coupling;
        }
        double cross = 0;
        for (Index l = 0; l < S.rows(); ++l)
            if (l != k) cross += gram_(l, k) * S(l, n);
        j -= cross;

        if (!std::isfinite(j))
            throw NumericalError("non-finite coordinate target at (k=" + std::to_string(k) +
                                 ", n=" + std::to_string(n) + ")");

        const double denom = gram_(k, k) + (beta_ != 0 ? beta_ * delta_->delta(n, n) : 0.0);
        S(k, n) = denom <= 1e-12 ? 0.0 : soft_threshold(j, alpha_) / denom;
    }

    /// One pass in (n ascending, k ascending) order.
    void sweep(Matrix& S) const {
        for (Index n = 0; n < S.cols(); ++n)
            for (Index k = 0; k < S.rows(); ++k) update_entry(S, k, n);
    }

private:
    Matrix gram_;
    Matrix dtx_;
    const LaplacianMatrix* delta_;
    double alpha_;
    double beta_;
};

inline SparseCodes& update_codes(const FeatureMatrix& X, const Dictionary& D, SparseCodes& S,
                                 const LaplacianMatrix& delta, double alpha, double beta) {
    check_shapes(X, D, S);
    CodeSweep(X.values, D.atoms, &delta, alpha, beta).sweep(S.codes);
    return S;
}

// ---------------------------------------------------------------------------
// Dictionary update: blockwise coordinate descent, one atom at a time
// ---------------------------------------------------------------------------

/// d_k <- u / ||u||  with  u = X S_k.' - D~k S S_k.'  (D~k = D with column k zeroed).
/// Atoms whose u vanishes are redrawn from the data. Returns the number redrawn.
inline int update_dictionary(const FeatureMatrix& X, const SparseCodes& S, Dictionary& D, Rng& rng) {
    check_shapes(X, D, S);
    const Matrix xst = X.values * S.codes.transpose();
    const Matrix sst = S.codes * S.codes.transpose();
    const Index K = D.size();
    int redrawn = 0;

    Vector u(D.dim());
    for (Index k = 0; k < K; ++k) {
        u = xst.col(k);
        for (Index m = 0; m < K; ++m)
            if (m != k) u.noalias() -= sst(m, k) * D.atoms.col(m);
        const double norm = u.norm();
        if (norm <= 1e-12) {
            D.atoms.col(k) = detail::random_data_atom(X.values, rng);
            ++redrawn;
        } else {
            D.atoms.col(k) = u / norm;
        }
    }
    if (redrawn > 0) warn("reinitialized " + std::to_string(redrawn) + " dead dictionary atom(s)");
    return redrawn;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
    Dictionary dictionary;
    SparseCodes codes;
    std::vector<double> objective_trace;
};

/// Called after every outer iteration with (iteration, D, S, objective).
using TrainObserver = std::function<void(int, const Dictionary&, const SparseCodes&, double)>;

/// Alternates one code sweep and one dictionary sweep, starting from sampled
/// atoms and zero codes, until the relative objective change drops below
/// obj_tol or max_outer_iter is reached.
inline TrainResult train(const FeatureMatrix& X, const LaplacianMatrix& delta, const SahdlParams& params,
                         const TrainObserver& observer = {}) {
    params.validate();
    X.validate();
    if (delta.size() != X.size())
        throw ParameterError("Laplacian is " + std::to_string(delta.size()) + "x" + std::to_string(delta.size()) +
                             " but there are " + std::to_string(X.size()) + " samples");

    auto rng = make_rng(params.seed, Stream::dictionary);
    TrainResult out;
    out.dictionary = init_dictionary(X, params.dict_size, rng);
    out.codes.codes = Matrix::Zero(params.dict_size, X.size());

    double prev = objective(X, out.dictionary, out.codes, delta, params.alpha, params.beta);
    for (int it = 1; it <= params.max_outer_iter; ++it) {
        update_codes(X, out.dictionary, out.codes, delta, params.alpha, params.beta);
        update_dictionary(X, out.codes, out.dictionary, rng);
        const double f = objective(X, out.dictionary, out.codes, delta, params.alpha, params.beta);
        if (!std::isfinite(f)) throw NumericalError("objective became non-finite at iteration " + std::to_string(it));
        // Each block step is an exact minimization, so an increase is a bug.
        if (f > prev + 1e-9 * std::max(1.0, std::abs(prev)))
            throw InternalError("objective increased at iteration " + std::to_string(it) + ": " +
                                std::to_string(prev) + " -> " + std::to_string(f));
        out.objective_trace.push_back(f);
        if (observer) observer(it, out.dictionary, out.codes, f);
        const bool done = std::abs(prev - f) < params.obj_tol * std::max(std::abs(prev), 1e-300);
        prev = f;
        if (done) break;
    }
    return out;
}

/// Per-column lasso  min_s ||y - D s||^2 + 2 gamma ||s||_1  by cyclic coordinate
/// descent, up to 500 sweeps or until the relative change is below 1e-8.
inline SparseCodes encode_test(const FeatureMatrix& Y, const Dictionary& D, double gamma) {
    if (!(gamma > 0)) throw ParameterError("gamma must be positive");
    if (Y.dim() != D.dim()) throw ParameterError("test features and dictionary differ in dimension");
    constexpr int kMaxSweeps = 500;
    constexpr double kRelTol = 1e-8;

    const CodeSweep cd(Y.values, D.atoms, nullptr, gamma, 0.0);
    SparseCodes out{Matrix::Zero(D.size(), Y.size())};
    Vector before(D.size());
    for (Index n = 0; n < Y.size(); ++n) {
        for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
            before = out.codes.col(n);
            for (Index k = 0; k < D.size(); ++k) cd.update_entry(out.codes, k, n);
            const double change = (out.codes.col(n) - before).lpNorm<Eigen::Infinity>();
            const double scale = out.codes.col(n).lpNorm<Eigen::Infinity>();
            if (change <= kRelTol * scale) break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Ridge fit of one-hot targets on the labeled code columns:
/// B = U S_l' (S_l S_l' + ridge I)^-1.
inline Classifier fit_classifier(const SparseCodes& S, const LabelVector& labels, double ridge = 1e-3) {
    labels.validate();
    if (static_cast<Index>(labels.size()) != S.codes.cols())
        throw ParameterError("fit_classifier: label count does not match code columns");
    if (!(ridge >= 0)) throw ParameterError("fit_classifier: ridge must be nonnegative");

    const Index K = S.codes.rows();
    const Index C = labels.num_classes;
    std::vector<Index> cols;
    for (std::size_t j = 0; j < labels.size(); ++j)
        if (labels.is_labeled(j)) cols.push_back(static_cast<Index>(j));
    if (cols.empty()) throw ParameterError("fit_classifier: no labeled samples");
    if (!labels.covers_all_classes()) warn("some classes have no labeled samples; they will not be predicted");

    const auto nl = static_cast<Index>(cols.size());
    Matrix sl(K, nl);
    Matrix u = Matrix::Zero(C, nl);
    for (Index i = 0; i < nl; ++i) {
        const auto j = cols[static_cast<std::size_t>(i)];
        sl.col(i) = S.codes.col(j);
        u(labels.labels[static_cast<std::size_t>(j)], i) = 1.0;
    }

    const Matrix normal = sl * sl.transpose() + ridge * Matrix::Identity(K, K);
    const Matrix rhs = sl * u.transpose();
    Classifier clf;
    clf.ridge = ridge;
    if (ridge > 0)
        clf.plane = normal.ldlt().solve(rhs).transpose();
    else
        clf.plane = normal.completeOrthogonalDecomposition().solve(rhs).transpose();
    check_finite(clf.plane, "classifier");
    return clf;
}

/// argmax over rows of B s for every column; ties go to the lowest class.
inline LabelVector predict(const Classifier& clf, const SparseCodes& S) {
    if (clf.plane.cols() != S.codes.rows()) throw ParameterError("predict: classifier and codes disagree on K");
    const Matrix scores = clf.plane * S.codes;
    LabelVector out;
    out.num_classes = static_cast<int>(clf.plane.rows());
    out.labels.resize(static_cast<std::size_t>(S.codes.cols()));
    for (Index j = 0; j < scores.cols(); ++j) {
        Index best = 0;
        for (Index c = 1; c < scores.rows(); ++c)
            if (scores(c, j) > scores(best, j)) best = c;
        out.labels[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

struct HypergraphOptions {
    SafOptions saf;
    bool use_labels = true;  ///< false drops the label modal (H = H_saf)
};

/// Builds the fused attention/label hypergraph over `vertices` and returns its Laplacian.
inline LaplacianMatrix build_laplacian(const FeatureMatrix& vertices, const LabelVector& vertex_labels,
                                       const HypergraphOptions& opts) {
    if (static_cast<Index>(vertex_labels.size()) != vertices.size())
        throw ParameterError("label count does not match vertex count");
    const Hypergraph saf = build_saf_hypergraph(vertices, opts.saf);
    const Hypergraph lb = opts.use_labels ? build_lb_hypergraph(vertex_labels) : Hypergraph::empty(vertices.size());
    return laplacian(fuse(saf, lb));
}

/// Inductive mode builds the hypergraph and dictionary over the training
/// samples only and encodes the test samples afterwards. Transductive mode
/// uses [train | test] as vertices (test rows carry no labels) and reads the
/// test codes straight out of the joint code matrix.
inline TrainedModel train_pipeline(const FeatureMatrix& train_x, const LabelVector& train_labels,
                                   const std::optional<FeatureMatrix>& test_x, const HypergraphOptions& graph_opts,
                                   const SahdlParams& params, Mode mode, double ridge = 1e-3,
                                   const TrainObserver& observer = {}) {
    train_x.validate();
    train_labels.validate();
    if (static_cast<Index>(train_labels.size()) != train_x.size())
        throw ParameterError("training labels and features differ in count");
    if (mode == Mode::transductive && !test_x)
        throw ParameterError("transductive mode requires test features");
    if (test_x) {
        test_x->validate();
        if (test_x->dim() != train_x.dim()) throw ParameterError("train and test feature dimensions differ");
    }

    const bool joint = mode == Mode::transductive;
    const FeatureMatrix vertices = joint ? concat(train_x, *test_x) : train_x;
    const LabelVector vertex_labels =
        joint ? concat(train_labels, LabelVector::unlabeled(static_cast<std::size_t>(test_x->size()),
                                                            train_labels.num_classes))
              : train_labels;

    const LaplacianMatrix delta = build_laplacian(vertices, vertex_labels, graph_opts);
    auto fit = train(vertices, delta, params, observer);

    TrainedModel model;
    model.mode = mode;
    model.dictionary = std::move(fit.dictionary);
    model.codes = std::move(fit.codes);
    model.objective_trace = std::move(fit.objective_trace);
    model.classifier = fit_classifier(model.codes, vertex_labels, ridge);
    if (test_x) {
        if (joint)
            model.test_codes.codes = model.codes.codes.rightCols(test_x->size());
        else
            model.test_codes = encode_test(*test_x, model.dictionary, params.test_gamma());
    }
    return model;
}

}  // namespace sahdl
