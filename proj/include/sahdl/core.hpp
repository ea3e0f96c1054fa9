#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sahdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors. Each category maps onto one CLI exit code (see tools/sahdl_cli.cpp).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied an out-of-range or inconsistent parameter.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data is malformed: unreadable file, bad CSV cell, bad binmat header.
class InputError : public Error {
public:
    using Error::Error;
};

/// An iterate became non-finite.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A construction guarantee or optimizer invariant was violated.
class InternalError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Warnings go through a process-wide sink so the CLI and tests can capture
// them. The sink may be called from worker threads.
// ---------------------------------------------------------------------------

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
struct WarningSink {
    std::mutex mutex;
    WarningHandler handler = [](std::string_view msg) { std::cerr << "sahdl: warning: " << msg << '\n'; };
};

inline WarningSink& warning_sink() {
    static WarningSink sink;
    return sink;
}
}  // namespace detail

/// Replaces the warning handler and returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    return std::exchange(sink.handler, std::move(handler));
}

inline void warn(std::string_view message) {
    auto& sink = detail::warning_sink();
    std::lock_guard lock(sink.mutex);
    if (sink.handler) sink.handler(message);
}

// ---------------------------------------------------------------------------
// Random streams. Every stochastic stage draws from its own generator keyed by
// (run seed, stage offset) so stages reproduce independently of each other.
// ---------------------------------------------------------------------------

enum class Stream : std::uint64_t {
    synthetic = 0x5341'0001,
    dictionary = 0x5341'0002,
    mask_train = 0x5341'0003,
    mask_test = 0x5341'0004,
    problems = 0x5341'0005,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    const auto tag = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

// ---------------------------------------------------------------------------
// Domain types.
// ---------------------------------------------------------------------------

/// Sample embeddings, one column per sample (dim x N).
struct FeatureMatrix {
    Matrix values;

    FeatureMatrix() = default;
    explicit FeatureMatrix(Matrix m) : values(std::move(m)) {}

    Index dim() const { return values.rows(); }
    Index size() const { return values.cols(); }
    auto column(Index j) const { return values.col(j); }

    /// Throws InputError on empty shape or any non-finite entry.
    void validate() const {
        if (values.rows() < 1 || values.cols() < 1)
            throw InputError("feature matrix must have at least one row and one column");
        for (Index j = 0; j < values.cols(); ++j)
            for (Index i = 0; i < values.rows(); ++i)
                if (!std::isfinite(values(i, j)))
                    throw InputError("non-finite feature at (dim " + std::to_string(i) + ", sample " +
                                     std::to_string(j) + ")");
    }
};

/// Horizontal concatenation [a | b].
inline FeatureMatrix concat(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.size() > 0 && b.size() > 0 && a.dim() != b.dim())
        throw ParameterError("cannot concatenate feature matrices of different dimension");
    if (b.size() == 0) return a;
    if (a.size() == 0) return b;
    Matrix m(a.dim(), a.size() + b.size());
    m << a.values, b.values;
    return FeatureMatrix(std::move(m));
}

inline constexpr int kUnlabeled = -1;

/// Per-sample class labels in [0, num_classes), or kUnlabeled.
struct LabelVector {
    std::vector<int> labels;
    int num_classes = 0;

    LabelVector() = default;
    LabelVector(std::vector<int> l, int c) : labels(std::move(l)), num_classes(c) {}

    /// Infers num_classes as max label + 1.
    static LabelVector from_labels(std::vector<int> l) {
        int c = 0;
        for (int v : l) c = std::max(c, v + 1);
        return {std::move(l), c};
    }

    static LabelVector unlabeled(std::size_t n, int num_classes) {
        return {std::vector<int>(n, kUnlabeled), num_classes};
    }

    std::size_t size() const { return labels.size(); }
    bool is_labeled(std::size_t i) const { return labels[i] != kUnlabeled; }

    std::size_t labeled_count() const {
        std::size_t n = 0;
        for (int v : labels) n += v != kUnlabeled;
        return n;
    }

    void validate() const {
        if (num_classes < 1) throw ParameterError("label vector needs at least one class");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int v = labels[i];
            if (v != kUnlabeled && (v < 0 || v >= num_classes))
                throw ParameterError("label " + std::to_string(v) + " at sample " + std::to_string(i) +
                                     " outside [0, " + std::to_string(num_classes) + ")");
        }
    }

    /// Every class has at least one labeled sample.
    bool covers_all_classes() const {
        std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
        for (int v : labels)
            if (v != kUnlabeled) seen[static_cast<std::size_t>(v)] = true;
        for (bool s : seen)
            if (!s) return false;
        return true;
    }
};

/// Appends b to a. The class count is the larger of the two.
inline LabelVector concat(const LabelVector& a, const LabelVector& b) {
    LabelVector out;
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.num_classes = std::max(a.num_classes, b.num_classes);
    return out;
}

inline void check_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) throw NumericalError(std::string(what) + " contains non-finite values");
}

}  // namespace sahdl
