#pragma once

#include <sahdl/core.hpp>

#include <numeric>

namespace sahdl {

/// Train/test split. Test labels are ground truth for scoring only.
struct DatasetBundle {
    FeatureMatrix train_features;
    LabelVector train_labels;
    FeatureMatrix test_features;
    LabelVector test_labels;

    int num_classes() const { return std::max(train_labels.num_classes, test_labels.num_classes); }

    void validate() const {
        train_features.validate();
        train_labels.validate();
        if (static_cast<Index>(train_labels.size()) != train_features.size())
            throw ParameterError("train labels and features differ in count");
        if (test_features.size() > 0) {
            test_features.validate();
            if (test_features.dim() != train_features.dim())
                throw ParameterError("train and test feature dimensions differ");
        }
        if (!test_labels.labels.empty() && static_cast<Index>(test_labels.size()) != test_features.size())
            throw ParameterError("test labels and features differ in count");
    }
};

struct SyntheticSpec {
    int classes = 4;
    int train_per_class = 5;
    int test_per_class = 10;
    Index dim = 50;
    /// Expected norm of the additive noise; each coordinate gets N(0, (sigma^2 / dim)).
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;
};

/// Gaussian blobs around unit-norm class centers that are pairwise at least 60
/// degrees apart. Samples are ordered class by class, training samples first.
inline DatasetBundle make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ParameterError("synthetic data needs at least 2 classes");
    if (spec.dim < 1) throw ParameterError("synthetic dim must be positive");
    if (spec.train_per_class < 1 || spec.test_per_class < 0)
        throw ParameterError("synthetic sample counts must be positive");
    if (!(spec.noise_sigma >= 0)) throw ParameterError("noise sigma must be nonnegative");

    auto rng = make_rng(spec.seed, Stream::synthetic);
    std::normal_distribution<double> gauss;
    auto draw_unit = [&] {
        Vector v(spec.dim);
        do {
            for (Index i = 0; i < spec.dim; ++i) v(i) = gauss(rng);
        } while (v.norm() == 0);
        return Vector(v / v.norm());
    };

    constexpr int kMaxTries = 10'000;
    constexpr double kMaxCos = 0.5;  // cos 60 deg
    Matrix centers(spec.dim, spec.classes);
    int tries = 0;
    for (int c = 0; c < spec.classes;) {
        if (++tries > kMaxTries)
            throw ParameterError("could not place " + std::to_string(spec.classes) +
                                 " class centers 60 degrees apart in dimension " + std::to_string(spec.dim));
        const Vector v = draw_unit();
        bool ok = true;
        for (int p = 0; p < c && ok; ++p) ok = v.dot(centers.col(p)) <= kMaxCos;
        if (ok) centers.col(c++) = v;
    }

    const double coord_sigma = spec.noise_sigma / std::sqrt(static_cast<double>(spec.dim));
    auto draw_split = [&](int per_class, FeatureMatrix& X, LabelVector& y) {
        X.values.resize(spec.dim, static_cast<Index>(spec.classes) * per_class);
        y.labels.clear();
        y.num_classes = spec.classes;
        Index j = 0;
        for (int c = 0; c < spec.classes; ++c)
            for (int s = 0; s < per_class; ++s, ++j) {
                for (Index i = 0; i < spec.dim; ++i) X.values(i, j) = centers(i, c) + coord_sigma * gauss(rng);
                y.labels.push_back(c);
            }
    };

    DatasetBundle out;
    draw_split(spec.train_per_class, out.train_features, out.train_labels);
    draw_split(spec.test_per_class, out.test_features, out.test_labels);
    return out;
}

/// Zeroes an independent random subset of floor(fraction * dim) coordinates in every column.
inline FeatureMatrix apply_mask(const FeatureMatrix& X, double fraction, Rng& rng) {
    if (!(fraction >= 0 && fraction < 1)) throw ParameterError("mask fraction must be in [0, 1)");
    FeatureMatrix out = X;
    const auto count = static_cast<Index>(std::floor(fraction * static_cast<double>(X.dim())));
    if (count == 0) return out;
    std::vector<Index> coords(static_cast<std::size_t>(X.dim()));
    for (Index j = 0; j < X.size(); ++j) {
        std::iota(coords.begin(), coords.end(), Index{0});
        // partial Fisher-Yates: the first `count` slots are a uniform subset
        for (Index i = 0; i < count; ++i) {
            std::uniform_int_distribution<Index> pick(i, X.dim() - 1);
            std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(pick(rng))]);
            out.values(coords[static_cast<std::size_t>(i)], j) = 0.0;
        }
    }
    return out;
}

inline FeatureMatrix apply_mask(const FeatureMatrix& X, double fraction, std::uint64_t seed,
                                Stream stream = Stream::mask_train) {
    auto rng = make_rng(seed, stream);
    return apply_mask(X, fraction, rng);
}

}  // namespace sahdl
