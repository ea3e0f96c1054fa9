#pragma once

#include <sahdl/dictlearn.hpp>
#include <sahdl/harness/synthetic.hpp>

#include <json.hpp>

#include <chrono>
#include <string_view>

namespace sahdl {

enum class Ablation { full, saf_off, lb_off };

inline std::string_view to_string(Mode m) { return m == Mode::inductive ? "inductive" : "transductive"; }

inline std::string_view to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::saf_off: return "saf-off";
        case Ablation::lb_off: return "lb-off";
    }
    return "full";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "inductive") return Mode::inductive;
    if (s == "transductive") return Mode::transductive;
    throw ParameterError("unknown mode '" + std::string(s) + "'");
}

inline Ablation parse_ablation(std::string_view s) {
    if (s == "full") return Ablation::full;
    if (s == "saf-off") return Ablation::saf_off;
    if (s == "lb-off") return Ablation::lb_off;
    throw ParameterError("unknown ablation '" + std::string(s) + "'");
}

/// Defaults are the UCM-LU operating point: eps = alpha = 2^-6, beta = 2^3,
/// 10 neighbours, 200 atoms.
struct ExperimentConfig {
    double epsilon = 1.0 / 64.0;
    double alpha = 1.0 / 64.0;
    double beta = 8.0;
    std::optional<double> gamma;  // unset: alpha
    int k_nn = 10;
    int dict_size = 200;
    Mode mode = Mode::inductive;
    Ablation ablation = Ablation::full;
    double mask_fraction = 0.0;
    std::uint64_t seed = 0;
    int max_outer_iter = 100;
    double obj_tol = 1e-6;
    double ridge = 1e-3;
    unsigned threads = 1;

    double effective_gamma() const { return gamma.value_or(alpha); }

    void validate() const {
        if (!(epsilon > 0)) throw ParameterError("epsilon must be positive");
        if (!(alpha > 0)) throw ParameterError("alpha must be positive");
        if (!(beta >= 0)) throw ParameterError("beta must be nonnegative");
        if (!(effective_gamma() > 0)) throw ParameterError("gamma must be positive");
        if (k_nn < 1) throw ParameterError("knn must be at least 1");
        if (dict_size < 1) throw ParameterError("dict-size must be at least 1");
        if (!(mask_fraction >= 0 && mask_fraction < 1)) throw ParameterError("mask fraction must be in [0, 1)");
        if (max_outer_iter < 1) throw ParameterError("max-iter must be at least 1");
        if (!(ridge >= 0)) throw ParameterError("ridge must be nonnegative");
    }
};

struct RunReport {
    double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN when nothing was scored
    std::vector<double> per_class_accuracy;  // NaN for classes without test samples
    std::vector<double> objective_trace;
    double wall_time_seconds = 0;
    ExperimentConfig config;
    Index effective_dict_size = 0;
    std::vector<int> predictions;
};

struct Score {
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> per_class;
};

/// Accuracy over labeled entries of `truth`; per-class entries are recalls.
inline Score score(const LabelVector& predicted, const LabelVector& truth, int num_classes) {
    if (predicted.size() != truth.size()) throw ParameterError("score: prediction/truth length mismatch");
    std::vector<std::size_t> hits(static_cast<std::size_t>(num_classes), 0), total(hits);
    std::size_t all_hits = 0, all_total = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const int t = truth.labels[j];
        if (t == kUnlabeled) continue;
        if (t < 0 || t >= num_classes)
            throw ParameterError("test label " + std::to_string(t) + " is not a training class");
        const bool ok = predicted.labels[j] == t;
        hits[static_cast<std::size_t>(t)] += ok;
        ++total[static_cast<std::size_t>(t)];
        all_hits += ok;
        ++all_total;
    }
    Score s;
    if (all_total > 0) s.accuracy = static_cast<double>(all_hits) / static_cast<double>(all_total);
    for (std::size_t c = 0; c < hits.size(); ++c)
        s.per_class.push_back(total[c] ? static_cast<double>(hits[c]) / static_cast<double>(total[c])
                                       : std::numeric_limits<double>::quiet_NaN());
    return s;
}

inline HypergraphOptions graph_options(const ExperimentConfig& cfg) {
    HypergraphOptions opts;
    opts.saf.k = cfg.k_nn;
    opts.saf.attention.epsilon = cfg.epsilon;
    opts.saf.use_attention = cfg.ablation != Ablation::saf_off;
    opts.saf.threads = cfg.threads;
    opts.use_labels = cfg.ablation != Ablation::lb_off;
    return opts;
}

struct PreparedRun {
    FeatureMatrix train;
    std::optional<FeatureMatrix> test;
    HypergraphOptions graph;
    SahdlParams params;
};

/// Applies masks and resolves the effective dictionary size for a run.
inline PreparedRun prepare(const ExperimentConfig& cfg, const DatasetBundle& bundle) {
    cfg.validate();
    bundle.validate();
    PreparedRun p;
    const bool masked = cfg.mask_fraction > 0;
    p.train = masked ? apply_mask(bundle.train_features, cfg.mask_fraction, cfg.seed, Stream::mask_train)
                     : bundle.train_features;
    if (bundle.test_features.size() > 0)
        p.test = masked ? apply_mask(bundle.test_features, cfg.mask_fraction, cfg.seed, Stream::mask_test)
                        : bundle.test_features;
    if (cfg.mode == Mode::transductive && !p.test) throw ParameterError("transductive mode requires test features");

    const Index vertices = p.train.size() + (cfg.mode == Mode::transductive ? p.test->size() : 0);
    p.graph = graph_options(cfg);
    p.params.alpha = cfg.alpha;
    p.params.beta = cfg.beta;
    p.params.gamma = cfg.gamma;
    p.params.dict_size = std::min<Index>(cfg.dict_size, vertices);
    p.params.max_outer_iter = cfg.max_outer_iter;
    p.params.obj_tol = cfg.obj_tol;
    p.params.seed = cfg.seed;
    return p;
}

/// Trains on the bundle and scores the test split. Test labels are only read
/// by the scoring step at the end.
inline RunReport run(const ExperimentConfig& cfg, const DatasetBundle& bundle) {
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedRun p = prepare(cfg, bundle);
    LabelVector train_labels = bundle.train_labels;
    train_labels.num_classes = bundle.num_classes();

    const TrainedModel model = train_pipeline(p.train, train_labels, p.test, p.graph, p.params, cfg.mode, cfg.ridge);

    RunReport report;
    report.config = cfg;
    report.effective_dict_size = p.params.dict_size;
    report.objective_trace = model.objective_trace;
    if (p.test) {
        const LabelVector predicted = predict(model.classifier, model.test_codes);
        report.predictions = predicted.labels;
        if (!bundle.test_labels.labels.empty()) {
            const Score s = score(predicted, bundle.test_labels, train_labels.num_classes);
            report.accuracy = s.accuracy;
            report.per_class_accuracy = s.per_class;
        }
    }
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

struct AblationReport {
    RunReport full, saf_off, lb_off;
};

inline AblationReport ablate(ExperimentConfig cfg, const DatasetBundle& bundle) {
    AblationReport out;
    cfg.ablation = Ablation::full;
    out.full = run(cfg, bundle);
    cfg.ablation = Ablation::saf_off;
    out.saf_off = run(cfg, bundle);
    cfg.ablation = Ablation::lb_off;
    out.lb_off = run(cfg, bundle);
    return out;
}

/// Picks the beta with the best mean accuracy over `bundles` x `fractions`
/// (mask fractions; unmasked only by default). Ties keep the configured beta
/// if it is among the best, else the first in grid order.
inline double tune_beta(ExperimentConfig cfg, const std::vector<DatasetBundle>& bundles,
                        const std::vector<double>& grid, const std::vector<double>& fractions = {0.0}) {
    if (grid.empty() || bundles.empty() || fractions.empty()) return cfg.beta;
    const double configured = cfg.beta;
    double best_beta = grid.front();
    double best = -1;
    bool configured_is_best = false;
    for (double beta : grid) {
        cfg.beta = beta;
        double acc = 0;
        for (double f : fractions) {
            cfg.mask_fraction = f;
            for (const auto& b : bundles) acc += run(cfg, b).accuracy;
        }
        acc /= static_cast<double>(bundles.size() * fractions.size());
        if (acc > best) {
            best = acc;
            best_beta = beta;
            configured_is_best = beta == configured;
        } else if (acc == best && beta == configured) {
            configured_is_best = true;
        }
    }
    return configured_is_best ? configured : best_beta;
}

struct MaskSweepReport {
    std::vector<double> fractions;
    double beta = 0;
    std::vector<RunReport> regularized;  // configured beta
    std::vector<RunReport> baseline;     // beta = 0
    std::vector<double> gaps;            // regularized - baseline accuracy
};

inline MaskSweepReport mask_sweep(ExperimentConfig cfg, const DatasetBundle& bundle,
                                  const std::vector<double>& fractions) {
    MaskSweepReport out;
    out.fractions = fractions;
    out.beta = cfg.beta;
    for (double f : fractions) {
        cfg.mask_fraction = f;
        ExperimentConfig base = cfg;
        base.beta = 0;
        out.regularized.push_back(run(cfg, bundle));
        out.baseline.push_back(run(base, bundle));
        out.gaps.push_back(out.regularized.back().accuracy - out.baseline.back().accuracy);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

namespace detail {
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number_or_null(x));
    return a;
}
}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
    Json j;
    j["epsilon"] = c.epsilon;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["gamma"] = c.effective_gamma();
    j["knn"] = c.k_nn;
    j["dict_size"] = c.dict_size;
    j["mode"] = to_string(c.mode);
    j["ablation"] = to_string(c.ablation);
    j["mask_fraction"] = c.mask_fraction;
    j["seed"] = c.seed;
    j["max_outer_iter"] = c.max_outer_iter;
    j["obj_tol"] = c.obj_tol;
    j["ridge"] = c.ridge;
    return j;
}

inline Json to_json(const RunReport& r) {
    Json j;
    j["accuracy"] = detail::number_or_null(r.accuracy);
    j["per_class_accuracy"] = detail::numbers(r.per_class_accuracy);
    j["objective_trace"] = detail::numbers(r.objective_trace);
    j["wall_time_seconds"] = r.wall_time_seconds;
    j["config"] = to_json(r.config);
    j["config"]["effective_dict_size"] = r.effective_dict_size;
    j["predictions"] = r.predictions;
    return j;
}

inline Json to_json(const AblationReport& r) {
    Json j;
    j["full"] = to_json(r.full);
    j["saf-off"] = to_json(r.saf_off);
    j["lb-off"] = to_json(r.lb_off);
    return j;
}

inline Json to_json(const MaskSweepReport& r) {
    Json j;
    j["fractions"] = r.fractions;
    j["beta"] = r.beta;
    j["gaps"] = detail::numbers(r.gaps);
    j["regularized"] = Json::array();
    j["baseline"] = Json::array();
    for (const auto& x : r.regularized) j["regularized"].push_back(to_json(x));
    for (const auto& x : r.baseline) j["baseline"].push_back(to_json(x));
    return j;
}

/// Removes every "wall_time_seconds" key, recursively.
inline Json strip_timing(Json j) {
    if (j.is_object()) {
        j.erase("wall_time_seconds");
        for (auto& [k, v] : j.items()) v = strip_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timing(v);
    }
    return j;
}

}  // namespace sahdl
