// sahdl_cli: train / evaluate / ablate attention-hypergraph dictionary learning
// on CSV or binmat feature files.
//
// Exit codes: 0 success, 2 bad arguments, 3 input-format error, 4 numerical failure.

#include <sahdl/sahdl.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

struct Options {
    std::string train_path;
    std::string test_path;
    std::string out_path;
    std::string format = "csv";
    std::string mode = "inductive";
    std::string ablation = "full";
    sahdl::ExperimentConfig cfg;
    double gamma = 0;  // 0: use alpha

    // train
    std::string dictionary_path;
    // mask-sweep
    std::vector<double> fractions{0.0, 0.2, 0.4, 0.6};
    std::vector<double> beta_grid;
    // synth
    sahdl::SyntheticSpec synth;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--train", o.train_path, "Training features (rows = samples)");
    cmd->add_option("--test", o.test_path, "Test features");
    cmd->add_option("--epsilon", o.cfg.epsilon, "Attention sparsity weight")->capture_default_str();
    cmd->add_option("--alpha", o.cfg.alpha, "Code sparsity weight")->capture_default_str();
    cmd->add_option("--beta", o.cfg.beta, "Hypergraph regularizer weight")->capture_default_str();
    cmd->add_option("--gamma", o.gamma, "Test-encoding sparsity weight (default: alpha)");
    cmd->add_option("--knn", o.cfg.k_nn, "Neighbours per attention hyperedge")->capture_default_str();
    cmd->add_option("--dict-size", o.cfg.dict_size, "Dictionary atoms (capped at the vertex count)")
        ->capture_default_str();
    cmd->add_option("--mode", o.mode, "inductive|transductive")
        ->check(CLI::IsMember({"inductive", "transductive"}))
        ->capture_default_str();
    cmd->add_option("--ablation", o.ablation, "full|saf-off|lb-off")
        ->check(CLI::IsMember({"full", "saf-off", "lb-off"}))
        ->capture_default_str();
    cmd->add_option("--mask-fraction", o.cfg.mask_fraction, "Fraction of coordinates zeroed per sample")
        ->capture_default_str();
    cmd->add_option("--seed", o.cfg.seed, "Random seed")->capture_default_str();
    cmd->add_option("--max-iter", o.cfg.max_outer_iter, "Outer iterations")->capture_default_str();
    cmd->add_option("--threads", o.cfg.threads, "Worker threads for hypergraph construction")
        ->capture_default_str();
    cmd->add_option("--out", o.out_path, "Output path (JSON report; matrix for export-laplacian)");
    cmd->add_option("--format", o.format, "csv|binmat")
        ->check(CLI::IsMember({"csv", "binmat"}))
        ->capture_default_str();
}

sahdl::io::Format format_of(const Options& o) {
    return o.format == "binmat" ? sahdl::io::Format::binmat : sahdl::io::Format::csv;
}

void finalize(Options& o) {
    o.cfg.mode = sahdl::parse_mode(o.mode);
    o.cfg.ablation = sahdl::parse_ablation(o.ablation);
    if (o.gamma != 0) o.cfg.gamma = o.gamma;
    o.cfg.validate();
}

/// Loads --train (labels required) and, if given, --test.
sahdl::DatasetBundle load_bundle(const Options& o, bool need_test, bool need_test_labels) {
    if (o.train_path.empty()) throw sahdl::ParameterError("--train is required");
    if (need_test && o.test_path.empty()) throw sahdl::ParameterError("--test is required");
    const auto fmt = format_of(o);
    auto train = sahdl::io::load_dataset(o.train_path, fmt);
    if (!train.labels) throw sahdl::InputError(o.train_path + ": training data has no labels");

    sahdl::DatasetBundle b;
    b.train_features = std::move(train.features);
    b.train_labels = std::move(*train.labels);
    if (!o.test_path.empty()) {
        auto test = sahdl::io::load_dataset(o.test_path, fmt);
        b.test_features = std::move(test.features);
        if (test.labels) b.test_labels = std::move(*test.labels);
        else if (need_test_labels) throw sahdl::InputError(o.test_path + ": test data has no labels");
    }
    const int classes = b.num_classes();
    b.train_labels.num_classes = classes;
    if (!b.test_labels.labels.empty()) b.test_labels.num_classes = classes;
    return b;
}

void emit(const Options& o, const sahdl::Json& j) {
    const std::string text = j.dump(2) + "\n";
    if (o.out_path.empty())
        std::cout << text;
    else
        sahdl::io::write_file(o.out_path, text);
}

int cmd_train(Options& o) {
    finalize(o);
    auto bundle = load_bundle(o, o.cfg.mode == sahdl::Mode::transductive, false);
    bundle.test_labels = {};  // training never scores
    const auto p = sahdl::prepare(o.cfg, bundle);
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = sahdl::train_pipeline(p.train, bundle.train_labels, p.test, p.graph, p.params, o.cfg.mode,
                                             o.cfg.ridge);
    sahdl::RunReport r;
    r.config = o.cfg;
    r.effective_dict_size = p.params.dict_size;
    r.objective_trace = model.objective_trace;
    if (p.test) r.predictions = sahdl::predict(model.classifier, model.test_codes).labels;
    r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.dictionary_path.empty())
        sahdl::io::save_matrix(o.dictionary_path, format_of(o), model.dictionary.atoms);
    emit(o, sahdl::to_json(r));
    return kExitOk;
}

int cmd_eval(Options& o) {
    finalize(o);
    emit(o, sahdl::to_json(sahdl::run(o.cfg, load_bundle(o, true, true))));
    return kExitOk;
}

int cmd_ablate(Options& o) {
    finalize(o);
    emit(o, sahdl::to_json(sahdl::ablate(o.cfg, load_bundle(o, true, true))));
    return kExitOk;
}

int cmd_mask_sweep(Options& o) {
    finalize(o);
    const auto bundle = load_bundle(o, true, true);
    for (double f : o.fractions)
        if (!(f >= 0 && f < 1)) throw sahdl::ParameterError("mask fractions must lie in [0, 1)");
    auto cfg = o.cfg;
    if (!o.beta_grid.empty()) cfg.beta = sahdl::tune_beta(cfg, {bundle}, o.beta_grid);
    auto j = sahdl::to_json(sahdl::mask_sweep(cfg, bundle, o.fractions));
    j["beta_tuned"] = !o.beta_grid.empty();
    emit(o, j);
    return kExitOk;
}

int cmd_synth(Options& o) {
    if (o.train_path.empty() || o.test_path.empty())
        throw sahdl::ParameterError("synth needs --train and --test output paths");
    o.synth.seed = o.cfg.seed;
    const auto b = sahdl::make_synthetic(o.synth);
    sahdl::io::save_dataset(o.train_path, format_of(o), b.train_features, &b.train_labels);
    sahdl::io::save_dataset(o.test_path, format_of(o), b.test_features, &b.test_labels);
    if (!o.out_path.empty()) {
        sahdl::Json j;
        j["classes"] = o.synth.classes;
        j["dim"] = o.synth.dim;
        j["train_samples"] = b.train_features.size();
        j["test_samples"] = b.test_features.size();
        j["noise_sigma"] = o.synth.noise_sigma;
        j["seed"] = o.synth.seed;
        j["format"] = o.format;
        sahdl::io::write_file(o.out_path, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_export_laplacian(Options& o) {
    finalize(o);
    if (o.out_path.empty()) throw sahdl::ParameterError("export-laplacian needs --out");
    const bool joint = o.cfg.mode == sahdl::Mode::transductive;
    const auto b = load_bundle(o, joint, false);
    const auto p = sahdl::prepare(o.cfg, b);
    auto vertices = p.train;
    auto labels = b.train_labels;
    if (joint) {
        vertices = sahdl::concat(p.train, *p.test);
        labels = sahdl::concat(labels, sahdl::LabelVector::unlabeled(static_cast<std::size_t>(p.test->size()),
                                                                      labels.num_classes));
    }
    const auto lap = sahdl::build_laplacian(vertices, labels, p.graph);
    sahdl::io::save_matrix(o.out_path, format_of(o), lap.delta);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-attention hypergraph regularized dictionary learning"};
    app.require_subcommand(1);
    Options o;

    auto* train = app.add_subcommand("train", "Fit a model; report the objective trace and test predictions");
    add_common(train, o);
    train->add_option("--save-dictionary", o.dictionary_path, "Write the learned dictionary (dim x K)");

    auto* eval = app.add_subcommand("eval", "Fit on --train and score on labeled --test");
    add_common(eval, o);

    auto* ablate = app.add_subcommand("ablate", "Compare full, saf-off and lb-off hypergraphs");
    add_common(ablate, o);

    auto* sweep = app.add_subcommand("mask-sweep", "Accuracy gap to the beta=0 baseline versus mask fraction");
    add_common(sweep, o);
    sweep->add_option("--fractions", o.fractions, "Mask fractions")->delimiter(',')->capture_default_str();
    sweep->add_option("--beta-grid", o.beta_grid, "Tune beta once on unmasked data over this grid")
        ->delimiter(',');

    auto* synth = app.add_subcommand("synth", "Write a synthetic train/test pair");
    add_common(synth, o);
    synth->add_option("--classes", o.synth.classes, "Number of classes")->capture_default_str();
    synth->add_option("--train-per-class", o.synth.train_per_class)->capture_default_str();
    synth->add_option("--test-per-class", o.synth.test_per_class)->capture_default_str();
    synth->add_option("--dim", o.synth.dim, "Feature dimension")->capture_default_str();
    synth->add_option("--noise", o.synth.noise_sigma, "Expected noise norm per sample")->capture_default_str();

    auto* lap = app.add_subcommand("export-laplacian", "Write the hypergraph Laplacian of --train");
    add_common(lap, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitBadArgs;
    }

    try {
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*ablate) return cmd_ablate(o);
        if (*sweep) return cmd_mask_sweep(o);
        if (*synth) return cmd_synth(o);
        if (*lap) return cmd_export_laplacian(o);
    } catch (const sahdl::ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadArgs;
    } catch (const sahdl::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const sahdl::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const sahdl::InternalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitBadArgs;
}
