#include <sahdl/sahdl.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sys/wait.h>

using namespace sahdl;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("sahdl_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    /// Runs the CLI with stdout and stderr captured to files; returns the exit code.
    int cli(const std::string& args) {
        const std::string cmd = std::string(SAHDL_CLI_PATH) + " " + args + " > " + path("stdout") + " 2> " +
                                path("stderr");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return io::detail::read_file(path("stdout")); }
    std::string err() const { return io::detail::read_file(path("stderr")); }

    static std::string ext(const std::string& format) { return format == "binmat" ? "bin" : format; }

    void make_data(const std::string& format = "csv", const std::string& extra = "") {
        ASSERT_EQ(cli("synth --train " + path("train." + ext(format)) + " --test " + path("test." + ext(format)) +
                      " --format " + format + " --seed 3 " + extra),
                  0)
            << err();
    }

    std::string data_args(const std::string& format = "csv") const {
        return "--train " + path("train." + ext(format)) + " --test " + path("test." + ext(format)) + " --format " +
               format;
    }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, SynthWritesBothFormats) {
    make_data("csv");
    const auto d = io::load_csv(path("train.csv"));
    EXPECT_EQ(d.features.size(), 20);
    EXPECT_EQ(d.features.dim(), 50);
    make_data("binmat", "--out " + path("summary.json"));
    EXPECT_EQ(io::load_binmat(path("test.bin")).size(), 40);
    EXPECT_TRUE(fs::exists(path("test.bin.labels")));
    EXPECT_EQ(Json::parse(io::detail::read_file(path("summary.json")))["classes"], 4);
}

TEST_F(Cli, EvalWritesReport) {
    make_data();
    ASSERT_EQ(cli("eval " + data_args() + " --max-iter 10 --out " + path("r.json")), 0) << err();
    const auto j = Json::parse(io::detail::read_file(path("r.json")));
    for (const char* key : {"accuracy", "per_class_accuracy", "objective_trace", "wall_time_seconds", "config"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_GE(j["accuracy"].get<double>(), 0.0);
    EXPECT_EQ(j["config"]["knn"], 10);
    EXPECT_EQ(j["config"]["dict_size"], 200);
    EXPECT_EQ(j["config"]["effective_dict_size"], 20);
}

TEST_F(Cli, EvalToStdoutWithBinmat) {
    make_data("binmat");
    ASSERT_EQ(cli("eval " + data_args("binmat") + " --max-iter 5 --mode transductive --ablation lb-off"), 0) << err();
    const auto j = Json::parse(out());
    EXPECT_EQ(j["config"]["mode"], "transductive");
    EXPECT_EQ(j["config"]["ablation"], "lb-off");
}

TEST_F(Cli, TrainSavesDictionary) {
    make_data();
    ASSERT_EQ(cli("train --train " + path("train.csv") + " --max-iter 5 --dict-size 8 --save-dictionary " +
                  path("D.csv") + " --out " + path("t.json")),
              0)
        << err();
    const auto D = io::load_csv(path("D.csv")).features;
    // one file row per atom, like samples
    EXPECT_EQ(D.size(), 8);
    EXPECT_EQ(D.dim(), 50);
    EXPECT_EQ(Json::parse(io::detail::read_file(path("t.json")))["objective_trace"].size(), 5u);
}

TEST_F(Cli, AblateAndMaskSweep) {
    make_data();
    ASSERT_EQ(cli("ablate " + data_args() + " --max-iter 5"), 0) << err();
    const auto a = Json::parse(out());
    EXPECT_TRUE(a.contains("full") && a.contains("saf-off") && a.contains("lb-off"));

    ASSERT_EQ(cli("mask-sweep " + data_args() + " --max-iter 5 --fractions 0,0.5 --beta-grid 1,8"), 0) << err();
    const auto m = Json::parse(out());
    EXPECT_EQ(m["gaps"].size(), 2u);
    EXPECT_TRUE(m["beta_tuned"].get<bool>());
}

TEST_F(Cli, ExportLaplacian) {
    make_data("binmat");
    ASSERT_EQ(cli("export-laplacian --train " + path("train.bin") + " --format binmat --out " + path("L.bin")), 0)
        << err();
    const Matrix L = io::load_binmat(path("L.bin")).values;
    ASSERT_EQ(L.rows(), 20);
    ASSERT_EQ(L.cols(), 20);
    EXPECT_LE((L - L.transpose()).cwiseAbs().maxCoeff(), 1e-12);

    make_data();
    ASSERT_EQ(cli("export-laplacian " + data_args() + " --mode transductive --out " + path("L.csv")), 0) << err();
    EXPECT_EQ(io::load_csv(path("L.csv")).features.size(), 60);
}

TEST_F(Cli, ReportsAreDeterministic) {
    make_data();
    const std::string args = "eval " + data_args() + " --max-iter 10 --mask-fraction 0.3 --seed 5";
    ASSERT_EQ(cli(args), 0);
    const auto first = strip_timing(Json::parse(out())).dump();
    ASSERT_EQ(cli(args), 0);
    EXPECT_EQ(strip_timing(Json::parse(out())).dump(), first);
}

TEST_F(Cli, BadArgumentsExitTwo) {
    make_data();
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("frobnicate"), 2);
    EXPECT_EQ(cli("eval " + data_args() + " --bogus"), 2);
    EXPECT_EQ(cli("eval " + data_args() + " --mode sideways"), 2);
    EXPECT_EQ(cli("eval " + data_args() + " --alpha -1"), 2);
    EXPECT_EQ(cli("eval " + data_args() + " --knn 50"), 2);
    EXPECT_EQ(cli("eval --train " + path("train.csv")), 2);
    EXPECT_EQ(cli("mask-sweep " + data_args() + " --fractions 0,1.5"), 2);
    EXPECT_EQ(cli("eval --help"), 0);
}

TEST_F(Cli, InputErrorsExitThree) {
    make_data();
    io::write_file(path("bad.csv"), "f0,f1,label\n1,2,0\n3,oops,1\n");
    EXPECT_EQ(cli("eval --train " + path("bad.csv") + " --test " + path("test.csv")), 3);
    EXPECT_NE(err().find("line 3"), std::string::npos) << err();
    EXPECT_EQ(cli("eval --train " + path("missing.csv") + " --test " + path("test.csv")), 3);
    io::write_file(path("nolabels.csv"), "1,2\n3,4\n");
    EXPECT_EQ(cli("eval --train " + path("nolabels.csv") + " --test " + path("test.csv")), 3);
    io::write_file(path("trunc.bin"), io::encode_binmat(Matrix::Ones(3, 3)).substr(0, 30));
    EXPECT_EQ(cli("train --format binmat --train " + path("trunc.bin")), 3);
}

TEST_F(Cli, OverflowExitsFour) {
    // squared distances overflow to infinity
    std::string text = "f0,f1,label\n";
    for (int i = 0; i < 12; ++i)
        text += std::to_string(i % 2 ? 1e200 : -1e200) + "," + std::to_string(i) + "," + std::to_string(i % 2) + "\n";
    io::write_file(path("huge.csv"), text);
    EXPECT_EQ(cli("train --knn 3 --train " + path("huge.csv")), 4) << err();
}
