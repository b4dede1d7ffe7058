#include "tensordec/io.hpp"
#include "tensordec/jennrich.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace tensordec;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("tensordec-cli-" + std::to_string(::getpid()) + "-" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) const {
        const std::string cmd = std::string("\"") + TENSORDEC_CLI + "\" " + args + " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string path(const std::string& rel) const { return (dir_ / rel).string(); }
    nlohmann::json load(const std::string& rel) const {
        std::ifstream in(dir_ / rel);
        return nlohmann::json::parse(in);
    }

    fs::path dir_;
};

TEST_F(Cli, SynthThenDecomposeRoundTrip) {
    ASSERT_EQ(run("synth --out " + path("s") + " --shape 8,8,8 --rank 6 --seed 2"), 0);
    ASSERT_EQ(run("decompose --out " + path("d") + " --in " + path("s/tensor.tnsr") + " --rank 6 --truth " +
                  path("s/truth.json")),
              0);
    EXPECT_LT(load("d/report.json")["max_error"].get<double>(), 1e-6);
    ASSERT_EQ(run("eval --out " + path("e") + " --found " + path("d/decomposition.json") + " --truth " +
                  path("s/truth.json")),
              0);
    EXPECT_LT(load("e/report.json")["max_error"].get<double>(), 1e-6);
    const auto manifest = load("d/manifest.json");
    EXPECT_EQ(manifest["subcommand"], "decompose");
    EXPECT_TRUE(manifest["outputs"].contains("decomposition.json"));
}

TEST_F(Cli, NoiseIsBoundedEntrywise) {
    ASSERT_EQ(run("synth --out " + path("s") + " --shape 4,5,6 --rank 3 --noise 1e-9 --seed 1"), 0);
    const DenseTensor noisy = read_tnsr(fs::path(path("s/tensor.tnsr")));
    const DenseTensor clean = synthesize(read_decomposition(path("s/truth.json")));
    EXPECT_LE(max_abs(noisy - clean), 1e-9);
}

TEST_F(Cli, FlattenJennrichOnOrderFive) {
    ASSERT_EQ(run("synth --out " + path("s") + " --order 5 --n 4 --rank 8 --model smoothed --rho 0.5 --seed 3"), 0);
    EXPECT_TRUE(fs::exists(path("s/base.json")));
    ASSERT_EQ(run("decompose --out " + path("d") + " --in " + path("s/tensor.tnsr") +
                  " --method flatten-jennrich --rank 8 --groups 1,2/3,4/5"),
              0);
    EXPECT_EQ(load("d/decomposition.json")["order"], 5);
}

TEST_F(Cli, MissingInputExitsTwoWithoutOutputs) {
    EXPECT_EQ(run("decompose --out " + path("d") + " --in " + path("nope.tnsr")), 2);
    EXPECT_FALSE(fs::exists(path("d/report.json")));
    EXPECT_FALSE(fs::exists(path("d/manifest.json")));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("decompose --bogus"), 2);
    ASSERT_EQ(run("synth --out " + path("s") + " --shape 4,4,4 --rank 3"), 0);
    EXPECT_EQ(run("decompose --out " + path("d") + " --in " + path("s/tensor.tnsr") + " --rank 9"), 4);
    EXPECT_EQ(run("decompose --out " + path("d") + " --in " + path("s/tensor.tnsr") +
                  " --method flatten-jennrich --groups 1/2"),
              2);
    EXPECT_FALSE(fs::exists(path("d")) && !fs::is_empty(path("d")));
}

TEST_F(Cli, KrSigmaWritesOneRowPerTrial) {
    ASSERT_EQ(run("lab kr-sigma --out " + path("k") + " --n 8 --k 32 --l 2 --trials 500"), 0);
    std::ifstream in(path("k/values.csv"));
    std::string line;
    int rows = -1;  // header
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 500);
    EXPECT_EQ(load("k/summary.json")["trials"], 500);
}

TEST_F(Cli, PivotDumpPassesItsCheck) {
    ASSERT_EQ(run("lab pivot --out " + path("p") + " --n 32 --dim 8"), 0);
    const auto j = load("p/pivot.json");
    EXPECT_TRUE(j["check"]["pass"].get<bool>());
    EXPECT_EQ(j["pivots"].size(), 8u);
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
    ASSERT_EQ(run("lab pivot --out " + path("a") + " --n 8 --dim 3 --seed 17"), 0);
    ASSERT_EQ(::setenv("TENSORDEC_SEED", "17", 1), 0);
    ASSERT_EQ(run("lab pivot --out " + path("b") + " --n 8 --dim 3"), 0);
    ::unsetenv("TENSORDEC_SEED");
    EXPECT_EQ(load("a/pivot.json"), load("b/pivot.json"));
    EXPECT_EQ(load("b/manifest.json")["seed"], 17);
}

}  // namespace
