#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bimslam/evaluation.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run(const std::string& args) {
    const std::string cmd = std::string(BIMSLAM_CLI) + " " + args + " 2>&1";
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

const std::string kData = BIMSLAM_TEST_DATA;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("bimslam_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Full pipeline: simulate, drift, anchor, diff, eval. Returns the working directory.
fs::path pipeline(const std::string& name) {
    const fs::path w = scratch(name);
    const std::string model = kData + "/two_room.obj";
    const CliResult sim = run("simulate --model " + model + " --extra " + kData + "/two_room_obstacles.obj --goals " +
                        kData + "/tour_goals.txt --seed 5 --out " + (w / "gt").string());
    EXPECT_EQ(sim.code, 0) << sim.output;
    const CliResult drift = run("drift --in " + (w / "gt").string() + " --out " + (w / "query").string() +
                          " --trans-drift 0.005 --yaw-drift 0.002 --seed 6");
    EXPECT_EQ(drift.code, 0) << drift.output;
    const CliResult anchor = run("anchor --ref " + (w / "gt").string() + " --query " + (w / "query").string() + " --out " +
                           (w / "anchor").string());
    EXPECT_EQ(anchor.code, 0) << anchor.output;
    const CliResult diff = run("diff --model " + model + " --map " + (w / "anchor" / "map.pc").string() + " --out " +
                         (w / "diff").string() + " --crop-z 0.05,2.5");
    EXPECT_EQ(diff.code, 0) << diff.output;
    const CliResult eval = run("eval --est " + (w / "anchor" / "query_world.txt").string() + " --gt " +
                         (w / "gt" / "trajectory.txt").string() + " --out " + (w / "eval.txt").string());
    EXPECT_EQ(eval.code, 0) << eval.output;
    return w;
}

class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        first_ = new fs::path(pipeline("first"));
        second_ = new fs::path(pipeline("second"));
    }
    static void TearDownTestSuite() {
        delete first_;
        delete second_;
    }
    static fs::path* first_;
    static fs::path* second_;
};

fs::path* Pipeline::first_ = nullptr;
fs::path* Pipeline::second_ = nullptr;

}  // namespace

TEST(Cli, EvalIdenticalFilesGivesZeroTable) {
    const fs::path w = scratch("eval");
    {
        std::ofstream os(w / "t.txt");
        os << "0 1 2 3 0 0 0 1\n1 4 5 6 0 0 0.6 0.8\n";
    }
    const CliResult r = run("eval --est " + (w / "t.txt").string() + " --gt " + (w / "t.txt").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("Trans. Error (cm)       0.000      0.000"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("Rot. Error (deg)        0.000      0.000"), std::string::npos) << r.output;
    const bimslam::AteReport rep = bimslam::parse_report(r.output);
    EXPECT_EQ(rep.n, 2u);
    EXPECT_EQ(rep.rmse_trans_cm, 0.0);
}

TEST(Cli, EvalLengthMismatchFails) {
    const fs::path w = scratch("eval_bad");
    {
        std::ofstream a(w / "a.txt"), b(w / "b.txt");
        a << "0 0 0 0 0 0 0 1\n";
        b << "0 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n";
    }
    const CliResult r = run("eval --est " + (w / "a.txt").string() + " --gt " + (w / "b.txt").string());
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find("error:"), std::string::npos) << r.output;
}

TEST(Cli, AnchorMissingRefNamesPath) {
    const fs::path w = scratch("missing");
    const std::string missing = (w / "no_such_session").string();
    const CliResult r = run("anchor --ref " + missing + " --query " + kData + "/golden_session --out " + (w / "o").string());
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST(Cli, UnknownSubcommandAndMissingFlags) {
    EXPECT_NE(run("frobnicate").code, 0);
    EXPECT_NE(run("diff --model x.obj").code, 0);
    const CliResult help = run("simulate --help");
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.output.find("--spacing"), std::string::npos);
}

TEST_F(Pipeline, ArtifactsPresent) {
    const fs::path& w = *first_;
    for (const char* f : {"gt/poses.graph", "gt/meta.txt", "gt/trajectory.txt", "gt/goals.txt", "query/poses.graph",
                          "anchor/gt.txt", "anchor/query_world.txt", "anchor/query_local.txt", "anchor/encounters.txt",
                          "anchor/map.pc", "anchor/report.txt", "diff/changes.obj", "diff/confirmed.pc",
                          "diff/positive.pc", "diff/report.txt", "eval.txt"}) {
        EXPECT_TRUE(fs::exists(w / f)) << f;
    }
    const bimslam::AteReport rep = bimslam::parse_report(slurp(w / "eval.txt"));
    EXPECT_GT(rep.n, 40u);
    EXPECT_LT(rep.rmse_trans_cm, 5.0);
    EXPECT_LT(rep.rmse_rot_deg, 0.5);
    EXPECT_NE(slurp(w / "diff" / "report.txt").find("clusters=2"), std::string::npos) << slurp(w / "diff" / "report.txt");
    EXPECT_TRUE(fs::exists(w / "diff" / "cluster_000.obj"));
    EXPECT_TRUE(fs::exists(w / "diff" / "cluster_001.obj"));
}

TEST_F(Pipeline, ByteIdenticalAcrossRuns) {
    for (const char* f : {"gt/poses.graph", "gt/trajectory.txt", "query/poses.graph", "anchor/gt.txt",
                          "anchor/query_world.txt", "anchor/query_local.txt", "anchor/encounters.txt",
                          "anchor/map.pc", "anchor/report.txt", "diff/changes.obj", "diff/report.txt", "eval.txt"}) {
        EXPECT_EQ(slurp(*first_ / f), slurp(*second_ / f)) << f;
    }
    for (const auto& e : fs::directory_iterator(*first_ / "diff")) {
        EXPECT_EQ(slurp(e.path()), slurp(*second_ / "diff" / e.path().filename())) << e.path();
    }
}
