#include "lcps/cli/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args)
{
    args.insert(args.begin(), "lcps");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = lcps::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

const std::vector<std::string> kTiny{"--image-size", "16",       "--encoder-channels", "4,8", "--bottleneck-channels",
                                     "8",            "--epochs", "2",                  "--num-iters", "1",
                                     "--retrain-epochs", "1",    "--batch-size",       "4"};

std::vector<std::string> with_tiny(std::vector<std::string> args)
{
    args.insert(args.end(), kTiny.begin(), kTiny.end());
    return args;
}

class CliRun : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        root_ = new fs::path(fs::temp_directory_path() / "lcps_cli");
        fs::remove_all(*root_);
        const Outcome g = run({"generate", "--out", (*root_ / "data").string(), "--kinds", "scratches,patches",
                               "--count", "8", "--image-size", "16"});
        ASSERT_EQ(g.code, 0) << g.err;
        train_ = new Outcome(run(with_tiny({"train", "--data", (*root_ / "data").string(), "--out",
                                            (*root_ / "run").string()})));
    }
    static void TearDownTestSuite()
    {
        delete train_;
        delete root_;
    }
    static fs::path* root_;
    static Outcome* train_;
};

fs::path* CliRun::root_ = nullptr;
Outcome* CliRun::train_ = nullptr;

} // namespace

TEST(Cli, UsageErrorsExitWithOne)
{
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"bogus"}).code, 1);
    EXPECT_EQ(run({"train", "--no-such-flag"}).code, 1);
    EXPECT_EQ(run({"generate"}).code, 1);
    EXPECT_EQ(run({"generate", "--out", "/tmp/x", "--kinds", "rust"}).code, 1);
    EXPECT_EQ(run({"generate", "--out", "/tmp/x", "--alpha", "2"}).code, 1);
    EXPECT_EQ(run({"predict", "--checkpoint", "/nonexistent.lcps", "--image", "/nonexistent.png"}).code, 1);
    EXPECT_EQ(run({"train", "--data", "/nonexistent"}).code, 1);
    EXPECT_EQ(run({"train"}).code, 1);
}

TEST(Cli, HelpAndVersionSucceed)
{
    EXPECT_EQ(run({"--help"}).code, 0);
    const Outcome v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("lcps"), std::string::npos);
}

TEST_F(CliRun, TrainWritesArtifacts)
{
    ASSERT_EQ(train_->code, 0) << train_->err;
    for (const char* f : {"checkpoint.lcps", "metrics.csv", "manifest.txt"})
        EXPECT_TRUE(fs::is_regular_file(*root_ / "run" / f)) << f;
    EXPECT_NE(train_->out.find("step 2"), std::string::npos);
    const auto csv = lines(slurp(*root_ / "run" / "metrics.csv"));
    ASSERT_FALSE(csv.empty());
    EXPECT_EQ(csv[0], "step,task,miou,routing,task_id_accuracy");
    EXPECT_EQ(csv.size(), 1u + 2u + 2u + 3u + 3u);
}

TEST_F(CliRun, ManifestRerunIsByteIdentical)
{
    const Outcome again = run({"train", "--manifest", (*root_ / "run" / "manifest.txt").string(), "--out",
                               (*root_ / "rerun").string()});
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_EQ(slurp(*root_ / "rerun" / "metrics.csv"), slurp(*root_ / "run" / "metrics.csv"));
}

TEST_F(CliRun, EvaluateReproducesFinalTrainingRow)
{
    const Outcome e = run({"evaluate", "--checkpoint", (*root_ / "run" / "checkpoint.lcps").string(), "--data",
                           (*root_ / "data").string()});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto eval = lines(e.out);
    const std::string train = slurp(*root_ / "run" / "metrics.csv");
    ASSERT_GT(eval.size(), 1u);
    for (std::size_t i = 1; i < eval.size(); ++i)
        EXPECT_NE(train.find(eval[i] + "\n"), std::string::npos) << eval[i];

    EXPECT_EQ(run({"evaluate", "--checkpoint", (*root_ / "run" / "checkpoint.lcps").string(), "--data",
                   (*root_ / "data").string(), "--routing", "random"})
                  .code,
              1);
}

TEST_F(CliRun, PredictWritesMask)
{
    const fs::path image = *root_ / "data" / "patches" / "images" / "patches_0000.pgm";
    ASSERT_TRUE(fs::is_regular_file(image)) << "generated file naming changed";
    const fs::path mask = *root_ / "pred.png";
    const Outcome p = run({"predict", "--checkpoint", (*root_ / "run" / "checkpoint.lcps").string(), "--image",
                           image.string(), "--out", mask.string()});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(p.out.rfind("task ", 0), 0u);
    EXPECT_TRUE(fs::is_regular_file(mask));
}

TEST_F(CliRun, CorruptCheckpointIsARuntimeError)
{
    const fs::path bad = *root_ / "bad.lcps";
    std::string bytes = slurp(*root_ / "run" / "checkpoint.lcps");
    bytes[0] = 'X';
    std::ofstream(bad, std::ios::binary) << bytes;
    const Outcome e = run({"evaluate", "--checkpoint", bad.string(), "--data", (*root_ / "data").string()});
    EXPECT_EQ(e.code, 2);
    EXPECT_NE(e.err.find("magic"), std::string::npos);
}

TEST_F(CliRun, BaselineTraining)
{
    const Outcome b = run(with_tiny({"train", "--method", "finetune", "--data", (*root_ / "data").string(), "--out",
                                     (*root_ / "ft").string()}));
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_NE(slurp(*root_ / "ft" / "metrics.csv").find(",none,"), std::string::npos);
    EXPECT_EQ(run(with_tiny({"train", "--method", "ewc", "--data", (*root_ / "data").string()})).code, 1);
}

TEST_F(CliRun, SweepWritesCsvAndChart)
{
    const Outcome s = run(with_tiny({"sweep", "--data", (*root_ / "data").string(), "--out",
                                     (*root_ / "sweep").string(), "--alphas", "0.85,0.95", "--iters", "1"}));
    ASSERT_EQ(s.code, 0) << s.err;
    const auto csv = lines(slurp(*root_ / "sweep" / "sweep.csv"));
    ASSERT_EQ(csv.size(), 1u + 2u * 2u);
    EXPECT_EQ(csv[0], "alpha,num_iters,step,avg_miou,free_fraction,status");
    EXPECT_NE(slurp(*root_ / "sweep" / "sweep.svg").find("<svg"), std::string::npos);
}
