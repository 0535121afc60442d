#include "lcps/data/synthetic.hpp"
#include "lcps/io/checkpoint.hpp"
#include "lcps/io/config.hpp"
#include "lcps/io/svg.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

using namespace lcps;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("lcps_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

template <typename Scalar>
Checkpoint<Scalar> small_checkpoint(const std::vector<TaskDataset>& tasks)
{
    ContinualConfig c;
    c.unet = {{4, 8}, 8, 1, 1, 3, 16};
    c.train.epochs = 2;
    c.train.batch_size = 4;
    c.prune.num_iters = 1;
    c.prune.retrain_epochs = 1;
    PooledStatsExtractor ex(16, 2);
    auto r = run_continual<Scalar>(tasks, c, ex);
    return {std::move(r.state), ExtractorSpec{"pooled", 2, ""}, "# manifest echo\nseed = 0\n"};
}

std::vector<TaskDataset> two_tasks()
{
    return {generate_task(SyntheticKind::scratches, 8, 16, 1), generate_task(SyntheticKind::patches, 8, 16, 1)};
}

class CheckpointFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        tasks_ = new std::vector<TaskDataset>(two_tasks());
        ck_ = new Checkpoint<float>(small_checkpoint<float>(*tasks_));
    }
    static void TearDownTestSuite()
    {
        delete ck_;
        delete tasks_;
    }
    static std::vector<TaskDataset>* tasks_;
    static Checkpoint<float>* ck_;
};

std::vector<TaskDataset>* CheckpointFixture::tasks_ = nullptr;
Checkpoint<float>* CheckpointFixture::ck_ = nullptr;

} // namespace

TEST(Config, DefaultsRoundTripThroughText)
{
    RunConfig a;
    RunConfig b;
    b.continual.seed = 99;
    b.merge_text(a.to_text());
    EXPECT_EQ(b.to_text(), a.to_text());
    EXPECT_EQ(b.continual.seed, 0u);
    for (const auto& k : RunConfig::keys())
        EXPECT_NE(a.to_text().find(k + " = "), std::string::npos) << k;
}

TEST(Config, LaterSourcesOverrideEarlierOnes)
{
    RunConfig c;
    c.merge_text("alpha = 0.8\nepochs = 7 # trailing comment\n\n# full-line comment\n");
    c.merge_text("alpha = 0.95");
    c.set("encoder_channels", "4, 8");
    EXPECT_EQ(c.continual.prune.alpha, 0.95);
    EXPECT_EQ(c.continual.train.epochs, 7);
    EXPECT_EQ(c.continual.unet.encoder_channels, (std::vector<Index>{4, 8}));
    EXPECT_EQ(c.get("encoder_channels"), "4,8");
}

TEST(Config, FloatsAreWrittenExactly)
{
    RunConfig c;
    c.continual.train.adam.learning_rate = 0.1 + 0.2;
    RunConfig d;
    d.merge_text(c.to_text());
    EXPECT_EQ(d.continual.train.adam.learning_rate, 0.1 + 0.2);
}

TEST(Config, Errors)
{
    RunConfig c;
    EXPECT_THROW(c.set("alpah", "0.9"), ConfigError);
    EXPECT_THROW(c.set("epochs", "ten"), ConfigError);
    EXPECT_THROW(c.set("epochs", "10x"), ConfigError);
    EXPECT_THROW(c.set("reinit_free", "maybe"), ConfigError);
    EXPECT_THROW(c.merge_text("alpha 0.9"), ConfigError);
    EXPECT_THROW(c.merge_text(" = 3"), ConfigError);
    EXPECT_THROW(c.merge_file("/nonexistent/run.conf"), ConfigError);
    c.set("alpha", "1.0");
    EXPECT_THROW(c.validate(), ConfigError);
    RunConfig d;
    d.set("importance_samples", "-1");
    EXPECT_THROW(d.validate(), ConfigError);
    try {
        RunConfig().merge_text("seed = 1\nbogus = 2\n", "run.conf");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
}

TEST(Manifest, TextRoundTrip)
{
    RunManifest m;
    m.method = "joint";
    m.data = "/data/sd";
    m.config.continual.seed = 42;
    m.config.task_order = {"patches", "scratches"};
    m.artifacts["checkpoint"] = "out/checkpoint.lcps";
    const RunManifest back = RunManifest::parse(m.to_text());
    EXPECT_EQ(back.to_text(), m.to_text());
    EXPECT_EQ(back.method, "joint");
    EXPECT_EQ(back.config.task_order, m.config.task_order);
    EXPECT_EQ(back.artifacts.at("checkpoint"), "out/checkpoint.lcps");
    EXPECT_EQ(back.tool_version, RunManifest::kToolVersion);
}

TEST(Manifest, FileRoundTrip)
{
    const fs::path dir = scratch_dir("manifest");
    RunManifest m;
    m.data = "d";
    m.save(dir / "manifest.txt");
    EXPECT_EQ(RunManifest::load(dir / "manifest.txt").to_text(), m.to_text());
    EXPECT_THROW(RunManifest::load(dir / "missing.txt"), ConfigError);
}

TEST_F(CheckpointFixture, SaveLoadSaveIsByteIdentical)
{
    const std::string first = serialize_checkpoint(*ck_);
    const Checkpoint<float> back = deserialize_checkpoint<float>(first);
    EXPECT_EQ(serialize_checkpoint(back), first);
    EXPECT_EQ(back.state.tasks, ck_->state.tasks);
    EXPECT_EQ(back.extractor, ck_->extractor);
    EXPECT_EQ(back.manifest, ck_->manifest);

    const fs::path dir = scratch_dir("ckpt");
    save_checkpoint(dir / "a.lcps", *ck_);
    save_checkpoint(dir / "b.lcps", load_checkpoint<float>(dir / "a.lcps"));
    EXPECT_EQ(read_bytes(dir / "a.lcps"), read_bytes(dir / "b.lcps"));
    EXPECT_FALSE(fs::exists(dir / "a.lcps.tmp"));
}

TEST_F(CheckpointFixture, MasksAndParametersSurvive)
{
    const Checkpoint<float> back = deserialize_checkpoint<float>(serialize_checkpoint(*ck_));
    ASSERT_EQ(back.state.task_count(), ck_->state.task_count());
    for (int t = 0; t < 2; ++t)
        EXPECT_TRUE(back.state.registry.active_mask(t).kernels == ck_->state.registry.active_mask(t).kernels);
    EXPECT_TRUE(back.state.registry.frozen() == ck_->state.registry.frozen());
    ASSERT_EQ(back.state.model.params().size(), ck_->state.model.params().size());
    for (std::size_t p = 0; p < back.state.model.params().size(); ++p)
        EXPECT_TRUE((back.state.model.params()[p].value.array() == ck_->state.model.params()[p].value.array()).all());
}

TEST_F(CheckpointFixture, EvaluationIsUnchangedByRoundTrip)
{
    const Checkpoint<float> back = deserialize_checkpoint<float>(serialize_checkpoint(*ck_));
    const auto ex = back.extractor.make(16);
    MetricsMatrix before({"a", "b"}, {Routing::oracle, Routing::lda});
    MetricsMatrix after = before;
    evaluate_step(ck_->state, *ex, std::span<const TaskDataset>(*tasks_), 1, 0.5, before);
    evaluate_step(back.state, *ex, std::span<const TaskDataset>(*tasks_), 1, 0.5, after);
    EXPECT_EQ(after.csv(), before.csv());
}

TEST_F(CheckpointFixture, DoublePrecisionRoundTrip)
{
    Checkpoint<double> d{{ck_->state.model.cast<double>(), ck_->state.registry, ck_->state.lda, ck_->state.tasks},
                         ck_->extractor,
                         ck_->manifest};
    const std::string bytes = serialize_checkpoint(d);
    EXPECT_EQ(serialize_checkpoint(deserialize_checkpoint<double>(bytes)), bytes);
}

TEST_F(CheckpointFixture, CorruptionIsAFormatError)
{
    const std::string good = serialize_checkpoint(*ck_);
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint<float>(bad_magic), FormatError);

    std::string bad_version = good;
    const std::uint32_t v = CheckpointFormat::kVersion + 1;
    std::memcpy(bad_version.data() + 4, &v, sizeof v);
    try {
        deserialize_checkpoint<float>(bad_version);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }

    for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{8}, std::size_t{20}, good.size() / 2,
                            good.size() - 1})
        EXPECT_THROW(deserialize_checkpoint<float>(good.substr(0, len)), FormatError) << "length " << len;
    EXPECT_THROW(deserialize_checkpoint<float>(good + "x"), FormatError);
}

TEST(Checkpoint, MissingFile)
{
    EXPECT_THROW(load_checkpoint<float>("/nonexistent/x.lcps"), IngestionError);
}

TEST(Checkpoint, ExtractorSpec)
{
    EXPECT_EQ(ExtractorSpec{}.make(16)->dimension(), PooledStatsExtractor(16, 4).dimension());
    EXPECT_THROW((ExtractorSpec{"imagenet", 4, ""}.make(16)), ConfigError);
}

TEST(Svg, OnePolylinePerSeries)
{
    const std::string svg = line_chart_svg("a<b", "step", "mIoU", {{"one", {0.1, 0.5}}, {"two", {0.9, 0.8, 0.7}}});
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
    std::size_t count = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
        ++count;
    EXPECT_EQ(count, 2u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
