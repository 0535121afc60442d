#include "lcps/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lcps {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

std::unique_ptr<FeatureExtractor> ExtractorSpec::make(Index side) const
{
    if (kind == "pooled")
        return std::make_unique<PooledStatsExtractor>(side, grid);
    if (kind == "precomputed")
        return std::make_unique<PrecomputedEmbeddings>(PrecomputedEmbeddings::load(embeddings));
    throw ConfigError("unknown extractor kind '" + kind + "'");
}

namespace {

class Writer {
public:
    template <typename T>
    void put(T v)
    {
        buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void str(const std::string& s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        buf_ += s;
    }
    void section(const char (&tag)[5], const Writer& body)
    {
        buf_.append(tag, 4);
        put<std::uint64_t>(body.buf_.size());
        buf_ += body.buf_;
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}

    template <typename T>
    T get()
    {
        T v{};
        raw(&v, sizeof v);
        return v;
    }
    void raw(void* out, std::size_t n)
    {
        if (n > data_.size() - pos_)
            fail("truncated data");
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }
    std::string str()
    {
        const auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    Reader sub(std::uint64_t n, const std::string& what)
    {
        if (n > data_.size() - pos_)
            fail("section " + what + " is truncated");
        Reader r(data_.substr(pos_, n), origin_ + " [" + what + "]");
        pos_ += n;
        return r;
    }
    bool done() const { return pos_ == data_.size(); }
    void expect_done()
    {
        if (!done())
            fail("trailing bytes");
    }
    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(origin_ + ": " + msg); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string origin_;
};

template <typename Scalar>
constexpr std::uint8_t dtype_tag()
{
    return std::is_same_v<Scalar, float> ? 0 : 1;
}

} // namespace

template <typename Scalar>
std::string serialize_checkpoint(const Checkpoint<Scalar>& ckpt)
{
    const ContinualState<Scalar>& st = ckpt.state;
    const UNetConfig& cfg = st.model.config();
    Writer out;
    out.bytes("LCPS", 4);
    out.put<std::uint32_t>(CheckpointFormat::kVersion);

    Writer conf;
    conf.put<std::uint64_t>(st.model.seed());
    for (Index v : {cfg.in_channels, cfg.out_channels, cfg.kernel_size, cfg.image_side, cfg.bottleneck_channels})
        conf.put<std::uint64_t>(static_cast<std::uint64_t>(v));
    conf.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.depth()));
    for (Index c : cfg.encoder_channels)
        conf.put<std::uint64_t>(static_cast<std::uint64_t>(c));
    conf.put<std::uint32_t>(static_cast<std::uint32_t>(st.model.head_count()));
    out.section("CONF", conf);

    Writer parm;
    parm.put<std::uint32_t>(static_cast<std::uint32_t>(st.model.params().size()));
    for (const auto& p : st.model.params()) {
        parm.str(p.name);
        parm.put<std::uint8_t>(dtype_tag<Scalar>());
        const Shape& s = p.value.shape();
        for (Index v : {s.n, s.c, s.h, s.w})
            parm.put<std::uint32_t>(static_cast<std::uint32_t>(v));
        parm.bytes(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(Scalar));
    }
    out.section("PARM", parm);

    Writer mask;
    mask.put<std::uint64_t>(st.registry.fingerprint());
    mask.put<std::uint64_t>(st.registry.kernel_count());
    mask.put<std::uint32_t>(static_cast<std::uint32_t>(st.registry.task_count()));
    for (const auto& m : st.registry.masks()) {
        mask.put<std::int32_t>(m.task_id);
        const auto& words = m.kernels.words();
        mask.put<std::uint64_t>(words.size());
        mask.bytes(words.data(), words.size() * sizeof(std::uint64_t));
    }
    out.section("MASK", mask);

    Writer lda;
    const LdaState& l = st.lda;
    lda.put<std::uint64_t>(static_cast<std::uint64_t>(l.dimension()));
    lda.put<std::uint32_t>(static_cast<std::uint32_t>(l.task_count()));
    lda.put<double>(l.finalized() ? l.decision().shrinkage : 0.0);
    for (const auto& m : l.means())
        lda.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    if (l.dimension() > 0)
        lda.bytes(l.covariance().data(), static_cast<std::size_t>(l.covariance().size()) * sizeof(double));
    lda.put<std::uint8_t>(l.finalized() ? 1 : 0);
    out.section("LDAS", lda);

    Writer task;
    task.put<std::uint32_t>(static_cast<std::uint32_t>(st.tasks.size()));
    for (const auto& n : st.tasks)
        task.str(n);
    out.section("TASK", task);

    Writer extr;
    extr.str(ckpt.extractor.kind);
    extr.put<std::uint64_t>(static_cast<std::uint64_t>(ckpt.extractor.grid));
    extr.str(ckpt.extractor.embeddings);
    out.section("EXTR", extr);

    Writer mani;
    mani.put<std::uint64_t>(ckpt.manifest.size());
    mani.bytes(ckpt.manifest.data(), ckpt.manifest.size());
    out.section("MANI", mani);
    return out.data();
}

template <typename Scalar>
Checkpoint<Scalar> deserialize_checkpoint(const std::string& bytes, const std::string& origin)
{
    Reader in(bytes, origin);
    char magic[4];
    if (bytes.size() < 4)
        in.fail("file too short");
    in.raw(magic, 4);
    if (std::memcmp(magic, "LCPS", 4) != 0)
        in.fail("not a checkpoint (bad magic)");
    const auto version = in.get<std::uint32_t>();
    if (version != CheckpointFormat::kVersion)
        in.fail("unsupported format version " + std::to_string(version) + " (this build reads version "
                + std::to_string(CheckpointFormat::kVersion) + ")");

    auto next = [&](const char* tag) {
        char t[4];
        in.raw(t, 4);
        if (std::memcmp(t, tag, 4) != 0)
            in.fail(std::string("expected section ") + tag + ", found '" + std::string(t, 4) + "'");
        const auto len = in.get<std::uint64_t>();
        return in.sub(len, tag);
    };

    Reader conf = next("CONF");
    const auto seed = conf.get<std::uint64_t>();
    UNetConfig cfg;
    cfg.in_channels = static_cast<Index>(conf.get<std::uint64_t>());
    cfg.out_channels = static_cast<Index>(conf.get<std::uint64_t>());
    cfg.kernel_size = static_cast<Index>(conf.get<std::uint64_t>());
    cfg.image_side = static_cast<Index>(conf.get<std::uint64_t>());
    cfg.bottleneck_channels = static_cast<Index>(conf.get<std::uint64_t>());
    const auto depth = conf.get<std::uint32_t>();
    if (depth > 64)
        conf.fail("implausible depth");
    cfg.encoder_channels.resize(depth);
    for (auto& c : cfg.encoder_channels)
        c = static_cast<Index>(conf.get<std::uint64_t>());
    const auto heads = conf.get<std::uint32_t>();
    conf.expect_done();
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        conf.fail(e.what());
    }
    if (heads < 1 || heads > 1u << 16)
        conf.fail("implausible head count");

    Checkpoint<Scalar> ck{{build_unet<Scalar>(cfg, seed), MaskRegistry{}, LdaState{}, {}}, {}, {}};
    UNetModel<Scalar>& model = ck.state.model;
    while (model.head_count() < heads)
        model.add_head();

    Reader parm = next("PARM");
    const auto count = parm.get<std::uint32_t>();
    if (count != model.params().size())
        parm.fail("holds " + std::to_string(count) + " tensors, architecture has "
                  + std::to_string(model.params().size()));
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string name = parm.str();
        auto& p = model.params()[k];
        if (name != p.name)
            parm.fail("tensor " + std::to_string(k) + " is '" + name + "', expected '" + p.name + "'");
        const auto tag = parm.get<std::uint8_t>();
        Shape s;
        s.n = parm.get<std::uint32_t>();
        s.c = parm.get<std::uint32_t>();
        s.h = parm.get<std::uint32_t>();
        s.w = parm.get<std::uint32_t>();
        if (!(s == p.value.shape()))
            parm.fail("tensor '" + name + "' has shape " + s.str() + ", expected " + p.value.shape().str());
        if (tag == 0) {
            std::vector<float> v(static_cast<std::size_t>(s.count()));
            parm.raw(v.data(), v.size() * sizeof(float));
            for (std::size_t i = 0; i < v.size(); ++i)
                p.value[static_cast<Index>(i)] = static_cast<Scalar>(v[i]);
        } else if (tag == 1) {
            std::vector<double> v(static_cast<std::size_t>(s.count()));
            parm.raw(v.data(), v.size() * sizeof(double));
            for (std::size_t i = 0; i < v.size(); ++i)
                p.value[static_cast<Index>(i)] = static_cast<Scalar>(v[i]);
        } else {
            parm.fail("tensor '" + name + "' has unknown dtype tag " + std::to_string(tag));
        }
    }
    parm.expect_done();

    Reader mask = next("MASK");
    const auto fingerprint = mask.get<std::uint64_t>();
    const auto kernels = mask.get<std::uint64_t>();
    const KernelSpace& space = model.kernel_space();
    if (fingerprint != space.fingerprint() || kernels != space.total())
        mask.fail("masks were recorded for a different architecture");
    ck.state.registry = MaskRegistry(space);
    const auto tasks = mask.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < tasks; ++t) {
        const auto id = mask.get<std::int32_t>();
        const auto nwords = mask.get<std::uint64_t>();
        if (nwords != (kernels + 63) / 64)
            mask.fail("mask " + std::to_string(id) + " has the wrong word count");
        std::vector<std::uint64_t> words(nwords);
        mask.raw(words.data(), nwords * sizeof(std::uint64_t));
        try {
            ck.state.registry.freeze_task(id, TaskMask{id, KernelSet::from_words(kernels, std::move(words))});
        } catch (const Error& e) {
            mask.fail(e.what());
        }
    }
    mask.expect_done();

    Reader lda = next("LDAS");
    const auto d = static_cast<Index>(lda.get<std::uint64_t>());
    const auto lt = lda.get<std::uint32_t>();
    const auto shrinkage = lda.get<double>();
    if (d > 0) {
        if (d > (1 << 20))
            lda.fail("implausible embedding dimension");
        std::vector<Eigen::VectorXd> means(lt, Eigen::VectorXd(d));
        for (auto& m : means)
            lda.raw(m.data(), static_cast<std::size_t>(d) * sizeof(double));
        Eigen::MatrixXd cov(d, d);
        lda.raw(cov.data(), static_cast<std::size_t>(d * d) * sizeof(double));
        ck.state.lda = LdaState::restore(d, std::move(means), std::move(cov));
    }
    const auto finalized = lda.get<std::uint8_t>();
    lda.expect_done();
    if (finalized) {
        try {
            ck.state.lda.finalize(shrinkage);
        } catch (const Error& e) {
            lda.fail(e.what());
        }
    }

    Reader task = next("TASK");
    const auto ntasks = task.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < ntasks; ++t)
        ck.state.tasks.push_back(task.str());
    task.expect_done();

    Reader extr = next("EXTR");
    ck.extractor.kind = extr.str();
    ck.extractor.grid = static_cast<Index>(extr.get<std::uint64_t>());
    ck.extractor.embeddings = extr.str();
    extr.expect_done();

    Reader mani = next("MANI");
    const auto mlen = mani.get<std::uint64_t>();
    ck.manifest.resize(mlen);
    mani.raw(ck.manifest.data(), mlen);
    mani.expect_done();
    in.expect_done();
    return ck;
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ckpt)
{
    const std::string bytes = serialize_checkpoint(ckpt);
    // Write-then-rename so an interrupted save never clobbers the previous file.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IngestionError("cannot write checkpoint '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IngestionError("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint<Scalar>(ss.str(), path.string());
}

template std::string serialize_checkpoint(const Checkpoint<float>&);
template std::string serialize_checkpoint(const Checkpoint<double>&);
template Checkpoint<float> deserialize_checkpoint(const std::string&, const std::string&);
template Checkpoint<double> deserialize_checkpoint(const std::string&, const std::string&);
template void save_checkpoint(const std::filesystem::path&, const Checkpoint<float>&);
template void save_checkpoint(const std::filesystem::path&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

} // namespace lcps
