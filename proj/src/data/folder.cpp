#include "lcps/data/folder.hpp"

#include "lcps/core/rng.hpp"

#include <algorithm>
#include <numeric>

namespace lcps {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p)
{
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".png" || e == ".pgm" || e == ".pnm";
}

} // namespace

TaskDataset load_folder(const fs::path& root, Index side, std::uint64_t split_seed, double train_fraction)
{
    const fs::path images = root / "images";
    const fs::path masks = root / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks))
        throw IngestionError("dataset '" + root.string() + "': expected images/ and masks/ subdirectories");
    if (side < 1)
        throw ConfigError("dataset: side must be positive");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && is_image_file(entry.path()))
            files.push_back(entry.path());
    if (files.empty())
        throw IngestionError("dataset '" + root.string() + "': no images found");
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    std::vector<ImageSample> samples;
    for (const auto& f : files) {
        const fs::path m = masks / f.filename();
        if (!fs::is_regular_file(m))
            throw IngestionError("dataset '" + root.string() + "': missing mask for image '" + f.filename().string()
                                 + "'");
        const Image8 raw_image = read_image8(f);
        const Image8 raw_mask = read_image8(m);
        if (raw_image.rows() != raw_mask.rows() || raw_image.cols() != raw_mask.cols())
            throw IngestionError("dataset '" + root.string() + "': image and mask sizes differ for '"
                                 + f.filename().string() + "'");
        ImageSample s;
        s.id = f.stem().string();
        s.image = resize_bilinear(to_gray(raw_image), side, side);
        const BinaryMask binary = (raw_mask > 127).cast<std::uint8_t>();
        s.mask = resize_nearest(binary, side, side);
        samples.push_back(std::move(s));
    }

    TaskDataset task;
    task.name = root.filename().string();
    if (task.name.empty())
        task.name = root.parent_path().filename().string();
    const std::size_t n = samples.size();
    std::size_t n_test = n - static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    if (n >= 2)
        n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    else
        n_test = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(split_seed, "split", fnv1a(task.name));
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i)
        is_test[order[i]] = true;
    for (std::size_t i = 0; i < n; ++i)
        (is_test[i] ? task.test : task.train).push_back(std::move(samples[i]));
    task.validate();
    return task;
}

void write_folder(const fs::path& root, const TaskDataset& task)
{
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    auto write = [&](const ImageSample& s) {
        write_image8(root / "images" / (s.id + ".pgm"), to_image8(s.image));
        write_image8(root / "masks" / (s.id + ".pgm"), mask_to_image8(s.mask));
    };
    for (const auto& s : task.train)
        write(s);
    for (const auto& s : task.test)
        write(s);
}

} // namespace lcps
