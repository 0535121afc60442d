#pragma once

#include "lcps/data/image.hpp"

#include <filesystem>

namespace lcps {

/// Loads `<root>/images/*` with masks from `<root>/masks/<same name>`, resizing
/// images bilinearly and masks nearest-neighbour to side x side. Masks are binarized
/// at pixel value > 127. Samples are ordered by filename; the train/test split is a
/// seeded 80/20 partition, each part kept in filename order.
TaskDataset load_folder(const std::filesystem::path& root, Index side, std::uint64_t split_seed = 0,
                        double train_fraction = 0.8);

/// Writes a dataset in the layout load_folder reads (PGM files).
void write_folder(const std::filesystem::path& root, const TaskDataset& task);

} // namespace lcps
