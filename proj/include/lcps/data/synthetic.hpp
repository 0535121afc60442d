#pragma once

#include "lcps/core/rng.hpp"
#include "lcps/data/image.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace lcps {

/// Desk-scale stand-ins for surface defect families. Each kind has its own
/// background material (level and texture) and defect geometry.
enum class SyntheticKind { scratches, patches, inclusions, blowholes, cracks };

std::string_view kind_name(SyntheticKind kind);
/// Throws ConfigError for unknown names.
SyntheticKind parse_kind(std::string_view name);
std::vector<SyntheticKind> all_kinds();

/// One rendered image with its ground-truth mask. Defect coverage is kept within
/// [0.5%, 20%] of the image by construction.
ImageSample render_sample(SyntheticKind kind, Index side, Rng& rng, std::string id);

/// `n` samples, deterministic in (kind, n, side, seed); the first 80% (rounded down,
/// at least one sample in each split) form the training split.
TaskDataset generate_task(SyntheticKind kind, int n, Index side, std::uint64_t seed, double train_fraction = 0.8);

} // namespace lcps
