#pragma once

#include "lcps/engine/continual.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace lcps {

/// How to rebuild the task classifier's feature extractor.
struct ExtractorSpec {
    std::string kind = "pooled";  // "pooled" or "precomputed"
    Index grid = 4;
    std::string embeddings;       // file path for "precomputed"

    std::unique_ptr<FeatureExtractor> make(Index side) const;
    bool operator==(const ExtractorSpec&) const = default;
};

template <typename Scalar>
struct Checkpoint {
    ContinualState<Scalar> state;
    ExtractorSpec extractor;
    std::string manifest;
};

/// Binary layout, all integers little-endian:
///   "LCPS", u32 version
///   then sections, each: 4-byte tag, u64 payload length, payload
///   CONF  u64 seed, u64 in, out, kernel, side, bottleneck, u32 depth, depth x u64 channels, u32 heads
///   PARM  u32 count; per tensor: u32 name length, name, u8 dtype (0 f32, 1 f64), 4 x u32 shape, data
///   MASK  u64 fingerprint, u64 kernel count, u32 tasks; per task: i32 id, u64 words, words x u64
///   LDAS  u64 d, u32 tasks, f64 shrinkage, means (tasks x d f64), covariance (d x d f64), u8 finalized
///   TASK  u32 count; per task: u32 length, name
///   EXTR  u32 kind length, kind, u64 grid, u32 path length, path
///   MANI  u64 length, manifest text
class CheckpointFormat {
public:
    static constexpr std::uint32_t kVersion = 1;
};

template <typename Scalar>
std::string serialize_checkpoint(const Checkpoint<Scalar>& ckpt);
template <typename Scalar>
Checkpoint<Scalar> deserialize_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ckpt);
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

} // namespace lcps
