#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cosmic/model.hpp"

// Parameter checkpoint, all integers and floats little-endian:
//
//   offset  size  field
//   0       8     magic "COSMICCK"
//   8       4     u32 format version (= 1)
//   12      4     u32 tensor count N
//   then N entries, in CosmicParams::named_parameters() order:
//           4     u32 name length L
//           L     name, ASCII, e.g. "gru_c.input_weights"
//           4     u32 rows
//           4     u32 cols
//           8·R·C row-major IEEE-754 binary64 payload
//
// Model dimensions and direction mode are recovered from the tensor shapes
// and names (a "backward." prefix marks a bidirectional model).
namespace cosmic {

inline constexpr char kCheckpointMagic[8] = {'C', 'O', 'S', 'M', 'I', 'C', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const CosmicParams& params);
CosmicParams decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const CosmicParams& params);
CosmicParams load_checkpoint(const std::filesystem::path& path);

}  // namespace cosmic
