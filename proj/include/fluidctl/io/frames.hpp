#pragma once

#include "fluidctl/sim/pbf.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fluidctl::io {

// Frame file layout, all little endian:
//   bytes  0..7   magic "PBFFRM01"
//   bytes  8..11  u32 dim (2 or 3)
//   bytes 12..15  u32 fields per record (2: position, velocity)
//   bytes 16..23  u64 particle count
//   bytes 24..31  u64 step index
//   then count records of dim f64 position followed by dim f64 velocity.
inline constexpr std::size_t kFrameHeaderBytes = 32;

struct Frame {
  int dim = 2;
  std::uint64_t step = 0;
  sim::ParticleState state;
};

std::vector<std::uint8_t> encode_frame(const sim::ParticleState& state, int dim, std::uint64_t step);
Frame decode_frame(const std::vector<std::uint8_t>& bytes);  // throws ValidationError

void write_frame(const std::string& path, const sim::ParticleState& state, int dim,
                 std::uint64_t step);
Frame read_frame(const std::string& path);

/// Path of frame `step` under a prefix: "<prefix>_000042.bin".
std::string frame_path(const std::string& prefix, std::uint64_t step);

/// Writes frames first_step .. first_step + traj.size() - 1 and returns the
/// paths. With `ply` set, an ASCII PLY file is written next to each frame.
std::vector<std::string> export_frames(const sim::Trajectory& traj, const std::string& prefix, int dim,
                                       std::uint64_t first_step = 0, bool ply = false);

/// Reads consecutive frames from step 0 until the first missing file.
sim::Trajectory load_frames(const std::string& prefix);

void write_ply(const std::string& path, const sim::ParticleState& state, int dim);

}  // namespace fluidctl::io
