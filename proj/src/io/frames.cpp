#include "fluidctl/io/frames.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace fluidctl::io {

namespace {

constexpr char kMagic[8] = {'P', 'B', 'F', 'F', 'R', 'M', '0', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const sim::ParticleState& state, int dim, std::uint64_t step) {
  const std::size_t n = state.size();
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + n * dim * 2 * 8);
  for (const char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, static_cast<std::uint32_t>(dim));
  put_u32(out, 2);
  put_u64(out, n);
  put_u64(out, step);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < dim; ++a) put_u64(out, std::bit_cast<std::uint64_t>(state.x[i][a]));
    for (int a = 0; a < dim; ++a) put_u64(out, std::bit_cast<std::uint64_t>(state.v[i][a]));
  }
  return out;
}

Frame decode_frame(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFrameHeaderBytes || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ValidationError("frame: bad header");
  }
  Frame f;
  const std::uint32_t dim = get_u32(bytes.data() + 8);
  const std::uint32_t fields = get_u32(bytes.data() + 12);
  const std::uint64_t count = get_u64(bytes.data() + 16);
  f.step = get_u64(bytes.data() + 24);
  if ((dim != 2 && dim != 3) || fields != 2) throw ValidationError("frame: unsupported layout");
  if ((bytes.size() - kFrameHeaderBytes) / (dim * 2 * 8) != count ||
      (bytes.size() - kFrameHeaderBytes) % (dim * 2 * 8) != 0) {
    throw ValidationError("frame: size does not match the particle count");
  }
  f.dim = static_cast<int>(dim);
  f.state.x.assign(count, Vec3::Zero());
  f.state.v.assign(count, Vec3::Zero());
  const std::uint8_t* p = bytes.data() + kFrameHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint32_t a = 0; a < dim; ++a, p += 8) f.state.x[i][a] = std::bit_cast<double>(get_u64(p));
    for (std::uint32_t a = 0; a < dim; ++a, p += 8) f.state.v[i][a] = std::bit_cast<double>(get_u64(p));
  }
  return f;
}

void write_frame(const std::string& path, const sim::ParticleState& state, int dim,
                 std::uint64_t step) {
  const auto bytes = encode_frame(state, dim, step);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

Frame read_frame(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_frame(bytes);
}

std::string frame_path(const std::string& prefix, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%06llu.bin", static_cast<unsigned long long>(step));
  return prefix + buf;
}

std::vector<std::string> export_frames(const sim::Trajectory& traj, const std::string& prefix, int dim,
                                       std::uint64_t first_step, bool ply) {
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::vector<std::string> paths;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const std::string path = frame_path(prefix, first_step + k);
    write_frame(path, traj[k], dim, first_step + k);
    if (ply) write_ply(path.substr(0, path.size() - 4) + ".ply", traj[k], dim);
    paths.push_back(path);
  }
  return paths;
}

sim::Trajectory load_frames(const std::string& prefix) {
  sim::Trajectory traj;
  for (std::uint64_t step = 0;; ++step) {
    const std::string path = frame_path(prefix, step);
    if (!std::filesystem::exists(path)) break;
    traj.push_back(read_frame(path).state);
  }
  return traj;
}

void write_ply(const std::string& path, const sim::ParticleState& state, int dim) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat ascii 1.0\nelement vertex " << state.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double vx\nproperty double vy\nproperty double vz\nend_header\n";
  char buf[256];
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Vec3& x = state.x[i];
    const Vec3& v = state.v[i];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", x[0], x[1],
                  dim == 3 ? x[2] : 0.0, v[0], v[1], dim == 3 ? v[2] : 0.0);
    out << buf;
  }
}

}  // namespace fluidctl::io
