#include "fluidctl/io/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fluidctl::io {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '#') ++pos;
  return s.substr(start, pos - start);
}

int header_int(const std::string& s, std::size_t& pos, const char* what) {
  const std::string tok = next_token(s, pos);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("raster: bad ") + what);
  }
}

}  // namespace

Raster parse_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != "P5" && magic != "P2") throw ValidationError("raster: not a PGM image");
  Raster r;
  r.width = header_int(bytes, pos, "width");
  r.height = header_int(bytes, pos, "height");
  const int maxval = header_int(bytes, pos, "maxval");
  if (maxval > 65535) throw ValidationError("raster: bad maxval");
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  r.values.resize(n);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + n * bpp) throw ValidationError("raster: truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + i * bpp);
      const unsigned v = bpp == 1 ? p[0] : (static_cast<unsigned>(p[0]) << 8) | p[1];
      r.values[i] = std::min(1.0, static_cast<double>(v) / maxval);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = next_token(bytes, pos);
      if (tok.empty()) throw ValidationError("raster: truncated pixel data");
      r.values[i] = std::min(1.0, std::stod(tok) / maxval);
    }
  }
  return r;
}

Raster read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("raster: cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes);
}

void write_pgm(const std::string& path, const Raster& raster) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << raster.width << " " << raster.height << "\n65535\n";
  for (const double v : raster.values) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xff));
  }
}

double sample_bilinear(const Raster& r, double u, double v) {
  const double s = std::clamp(u, 0.0, 1.0) * (r.width - 1);
  const double t = std::clamp(v, 0.0, 1.0) * (r.height - 1);
  const int c0 = std::min(static_cast<int>(s), std::max(r.width - 2, 0));
  const int r0 = std::min(static_cast<int>(t), std::max(r.height - 2, 0));
  const int c1 = std::min(c0 + 1, r.width - 1);
  const int r1 = std::min(r0 + 1, r.height - 1);
  const double fs = s - c0;
  const double ft = t - r0;
  const double top = (1.0 - fs) * r.at(c0, r0) + fs * r.at(c1, r0);
  const double bottom = (1.0 - fs) * r.at(c0, r1) + fs * r.at(c1, r1);
  return (1.0 - ft) * top + ft * bottom;
}

std::vector<double> sample_on_window(const Raster& raster, const control::SpacetimeWindow& window) {
  if (window.dim != 2) throw ValidationError("edit.grid.image: raster keyframes need a 2D window");
  if (raster.width < 1 || raster.height < 1) throw ValidationError("raster: empty image");
  std::vector<double> out(window.node_count());
  const int nx = window.node_counts[0];
  const int ny = window.node_counts[1];
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double u = static_cast<double>(i) / (nx - 1);
      const double v = 1.0 - static_cast<double>(j) / (ny - 1);
      out[window.flat_index(i, j, 0)] = sample_bilinear(raster, u, v);
    }
  }
  return out;
}

std::vector<double> ingest_image_keyframe(const Raster& raster, const control::SpacetimeWindow& window,
                                          double total_mass) {
  auto values = sample_on_window(raster, window);
  double sum = 0.0;
  for (const double v : values) sum += v;
  if (!(sum > 0.0)) throw ValidationError("edit.grid.image: raster is all zero");
  const double scale = total_mass / sum;
  for (double& v : values) v *= scale;
  return values;
}

Raster rasterize_nodes(const std::vector<double>& values, const control::SpacetimeWindow& window) {
  if (window.dim != 2) throw ValidationError("raster: only 2D windows can be rasterized");
  Raster r;
  r.width = window.node_counts[0];
  r.height = window.node_counts[1];
  r.values.assign(static_cast<std::size_t>(r.width) * r.height, 0.0);
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  const double inv = peak > 0.0 ? 1.0 / peak : 0.0;
  for (int j = 0; j < r.height; ++j) {
    for (int i = 0; i < r.width; ++i) {
      r.values[static_cast<std::size_t>(r.height - 1 - j) * r.width + i] =
          values[window.flat_index(i, j, 0)] * inv;
    }
  }
  return r;
}

}  // namespace fluidctl::io
