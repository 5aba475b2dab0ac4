#include "qptv2/raster_io.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace qptv2 {
namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

void skip_space_and_comments(std::istream& in) {
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

int read_int(std::istream& in, const std::filesystem::path& path) {
  skip_space_and_comments(in);
  int v = 0;
  if (!(in >> v)) throw IoError("malformed netpbm header in " + path.string());
  return v;
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  in >> h.magic;
  if (h.magic != "P5" && h.magic != "P6") throw IoError("unsupported netpbm type in " + path.string());
  h.width = read_int(in, path);
  h.height = read_int(in, path);
  h.maxval = read_int(in, path);
  in.get();  // single whitespace before raster
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) {
    throw IoError("invalid netpbm dimensions in " + path.string());
  }
  return h;
}

std::vector<int> read_samples(std::istream& in, const NetpbmHeader& h, int channels,
                              const std::filesystem::path& path) {
  const std::size_t n = std::size_t(h.width) * h.height * channels;
  const int bytes = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw IoError("truncated raster in " + path.string());
  }
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const NetpbmHeader h = read_header(in, path);
  const int channels = h.magic == "P6" ? 3 : 1;
  const std::vector<int> s = read_samples(in, h, channels, path);
  Image img(h.height, h.width);
  const double scale = 1.0 / h.maxval;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      const std::size_t base = (std::size_t(y) * h.width + x) * channels;
      for (int c = 0; c < 3; ++c) img(y, x, c) = s[base + (channels == 3 ? c : 0)] * scale;
    }
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("bit_depth must be 8 or 16");
  if (img.space() != ColorSpace::RGB) throw ParameterError("write_image expects an RGB image");
  const int maxval = bit_depth == 16 ? 65535 : 255;
  std::ofstream out = open_out(path);
  out << "P6\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(std::size_t(img.width()) * img.height() * 3 * (bit_depth / 8));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const int v = static_cast<int>(std::lround(std::clamp(img(y, x, c), 0.0, 1.0) * maxval));
        if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(v >> 8));
        raw.push_back(static_cast<unsigned char>(v & 0xff));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Mask read_mask(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5") throw IoError("mask must be a P5 graymap: " + path.string());
  const std::vector<int> s = read_samples(in, h, 1, path);
  Mask m(h.height, h.width);
  // maxval 1 masks store {0, 1} directly.
  const int threshold = h.maxval == 1 ? 1 : (h.maxval + 1) / 2;
  for (std::size_t i = 0; i < s.size(); ++i) m.data()[i] = s[i] >= threshold ? 1 : 0;
  return m;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::ofstream out = open_out(path);
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
  std::vector<unsigned char> raw(mask.size());
  for (Eigen::Index i = 0; i < mask.size(); ++i) raw[i] = mask.data()[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace qptv2
