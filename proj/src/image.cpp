#include "footfit/image.hpp"

#include "footfit/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace footfit {

namespace {

std::string read_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int parse_int(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size() || v <= 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed header field '" + s + "'");
  }
}

template <class T>
void check_channels(const Image<T>& img, int expected, const char* what) {
  if (img.channels != expected) {
    throw std::invalid_argument(std::string(what) + " requires " + std::to_string(expected) + " channel(s)");
  }
}

void write_netpbm(const std::filesystem::path& path, const Image8& image, const char* magic) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << magic << "\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (!out) throw IoError("error writing " + path.string());
}

Image8 read_netpbm(const std::filesystem::path& path, const char* magic, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (read_token(in) != magic) throw IoError(path.string() + ": expected " + magic + " header");
  const int w = parse_int(read_token(in), path);
  const int h = parse_int(read_token(in), path);
  if (parse_int(read_token(in), path) != 255) throw IoError(path.string() + ": only maxval 255 is supported");
  Image8 img(w, h, channels);
  if (!in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()))) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  return img;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const ImageD& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (image.channels == 3 ? "PF" : "Pf") << "\n" << image.width << " " << image.height << "\n-1.0\n";
  std::vector<float> buf(image.data.size());
  std::transform(image.data.begin(), image.data.end(), buf.begin(), [](double v) { return static_cast<float>(v); });
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : buf) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw IoError("error writing " + path.string());
}

ImageD read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = read_token(in);
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw IoError(path.string() + ": not a PFM file");
  const int w = parse_int(read_token(in), path);
  const int h = parse_int(read_token(in), path);
  double scale = 0.0;
  try {
    scale = std::stod(read_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PFM scale");
  }
  if (scale == 0.0) throw IoError(path.string() + ": PFM scale must be non-zero");
  const bool little = scale < 0.0;
  std::vector<float> buf(static_cast<std::size_t>(w) * h * channels);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
    throw IoError(path.string() + ": truncated PFM data");
  }
  if (little != (std::endian::native == std::endian::little)) {
    for (float& f : buf) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
  ImageD img(w, h, channels);
  std::copy(buf.begin(), buf.end(), img.data.begin());
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image8& image) {
  check_channels(image, 1, "PGM");
  write_netpbm(path, image, "P5");
}

Image8 read_pgm(const std::filesystem::path& path) { return read_netpbm(path, "P5", 1); }

void write_ppm(const std::filesystem::path& path, const Image8& image) {
  check_channels(image, 3, "PPM");
  write_netpbm(path, image, "P6");
}

Image8 read_ppm(const std::filesystem::path& path) { return read_netpbm(path, "P6", 3); }

ImageD to_float32_precision(const ImageD& image) {
  ImageD out = image;
  for (double& v : out.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::uint8_t normal_component_to_byte(double n) {
  const double v = std::floor(127.5 * (std::clamp(n, -1.0, 1.0) + 1.0));
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

Image8 normals_to_rgb(const ImageD& normals) {
  check_channels(normals, 3, "normals_to_rgb");
  Image8 out(normals.width, normals.height, 3);
  for (std::size_t p = 0; p < normals.pixel_count(); ++p) {
    const double* n = &normals.data[p * 3];
    if (n[0] == 0.0 && n[1] == 0.0 && n[2] == 0.0) continue;
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = normal_component_to_byte(n[c]);
  }
  return out;
}

}  // namespace footfit
