#include "vfi/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfi {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian layout");

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool is_png(const std::vector<unsigned char>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

// Parses one whitespace-delimited PNM header token, skipping comments.
std::size_t next_token(const std::vector<unsigned char>& bytes, std::size_t pos,
                       std::string& token) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  token.clear();
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    token.push_back(static_cast<char>(bytes[pos++]));
  }
  return pos;
}

Frame decode_ppm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::string magic, ws, hs, maxs;
  std::size_t pos = next_token(bytes, 0, magic);
  if (magic != "P6") throw std::runtime_error(path.string() + ": not a PNG or P6 file");
  pos = next_token(bytes, pos, ws);
  pos = next_token(bytes, pos, hs);
  pos = next_token(bytes, pos, maxs);
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(ws);
    height = std::stoi(hs);
    maxval = std::stoi(maxs);
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed P6 header");
  }
  if (maxval != 255) {
    throw std::runtime_error(path.string() + ": unsupported bit depth (maxval " +
                             std::to_string(maxval) + ")");
  }
  ++pos;  // single whitespace byte after maxval
  Frame frame(width, height, 3);
  if (bytes.size() < pos + frame.size()) {
    throw std::runtime_error(path.string() + ": truncated payload");
  }
  auto data = frame.data();
  for (std::size_t i = 0; i < frame.size(); ++i) data[i] = bytes[pos + i] / 255.0;
  return frame;
}

struct PngReader {
  const std::vector<unsigned char>* bytes = nullptr;
  std::size_t offset = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<PngReader*>(png_get_io_ptr(png));
  if (reader->offset + count > reader->bytes->size()) png_error(png, "truncated payload");
  std::memcpy(out, reader->bytes->data() + reader->offset, count);
  reader->offset += count;
}

[[noreturn]] void png_error_cb(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

Frame decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_cb, png_warning_cb);
  if (!png) throw std::runtime_error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  PngReader reader{&bytes, 0};
  std::vector<unsigned char> raw;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path.string() + ": " + message);
  }
  png_set_read_fn(png, &reader, png_read_cb);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8 && !(color == PNG_COLOR_TYPE_PALETTE && depth <= 8)) {
    png_error(png, "unsupported bit depth");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  raw.resize(static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels));
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = raw.data() + static_cast<std::size_t>(y) * width * static_cast<std::size_t>(channels);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Frame frame(static_cast<int>(width), static_cast<int>(height), channels);
  auto data = frame.data();
  for (std::size_t i = 0; i < raw.size(); ++i) data[i] = raw[i] / 255.0;
  return frame;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::ofstream*>(png_get_io_ptr(png));
  out->write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count));
}

void png_flush_cb(png_structp png) { static_cast<std::ofstream*>(png_get_io_ptr(png))->flush(); }

void encode_png(const std::vector<unsigned char>& bytes, const Frame& frame, std::ofstream& out,
                const std::filesystem::path& path) {
  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_cb, png_warning_cb);
  if (!png) throw std::runtime_error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  const auto stride = static_cast<std::size_t>(frame.width()) *
                      static_cast<std::size_t>(frame.channels());
  std::vector<png_bytep> rows(static_cast<std::size_t>(frame.height()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + y * stride);
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path.string() + ": " + message);
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width()),
               static_cast<png_uint_32>(frame.height()), 8,
               frame.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_rows(png, rows.data(), static_cast<png_uint_32>(rows.size()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

unsigned char quantize_sample(double v) {
  const double clamped = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5));
}

Frame load_frame(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return is_png(bytes) ? decode_png(bytes, path) : decode_ppm(bytes, path);
}

void save_frame(const Frame& frame, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(frame.size());
  const auto data = frame.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_sample(data[i]);

  const std::string ext = lower_extension(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (ext == ".png") {
    encode_png(bytes, frame, out, path);
  } else if (ext == ".ppm") {
    if (frame.channels() != 3) {
      throw std::invalid_argument("P6 output requires a three-channel frame");
    }
    out << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  } else {
    throw std::invalid_argument("unsupported image extension '" + ext + "'");
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {
constexpr float kFloMagic = 202021.25f;
}

FlowField read_flo(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 12) throw std::runtime_error(path.string() + ": truncated header");
  float magic = 0.0f;
  std::int32_t width = 0, height = 0;
  std::memcpy(&magic, bytes.data(), 4);
  std::memcpy(&width, bytes.data() + 4, 4);
  std::memcpy(&height, bytes.data() + 8, 4);
  if (magic != kFloMagic) throw std::runtime_error(path.string() + ": bad magic");
  if (width <= 0 || height <= 0) throw std::runtime_error(path.string() + ": bad dimensions");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != 12 + n * 8) {
    throw std::runtime_error(path.string() + ": size/payload mismatch");
  }
  FlowField flow(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    float uv[2];
    std::memcpy(uv, bytes.data() + 12 + i * 8, 8);
    flow.u()[i] = uv[0];
    flow.v()[i] = uv[1];
  }
  return flow;
}

void write_flo(const FlowField& flow, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    if (!std::isfinite(flow.u()[i]) || !std::isfinite(flow.v()[i])) {
      throw std::invalid_argument("write_flo: non-finite flow");
    }
  }
  std::vector<char> bytes(12 + flow.pixel_count() * 8);
  const std::int32_t width = flow.width();
  const std::int32_t height = flow.height();
  std::memcpy(bytes.data(), &kFloMagic, 4);
  std::memcpy(bytes.data() + 4, &width, 4);
  std::memcpy(bytes.data() + 8, &height, 4);
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    const float uv[2] = {static_cast<float>(flow.u()[i]), static_cast<float>(flow.v()[i])};
    std::memcpy(bytes.data() + 12 + i * 8, uv, 8);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vfi
