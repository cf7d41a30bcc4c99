#include "hdrv/image_io.hpp"

#include <png.h>

#include <ImfChannelList.h>
#include <ImfFrameBuffer.h>
#include <ImfHeader.h>
#include <ImfInputFile.h>
#include <ImfOutputFile.h>
#include <half.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hdrv/errors.hpp"

namespace hdrv::io {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
  throw IoError(path.string() + ": " + what);
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

void require_rgb(const Tensor& t, const fs::path& path) {
  if (t.channels() != 3 || t.height() <= 0 || t.width() <= 0) {
    fail(path, "expected a 3-channel image, got " + t.shape_string());
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(path, "cannot open for reading");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(path, "not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "libpng initialisation failed");
  }
  Tensor out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out = Tensor(3, height, width);
  const double scale = depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < height; ++y) {
    const png_byte* row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = static_cast<std::size_t>(x) * 3 + c;
        const unsigned v = depth == 16 ? (row[2 * i] << 8) | row[2 * i + 1] : row[i];
        out.at(c, y, x) = v / scale;
      }
    }
  }
  return out;
}

void write_png(const fs::path& path, const Tensor& rgb, PngDepth depth) {
  require_rgb(rgb, path);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(path, "libpng initialisation failed");
  }
  const int bits = static_cast<int>(depth);
  const int bytes = bits / 8;
  std::vector<png_byte> row(static_cast<std::size_t>(rgb.width()) * 3 * bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "PNG encoding failed");
  }
  const double scale = bits == 16 ? 65535.0 : 255.0;
  png_init_io(png, file.get());
  png_set_IHDR(png, info, rgb.width(), rgb.height(), bits, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb.at(c, y, x), 0.0, 1.0);
        const unsigned q = static_cast<unsigned>(std::lround(v * scale));
        const std::size_t i = (static_cast<std::size_t>(x) * 3 + c) * bytes;
        if (bytes == 2) {
          row[i] = static_cast<png_byte>(q >> 8);
          row[i + 1] = static_cast<png_byte>(q & 0xff);
        } else {
          row[i] = static_cast<png_byte>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor read_exr(const fs::path& path) {
  try {
    Imf::InputFile file(path.c_str());
    const Imath::Box2i dw = file.header().dataWindow();
    const int width = dw.max.x - dw.min.x + 1;
    const int height = dw.max.y - dw.min.y + 1;
    const auto& channels = file.header().channels();
    const bool luminance_only = !channels.findChannel("R") && channels.findChannel("Y");
    std::vector<float> planes(static_cast<std::size_t>(3) * width * height, 0.0f);
    Imf::FrameBuffer fb;
    const char* names[3] = {"R", "G", "B"};
    for (int c = 0; c < 3; ++c) {
      const char* name = luminance_only ? "Y" : names[c];
      float* base = planes.data() + static_cast<std::size_t>(c) * width * height;
      char* origin = reinterpret_cast<char*>(base - dw.min.x - static_cast<std::ptrdiff_t>(dw.min.y) * width);
      fb.insert(name, Imf::Slice(Imf::FLOAT, origin, sizeof(float), sizeof(float) * width, 1, 1,
                                 0.0));
      if (luminance_only) break;
    }
    file.setFrameBuffer(fb);
    file.readPixels(dw.min.y, dw.max.y);
    Tensor out(3, height, width);
    for (int c = 0; c < 3; ++c) {
      const float* src = planes.data() + static_cast<std::size_t>(luminance_only ? 0 : c) * width * height;
      for (int i = 0; i < width * height; ++i) out.channel(c)[i] = src[i];
    }
    return out;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, std::string("OpenEXR read failed: ") + e.what());
  }
}

void write_exr(const fs::path& path, const Tensor& rgb, ExrPrecision precision) {
  require_rgb(rgb, path);
  try {
    const int width = rgb.width(), height = rgb.height();
    Imf::Header header(width, height);
    const Imf::PixelType type = precision == ExrPrecision::kHalf ? Imf::HALF : Imf::FLOAT;
    const char* names[3] = {"R", "G", "B"};
    for (const char* n : names) header.channels().insert(n, Imf::Channel(type));
    const std::size_t plane = static_cast<std::size_t>(width) * height;
    std::vector<float> planes(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) planes[i] = static_cast<float>(rgb[i]);
    std::vector<half> half_planes;
    if (type == Imf::HALF) half_planes.assign(planes.begin(), planes.end());
    Imf::OutputFile file(path.c_str(), header);
    Imf::FrameBuffer fb;
    for (int c = 0; c < 3; ++c) {
      if (type == Imf::HALF) {
        char* base = reinterpret_cast<char*>(half_planes.data() + c * plane);
        fb.insert(names[c], Imf::Slice(Imf::HALF, base, sizeof(half), sizeof(half) * width));
      } else {
        char* base = reinterpret_cast<char*>(planes.data() + c * plane);
        fb.insert(names[c], Imf::Slice(Imf::FLOAT, base, sizeof(float), sizeof(float) * width));
      }
    }
    file.setFrameBuffer(fb);
    file.writePixels(height);
  } catch (const std::exception& e) {
    fail(path, std::string("OpenEXR write failed: ") + e.what());
  }
}

namespace {

void decode_rgbe(const unsigned char* p, double& r, double& g, double& b) {
  if (p[3] == 0) {
    r = g = b = 0.0;
    return;
  }
  const double f = std::ldexp(1.0, static_cast<int>(p[3]) - (128 + 8));
  r = (p[0] + 0.5) * f;
  g = (p[1] + 0.5) * f;
  b = (p[2] + 0.5) * f;
}

void encode_rgbe(double r, double g, double b, unsigned char* p) {
  const double v = std::max({r, g, b});
  if (!(v > 1e-32)) {
    p[0] = p[1] = p[2] = p[3] = 0;
    return;
  }
  int e;
  const double m = std::frexp(v, &e) * 256.0 / v;
  p[0] = static_cast<unsigned char>(std::max(r, 0.0) * m);
  p[1] = static_cast<unsigned char>(std::max(g, 0.0) * m);
  p[2] = static_cast<unsigned char>(std::max(b, 0.0) * m);
  p[3] = static_cast<unsigned char>(e + 128);
}

}  // namespace

Tensor read_rgbe(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#?", 0) != 0) fail(path, "missing RGBE signature");
  bool format_ok = true;
  while (std::getline(in, line) && !line.empty()) {
    if (line.rfind("FORMAT=", 0) == 0) format_ok = line == "FORMAT=32-bit_rle_rgbe";
  }
  if (!format_ok) fail(path, "unsupported RGBE pixel format");
  if (!std::getline(in, line)) fail(path, "missing resolution line");
  char ya[3] = {}, xa[3] = {};
  int height = 0, width = 0;
  if (std::sscanf(line.c_str(), "%2s %d %2s %d", ya, &height, xa, &width) != 4 ||
      std::strcmp(ya, "-Y") != 0 || std::strcmp(xa, "+X") != 0 || height <= 0 || width <= 0) {
    fail(path, "unsupported resolution line '" + line + "'");
  }
  Tensor out(3, height, width);
  std::vector<unsigned char> scan(static_cast<std::size_t>(width) * 4);
  const auto read_bytes = [&](unsigned char* dst, std::size_t n) {
    if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n))) {
      fail(path, "truncated pixel data");
    }
  };
  for (int y = 0; y < height; ++y) {
    unsigned char head[4];
    read_bytes(head, 4);
    const bool rle = width >= 8 && width < 32768 && head[0] == 2 && head[1] == 2 &&
                     ((head[2] << 8) | head[3]) == width;
    if (!rle) {
      std::memcpy(scan.data(), head, 4);
      read_bytes(scan.data() + 4, scan.size() - 4);
    } else {
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < width) {
          unsigned char count;
          read_bytes(&count, 1);
          if (count > 128) {
            const int run = count - 128;
            unsigned char v;
            read_bytes(&v, 1);
            if (x + run > width) fail(path, "bad RLE run");
            for (int k = 0; k < run; ++k) scan[static_cast<std::size_t>(x++) * 4 + c] = v;
          } else {
            if (count == 0 || x + count > width) fail(path, "bad RLE literal");
            for (int k = 0; k < count; ++k) {
              read_bytes(&scan[static_cast<std::size_t>(x++) * 4 + c], 1);
            }
          }
        }
      }
    }
    for (int x = 0; x < width; ++x) {
      double r, g, b;
      decode_rgbe(&scan[static_cast<std::size_t>(x) * 4], r, g, b);
      out.at(0, y, x) = r;
      out.at(1, y, x) = g;
      out.at(2, y, x) = b;
    }
  }
  return out;
}

void write_rgbe(const fs::path& path, const Tensor& rgb) {
  require_rgb(rgb, path);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << rgb.height() << " +X " << rgb.width()
      << "\n";
  std::vector<unsigned char> scan(static_cast<std::size_t>(rgb.width()) * 4);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      encode_rgbe(rgb.at(0, y, x), rgb.at(1, y, x), rgb.at(2, y, x),
                  &scan[static_cast<std::size_t>(x) * 4]);
    }
    out.write(reinterpret_cast<const char*>(scan.data()), static_cast<std::streamsize>(scan.size()));
  }
  if (!out) fail(path, "write failed");
}

bool is_hdr_path(const fs::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".exr" || ext == ".hdr" || ext == ".pic";
}

Tensor read_frame(const fs::path& path) {
  if (!fs::exists(path)) fail(path, "file does not exist");
  const auto ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".exr") return read_exr(path);
  if (ext == ".hdr" || ext == ".pic") return read_rgbe(path);
  fail(path, "unsupported image extension '" + ext + "'");
}

void write_frame(const fs::path& path, const Tensor& rgb) {
  const auto ext = lower_extension(path);
  if (ext == ".png") return write_png(path, rgb, PngDepth::k16);
  if (ext == ".exr") return write_exr(path, rgb);
  if (ext == ".hdr" || ext == ".pic") return write_rgbe(path, rgb);
  fail(path, "unsupported image extension '" + ext + "'");
}

}  // namespace hdrv::io
