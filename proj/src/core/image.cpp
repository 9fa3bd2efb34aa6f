#include "core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

#include "core/errors.hpp"

namespace mlpd {

double psnr(const ImageBuffer& reference, const ImageBuffer& estimate) {
  if (reference.width != estimate.width ||
      reference.height != estimate.height)
    throw invalid_argument("psnr: image sizes differ");
  if (reference.data.empty()) throw invalid_argument("psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    double d = reference.data[i] - estimate.data[i];
    se += d * d;
  }
  double mse = se / static_cast<double>(reference.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

double luma601(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

// --- PNM (P5/P6) ---

int pnm_getc_skipping_comments(std::FILE* f) {
  int ch = std::fgetc(f);
  while (ch == '#') {
    while (ch != '\n' && ch != EOF) ch = std::fgetc(f);
    if (ch != EOF) ch = std::fgetc(f);
  }
  return ch;
}

unsigned long pnm_read_uint(std::FILE* f, const std::string& what) {
  int ch = pnm_getc_skipping_comments(f);
  while (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n')
    ch = pnm_getc_skipping_comments(f);
  if (ch < '0' || ch > '9')
    throw io_error("PNM header: expected " + what);
  unsigned long v = 0;
  while (ch >= '0' && ch <= '9') {
    v = v * 10 + static_cast<unsigned long>(ch - '0');
    ch = std::fgetc(f);
  }
  if (ch == EOF) throw io_error("PNM header: unexpected end of file");
  return v;
}

ImageBuffer load_pnm(std::FILE* f, const std::filesystem::path& path,
                     bool color) {
  unsigned long w = pnm_read_uint(f, "width");
  unsigned long h = pnm_read_uint(f, "height");
  unsigned long maxval = pnm_read_uint(f, "maxval");
  if (w == 0 || h == 0)
    throw io_error("PNM " + path.string() + ": zero dimension");
  if (maxval != 255)
    throw io_error("PNM " + path.string() + ": only maxval 255 supported");
  std::size_t channels = color ? 3 : 1;
  std::vector<unsigned char> raw(w * h * channels);
  if (std::fread(raw.data(), 1, raw.size(), f) != raw.size())
    throw io_error("PNM " + path.string() + ": truncated pixel data");
  ImageBuffer img(w, h);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    if (color) {
      img.data[i] = luma601(raw[i * 3], raw[i * 3 + 1], raw[i * 3 + 2]);
    } else {
      img.data[i] = raw[i];
    }
  }
  return img;
}

// --- PNG via libpng ---

ImageBuffer load_png(std::FILE* f, const std::filesystem::path& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("PNG: failed to allocate reader");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("PNG: failed to allocate info");
  }
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("PNG " + path.string() + ": decode failed");
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::size_t rowbytes = png_get_rowbytes(png, info);
  std::size_t channels = png_get_channels(png, info);
  std::vector<unsigned char> raw(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) row_ptrs[r] = raw.data() + r * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3)
    throw io_error("PNG " + path.string() + ": unsupported channel count");
  ImageBuffer img(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const unsigned char* row = raw.data() + r * rowbytes;
    for (std::size_t c = 0; c < w; ++c) {
      img.at(r, c) = channels == 1
                         ? static_cast<double>(row[c])
                         : luma601(row[c * 3], row[c * 3 + 1], row[c * 3 + 2]);
    }
  }
  return img;
}

void save_png(const std::vector<unsigned char>& bytes, std::size_t w,
              std::size_t h, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw io_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw io_error("PNG: failed to allocate writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("PNG: failed to allocate info");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("PNG " + path.string() + ": encode failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + r * w));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw io_error("cannot open " + path.string());
  unsigned char magic[8] = {};
  std::size_t got = std::fread(magic, 1, sizeof magic, f.get());
  if (got < 2) throw io_error(path.string() + ": file too short");
  std::rewind(f.get());
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) {
    std::fgetc(f.get());
    std::fgetc(f.get());
    return load_pnm(f.get(), path, magic[1] == '6');
  }
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G',
                                           0x0d, 0x0a, 0x1a, 0x0a};
  if (got == 8 && std::memcmp(magic, png_sig, 8) == 0)
    return load_png(f.get(), path);
  throw io_error(path.string() + ": unrecognized image format (want P5/P6/PNG)");
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.width == 0 || img.height == 0)
    throw invalid_argument("save_image: empty image");
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    double v = std::clamp(img.data[i], 0.0, 255.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v));
  }
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
  if (ext == ".png") {
    save_png(bytes, img.width, img.height, path);
    return;
  }
  if (ext != ".pgm" && !ext.empty() && ext != ".pnm")
    throw invalid_argument("save_image: unsupported extension " + ext +
                           " (want .pgm or .png)");
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw io_error("cannot open " + path.string() + " for writing");
  std::string header = "P5\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
      std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw io_error("short write to " + path.string());
}

ImageBuffer mirror_pad(const ImageBuffer& img, std::size_t pad) {
  if (img.width == 0 || img.height == 0)
    throw invalid_argument("mirror_pad: empty image");
  auto fold = [](long i, long n) {
    if (n == 1) return 0L;
    long period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  ImageBuffer out(img.width + 2 * pad, img.height + 2 * pad);
  long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
  long p = static_cast<long>(pad);
  for (long r = 0; r < static_cast<long>(out.height); ++r) {
    long sr = fold(r - p, h);
    for (long c = 0; c < static_cast<long>(out.width); ++c) {
      out.at(r, c) = img.at(sr, fold(c - p, w));
    }
  }
  return out;
}

ImageBuffer render_montage(const std::vector<std::vector<double>>& patches,
                           std::size_t edge, std::size_t cols,
                           std::size_t pad) {
  if (edge == 0) throw invalid_argument("render_montage: edge must be > 0");
  if (cols == 0) throw invalid_argument("render_montage: cols must be > 0");
  if (patches.empty()) throw invalid_argument("render_montage: no patches");
  for (const auto& p : patches) {
    if (p.size() != edge * edge)
      throw invalid_argument("render_montage: patch size != edge^2");
  }
  const double kSep = 128.0;
  std::size_t rows = (patches.size() + cols - 1) / cols;
  ImageBuffer out(cols * edge + (cols + 1) * pad,
                  rows * edge + (rows + 1) * pad);
  std::fill(out.data.begin(), out.data.end(), kSep);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& patch = patches[i];
    auto [lo_it, hi_it] = std::minmax_element(patch.begin(), patch.end());
    double lo = *lo_it, hi = *hi_it;
    std::size_t gr = i / cols, gc = i % cols;
    std::size_t top = pad + gr * (edge + pad);
    std::size_t left = pad + gc * (edge + pad);
    for (std::size_t r = 0; r < edge; ++r) {
      for (std::size_t c = 0; c < edge; ++c) {
        double v = patch[r * edge + c];
        // Flat patches carry no contrast to stretch; keep them mid-gray.
        double px = (hi > lo) ? (v - lo) / (hi - lo) * 255.0 : kSep;
        out.at(top + r, left + c) = px;
      }
    }
  }
  return out;
}

}  // namespace mlpd
