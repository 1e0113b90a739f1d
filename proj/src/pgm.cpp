#include "formats.hpp"

#include "ndforge/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cstring>

namespace ndforge::io::detail {

namespace {

struct Header {
  bool binary = false;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::uint32_t maxval = 0;
  std::vector<std::string> comments;
  std::size_t data_offset = 0;
};

class Scanner {
public:
  explicit Scanner(std::span<const std::byte> bytes) : b_(bytes) {}

  std::size_t pos() const { return i_; }
  bool done() const { return i_ >= b_.size(); }
  char peek() const { return static_cast<char>(b_[i_]); }

  /// Skips whitespace and, when `comments` is set, '#' comment lines.
  void skip_space(std::vector<std::string> *comments) {
    while (!done()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i_;
      } else if (c == '#' && comments) {
        std::size_t j = i_ + 1;
        while (j < b_.size() && static_cast<char>(b_[j]) != '\n' &&
               static_cast<char>(b_[j]) != '\r')
          ++j;
        std::string text(reinterpret_cast<const char *>(b_.data()) + i_ + 1, j - i_ - 1);
        const auto first = text.find_first_not_of(" \t");
        comments->push_back(first == std::string::npos ? "" : text.substr(first));
        i_ = j;
      } else {
        return;
      }
    }
  }

  std::uint64_t number(const char *what) {
    const std::size_t start = i_;
    std::uint64_t v = 0;
    const char *p = reinterpret_cast<const char *>(b_.data());
    auto [ptr, ec] = std::from_chars(p + i_, p + b_.size(), v);
    if (ec != std::errc{} || ptr == p + i_)
      throw FormatError(std::string("pgm: expected ") + what, start);
    i_ = static_cast<std::size_t>(ptr - p);
    if (!done() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != '#')
      throw FormatError(std::string("pgm: malformed ") + what, start);
    return v;
  }

  void skip(std::size_t n) { i_ += n; }

private:
  std::span<const std::byte> b_;
  std::size_t i_ = 0;
};

Header parse_header(std::span<const std::byte> bytes) {
  if (bytes.size() < 2 || static_cast<char>(bytes[0]) != 'P' ||
      (static_cast<char>(bytes[1]) != '2' && static_cast<char>(bytes[1]) != '5'))
    throw FormatError("pgm: missing P2/P5 magic", 0);
  Header h;
  h.binary = static_cast<char>(bytes[1]) == '5';
  Scanner s(bytes);
  s.skip(2);
  if (!s.done() && !std::isspace(static_cast<unsigned char>(s.peek())) && s.peek() != '#')
    throw FormatError("pgm: malformed magic", 2);
  s.skip_space(&h.comments);
  const auto w = s.number("width");
  s.skip_space(&h.comments);
  const auto hgt = s.number("height");
  s.skip_space(&h.comments);
  const std::size_t maxval_at = s.pos();
  const auto maxval = s.number("maxval");
  if (w == 0 || hgt == 0 || w > (1ull << 31) || hgt > (1ull << 31))
    throw FormatError("pgm: invalid dimensions", 0);
  if (maxval == 0 || maxval > 65535)
    throw FormatError("pgm: maxval must be in 1..65535", maxval_at);
  h.width = static_cast<std::int64_t>(w);
  h.height = static_cast<std::int64_t>(hgt);
  h.maxval = static_cast<std::uint32_t>(maxval);
  if (h.binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    if (s.done())
      throw FormatError("pgm: missing raster", s.pos());
    s.skip(1);
  }
  h.data_offset = s.pos();
  return h;
}

PixelType type_for(std::uint32_t maxval) {
  return maxval <= 255 ? PixelType(PixelTypeCode::UInt8) : PixelType(PixelTypeCode::UInt16);
}

class PgmFormat final : public Format {
public:
  std::string id() const override { return "pgm"; }
  std::vector<std::string> suffixes() const override { return {"pgm", "pnm"}; }
  std::vector<std::string> magics() const override { return {"P2", "P5"}; }
  FormatCaps caps() const override { return {true, true, false}; }

  ImageMetadata read_metadata(DataHandle &handle) const override {
    handle.seek(0);
    auto bytes = handle.read_all();
    return metadata(parse_header(bytes));
  }

  ImagePtr read_image(DataHandle &handle, const ImageMetadata &, Backing backing,
                      const CellParams &params) const override {
    handle.seek(0);
    const auto bytes = handle.read_all();
    const Header h = parse_header(bytes);
    const auto meta = metadata(h);
    const auto n = static_cast<std::uint64_t>(h.width * h.height);
    std::vector<std::uint64_t> raw(n);
    if (h.binary) {
      const std::size_t width = h.maxval > 255 ? 2 : 1;
      if (bytes.size() - h.data_offset < n * width)
        throw FormatError("pgm: raster truncated", bytes.size());
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t at = h.data_offset + i * width;
        std::uint32_t v = std::to_integer<std::uint32_t>(bytes[at]);
        if (width == 2)
          v = (v << 8) | std::to_integer<std::uint32_t>(bytes[at + 1]);
        if (v > h.maxval)
          throw FormatError("pgm: sample exceeds maxval", at);
        raw[i] = v;
      }
    } else {
      Scanner s(bytes);
      s.skip(h.data_offset);
      for (std::uint64_t i = 0; i < n; ++i) {
        s.skip_space(nullptr);
        const std::size_t at = s.pos();
        if (s.done())
          throw FormatError("pgm: raster truncated", at);
        const auto v = s.number("sample");
        if (v > h.maxval)
          throw FormatError("pgm: sample exceeds maxval", at);
        raw[i] = v;
      }
    }
    auto img = NDImage::create(meta.type, meta.axes, backing, params);
    img->write_block_raw(img->bounds(), raw);
    return img;
  }

  void write(const Dataset &dataset, DataHandle &handle,
             const SaveOptions &options) const override {
    const NDImage &img = *dataset.image();
    const auto code = img.pixel_type().code();
    if (code != PixelTypeCode::UInt8 && code != PixelTypeCode::UInt16)
      throw FormatError("pgm: unsupported pixel type " +
                        std::string(img.pixel_type().name()) + " (uint8 or uint16 only)");
    if (img.num_dims() != 2)
      throw FormatError("pgm: only 2-D single-channel images, got " + dims_string(img));
    const std::uint32_t maxval = code == PixelTypeCode::UInt8 ? 255 : 65535;

    std::string head = options.ascii ? "P2\n" : "P5\n";
    std::vector<std::pair<long, std::string>> comments;
    for (const auto &[k, v] : dataset.properties()) {
      constexpr std::string_view prefix = "pgm.comment.";
      if (k.rfind(prefix, 0) == 0)
        comments.emplace_back(std::strtol(k.c_str() + prefix.size(), nullptr, 10), v);
    }
    std::sort(comments.begin(), comments.end());
    for (const auto &c : comments)
      head += "# " + c.second + "\n";
    head += std::to_string(img.dims()[0]) + " " + std::to_string(img.dims()[1]) + "\n" +
            std::to_string(maxval) + "\n";

    std::vector<std::uint64_t> raw(img.size());
    img.read_block_raw(img.bounds(), raw);
    std::vector<std::byte> out(head.size());
    std::memcpy(out.data(), head.data(), head.size());
    if (options.ascii) {
      std::string text;
      const auto w = static_cast<std::uint64_t>(img.dims()[0]);
      for (std::uint64_t i = 0; i < raw.size(); ++i) {
        text += std::to_string(raw[i]);
        text += (i + 1) % w == 0 ? '\n' : ' ';
      }
      const auto *p = reinterpret_cast<const std::byte *>(text.data());
      out.insert(out.end(), p, p + text.size());
    } else {
      for (auto v : raw) {
        if (maxval > 255)
          out.push_back(static_cast<std::byte>(v >> 8));
        out.push_back(static_cast<std::byte>(v & 0xff));
      }
    }
    handle.write(out);
  }

private:
  static ImageMetadata metadata(const Header &h) {
    ImageMetadata m;
    m.model = "pgm";
    m.axes = make_axes({h.width, h.height});
    m.type = type_for(h.maxval);
    for (std::size_t i = 0; i < h.comments.size(); ++i)
      m.pairs["pgm.comment." + std::to_string(i)] = h.comments[i];
    return m;
  }
};

} // namespace

FormatPtr make_pgm_format() { return std::make_shared<PgmFormat>(); }

} // namespace ndforge::io::detail
