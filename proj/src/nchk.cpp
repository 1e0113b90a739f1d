#include "formats.hpp"

#include "ndforge/error.hpp"

#include <zlib.h>

#include <cstring>

namespace ndforge::io::detail {

std::vector<std::byte> pack(std::span<const std::uint64_t> raw, PixelType type) {
  std::vector<std::byte> out(packed_storage_bytes(type, raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i)
    ndforge::detail::store_packed(out.data(), type.bits(), i, raw[i]);
  return out;
}

void unpack(std::span<const std::byte> bytes, PixelType type, std::span<std::uint64_t> raw) {
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = ndforge::detail::load_packed(bytes.data(), type.bits(), i);
}

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDims = 1024;

class Writer {
public:
  template <class T> void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bytes.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void put_text(std::string_view s) {
    const auto *p = reinterpret_cast<const std::byte *>(s.data());
    bytes.insert(bytes.end(), p, p + s.size());
  }
  std::vector<std::byte> bytes;
};

class Reader {
public:
  Reader(DataHandle &h) : h_(h) {}

  template <class T> T get() {
    std::byte buf[sizeof(T)];
    h_.read_exact(buf);
    header.insert(header.end(), buf, buf + sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= std::to_integer<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }

  std::string get_text(std::size_t n) {
    std::vector<std::byte> buf(n);
    h_.read_exact(buf);
    header.insert(header.end(), buf.begin(), buf.end());
    return std::string(reinterpret_cast<const char *>(buf.data()), n);
  }

  std::uint64_t tell() const { return h_.tell(); }

  std::vector<std::byte> header;

private:
  DataHandle &h_;
};

std::uint32_t crc_of(std::span<const std::byte> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef *>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

std::uint64_t cell_count_of(std::span<const std::int64_t> dims,
                            std::span<const std::int64_t> cell_dims) {
  std::uint64_t n = 1;
  for (std::size_t d = 0; d < dims.size(); ++d)
    n *= static_cast<std::uint64_t>((dims[d] + cell_dims[d] - 1) / cell_dims[d]);
  return n;
}

class NchkFormat final : public Format {
public:
  std::string id() const override { return "nchk"; }
  std::vector<std::string> suffixes() const override { return {"nchk"}; }
  std::vector<std::string> magics() const override { return {"NCHK"}; }
  FormatCaps caps() const override { return {true, true, true}; }

  ImageMetadata read_metadata(DataHandle &handle) const override {
    handle.seek(0);
    Reader r(handle);
    if (r.get_text(4) != "NCHK")
      throw FormatError("nchk: bad magic", 0);
    if (auto v = r.get<std::uint32_t>(); v != kVersion)
      throw FormatError("nchk: unsupported version " + std::to_string(v), 4);
    ImageMetadata m;
    m.model = "nchk";
    const auto code = r.get<std::uint8_t>();
    auto type = PixelType::from_code(code);
    if (!type)
      throw FormatError("nchk: unknown pixel type code " + std::to_string(code), 8);
    m.type = *type;
    const auto ndim = r.get<std::uint32_t>();
    if (ndim == 0 || ndim > kMaxDims)
      throw FormatError("nchk: invalid dimension count " + std::to_string(ndim), 9);
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto at = r.tell();
      const auto length = r.get<std::uint64_t>();
      const auto cell = r.get<std::uint64_t>();
      const auto label_code = r.get<std::uint8_t>();
      const auto label_len = r.get<std::uint16_t>();
      const std::string label = r.get_text(label_len);
      if (length == 0 || length > static_cast<std::uint64_t>(INT64_MAX) || cell == 0 ||
          cell > length)
        throw FormatError("nchk: invalid axis " + std::to_string(d), at);
      if (label_code > static_cast<std::uint8_t>(AxisKind::Custom))
        throw FormatError("nchk: invalid axis label code", at + 16);
      Axis axis;
      axis.length = static_cast<std::int64_t>(length);
      axis.label.kind = static_cast<AxisKind>(label_code);
      if (axis.label.kind == AxisKind::Custom)
        axis.label.custom = label;
      m.axes.push_back(std::move(axis));
      m.cell_dims.push_back(static_cast<std::int64_t>(cell));
    }
    m.data_offset = r.tell();

    const auto dims = m.dims();
    const auto cells = cell_count_of(dims, m.cell_dims);
    std::uint64_t offset = m.data_offset;
    m.block_offsets.reserve(cells);
    for (std::uint64_t i = 0; i < cells; ++i) {
      m.block_offsets.push_back(offset);
      offset += packed_storage_bytes(m.type, grid_cell_box(dims, m.cell_dims, i).volume());
    }
    if (handle.length() != offset + 4)
      throw FormatError("nchk: payload is " + std::to_string(handle.length()) +
                            " bytes, header implies " + std::to_string(offset + 4),
                        std::min(handle.length(), offset));
    handle.seek(offset);
    std::byte tail[4];
    handle.read_exact(tail);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
      stored |= std::to_integer<std::uint32_t>(tail[i]) << (8 * i);
    if (stored != crc_of(r.header))
      throw FormatError("nchk: header checksum mismatch", offset);
    m.pairs["nchk.version"] = std::to_string(kVersion);
    return m;
  }

  ImagePtr read_image(DataHandle &handle, const ImageMetadata &meta, Backing backing,
                      const CellParams &params) const override {
    auto img = NDImage::create(meta.type, meta.axes, backing, params);
    std::vector<std::uint64_t> raw;
    const auto dims = meta.dims();
    for (std::uint64_t i = 0; i < meta.block_offsets.size(); ++i) {
      const Box box = grid_cell_box(dims, meta.cell_dims, i);
      const auto bytes = read_block(handle, meta, i);
      raw.resize(box.volume());
      unpack(bytes, meta.type, raw);
      img->write_block_raw(box, raw);
    }
    return img;
  }

  std::vector<std::byte> read_block(DataHandle &handle, const ImageMetadata &meta,
                                    std::uint64_t cell_index) const override {
    if (cell_index >= meta.block_offsets.size())
      throw BoundsError("nchk: cell index " + std::to_string(cell_index) +
                        " out of range (" + std::to_string(meta.block_offsets.size()) +
                        " cells)");
    const Box box = grid_cell_box(meta.dims(), meta.cell_dims, cell_index);
    std::vector<std::byte> out(packed_storage_bytes(meta.type, box.volume()));
    handle.seek(meta.block_offsets[cell_index]);
    handle.read_exact(out);
    return out;
  }

  void write(const Dataset &dataset, DataHandle &handle,
             const SaveOptions &options) const override {
    const NDImage &img = *dataset.image();
    std::vector<std::int64_t> cell_dims = options.cell_dims;
    if (cell_dims.empty() && img.backing() == Backing::Cell)
      cell_dims = img.cell_params().cell_dims;
    if (cell_dims.empty())
      cell_dims.assign(img.num_dims(), kDefaultCellLength);
    if (cell_dims.size() != img.num_dims())
      throw FormatError("nchk: cell dims rank does not match the image");
    for (std::size_t d = 0; d < cell_dims.size(); ++d) {
      if (cell_dims[d] < 1)
        throw FormatError("nchk: cell lengths must be positive");
      cell_dims[d] = std::min(cell_dims[d], img.dims()[d]);
    }

    Writer w;
    w.put_text("NCHK");
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(img.pixel_type().code()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(img.num_dims()));
    for (std::size_t d = 0; d < img.num_dims(); ++d) {
      const auto &axis = img.axes()[d];
      const std::string label = axis.label.name();
      if (label.size() > 0xffff)
        throw FormatError("nchk: axis label too long");
      w.put<std::uint64_t>(static_cast<std::uint64_t>(axis.length));
      w.put<std::uint64_t>(static_cast<std::uint64_t>(cell_dims[d]));
      w.put<std::uint8_t>(static_cast<std::uint8_t>(axis.label.kind));
      w.put<std::uint16_t>(static_cast<std::uint16_t>(label.size()));
      w.put_text(label);
    }
    const std::uint32_t crc = crc_of(w.bytes);
    handle.write(w.bytes);

    std::vector<std::uint64_t> raw;
    const auto cells = cell_count_of(img.dims(), cell_dims);
    for (std::uint64_t i = 0; i < cells; ++i) {
      const Box box = grid_cell_box(img.dims(), cell_dims, i);
      raw.resize(box.volume());
      img.read_block_raw(box, raw);
      handle.write(pack(raw, img.pixel_type()));
    }
    Writer tail;
    tail.put<std::uint32_t>(crc);
    handle.write(tail.bytes);
  }
};

} // namespace

FormatPtr make_nchk_format() { return std::make_shared<NchkFormat>(); }

} // namespace ndforge::io::detail
