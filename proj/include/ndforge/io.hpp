#pragma once

#include "ndforge/container.hpp"
#include "ndforge/ndimage.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ndforge::io {

enum class Mode { Read, Write, ReadWrite };

/// Random-access byte stream over a Location. Every read is recorded so tests
/// can check which byte ranges a reader touched.
class DataHandle {
public:
  struct Range {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
  };

  virtual ~DataHandle() = default;

  virtual std::uint64_t length() const = 0;
  std::uint64_t tell() const { return pos_; }
  void seek(std::uint64_t pos) { pos_ = pos; }

  /// Reads up to out.size() bytes; short only at end of data.
  std::size_t read(std::span<std::byte> out);
  /// Throws FormatError at the current offset if fewer bytes remain.
  void read_exact(std::span<std::byte> out);
  std::vector<std::byte> read_all();
  void write(std::span<const std::byte> in);
  virtual void flush() {}

  const std::vector<Range> &reads() const { return reads_; }
  void clear_reads() { reads_.clear(); }

protected:
  virtual std::size_t do_read(std::uint64_t pos, std::span<std::byte> out) = 0;
  virtual void do_write(std::uint64_t pos, std::span<const std::byte> in) = 0;

private:
  std::uint64_t pos_ = 0;
  std::vector<Range> reads_;
};

/// Provider stored in PluginKind::IO plugins; the plugin name is the scheme
/// ("file", "memory").
using HandleFactory =
    std::function<std::unique_ptr<DataHandle>(const Location &, Mode)>;

/// Throws IoError for missing files or schemes without a handle plugin.
std::unique_ptr<DataHandle> resolve_handle(const Context &ctx, const Location &loc,
                                           Mode mode = Mode::Read);

/// Dims, type and key/value pairs of a stored image. `model` names the
/// metadata vocabulary the pairs use ("pgm", "nchk", "generic").
struct ImageMetadata {
  std::string model = "generic";
  std::string name;
  std::vector<Axis> axes;
  PixelType type;
  std::map<std::string, std::string> pairs;

  // Block layout, for formats with block reads.
  std::vector<std::int64_t> cell_dims;
  std::vector<std::uint64_t> block_offsets; // per cell, absolute
  std::uint64_t data_offset = 0;

  std::vector<std::int64_t> dims() const;
  friend bool operator==(const ImageMetadata &a, const ImageMetadata &b);
};

struct FormatCaps {
  bool read = true;
  bool write = true;
  bool block_read = false;
};

struct OpenOptions {
  /// Images larger than this open as CELL when the format has block reads.
  std::uint64_t cell_threshold_bytes = 64ull << 20;
  std::uint64_t cache_budget_bytes = kDefaultCacheBudget;
};

struct SaveOptions {
  bool ascii = false;                  // PGM: P2 instead of P5
  std::vector<std::int64_t> cell_dims; // NCHK: empty → image cells or 64
};

class Format {
public:
  virtual ~Format() = default;

  virtual std::string id() const = 0;
  virtual std::vector<std::string> suffixes() const = 0;
  virtual std::vector<std::string> magics() const = 0;
  virtual FormatCaps caps() const = 0;

  virtual ImageMetadata read_metadata(DataHandle &handle) const = 0;
  /// Full read into an image with the requested backing.
  virtual ImagePtr read_image(DataHandle &handle, const ImageMetadata &meta,
                              Backing backing, const CellParams &params) const = 0;
  virtual void write(const Dataset &dataset, DataHandle &handle,
                     const SaveOptions &options) const = 0;
  /// Packed bytes of one cell. Only formats with block_read implement it.
  virtual std::vector<std::byte> read_block(DataHandle &handle,
                                            const ImageMetadata &meta,
                                            std::uint64_t cell_index) const;
};

using FormatPtr = std::shared_ptr<const Format>;

void register_format(Context &ctx, FormatPtr format, std::int32_t priority = 0);
std::vector<FormatPtr> list_formats(const Context &ctx);
FormatPtr find_format(const Context &ctx, std::string_view id);

/// Magic match beats suffix match; plugin priority orders equal matches.
FormatPtr detect_format(const Context &ctx, const Location &loc);

/// Reads without touching the context's active dataset.
DatasetPtr read(const Context &ctx, const Location &loc, const OpenOptions &options = {});
/// read() and make the result the active dataset.
DatasetPtr open(Context &ctx, const Location &loc, const OpenOptions &options = {});

/// Throws FormatError when the format cannot store the dataset.
void save(const Context &ctx, const Dataset &dataset, const Location &loc,
          const std::string &format_id, const SaveOptions &options = {});

std::vector<std::byte> read_block(const Format &format, DataHandle &handle,
                                  const ImageMetadata &meta, std::uint64_t cell_index);

struct RawParams {
  std::vector<std::int64_t> dims;
  PixelType type;
  std::uint64_t offset = 0;
};

/// Headerless samples, packed little-endian in canonical order.
DatasetPtr read_raw(const Context &ctx, const Location &loc, const RawParams &params);
/// Parses "dims=WxH", "type=uint8", "offset=N" tokens.
RawParams parse_raw_params(std::span<const std::string> tokens);

/// Maps metadata between models. Provider of PluginKind::Translator plugins.
struct Translator {
  std::string source;
  std::string target;
  std::function<ImageMetadata(const ImageMetadata &)> apply;
};

void register_translator(Context &ctx, std::string id, Translator translator,
                         std::int32_t priority = 0);
/// Identity when the model already matches; throws Error without a translator.
ImageMetadata translate(const Context &ctx, const ImageMetadata &meta,
                        const std::string &target);

/// Metadata describing an opened dataset, in the given model.
ImageMetadata metadata_of(const Dataset &dataset, std::string model = "generic");

/// Box of cell `index` for a grid of `cell_dims` cells over `dims`.
Box grid_cell_box(std::span<const std::int64_t> dims,
                  std::span<const std::int64_t> cell_dims, std::uint64_t index);

void register_builtin_io(Context &ctx);

} // namespace ndforge::io
