#pragma once

#include "ndforge/location.hpp"
#include "ndforge/pixel_type.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ndforge {

enum class AxisKind : std::uint8_t { X = 0, Y = 1, Z = 2, Time = 3, Channel = 4, Custom = 5 };

struct AxisLabel {
  AxisKind kind = AxisKind::X;
  std::string custom; // only for AxisKind::Custom

  static AxisLabel parse(std::string_view text);
  std::string name() const;
  bool is_spatial() const {
    return kind == AxisKind::X || kind == AxisKind::Y || kind == AxisKind::Z;
  }
  friend bool operator==(const AxisLabel &, const AxisLabel &) = default;
};

struct Axis {
  AxisLabel label;
  std::int64_t length = 1;
  double calibration_scale = 1.0;
  std::optional<std::string> unit;
};

/// X, Y, Z, then Time and Channel, for the given lengths.
std::vector<Axis> make_axes(std::span<const std::int64_t> lengths);
std::vector<Axis> make_axes(std::initializer_list<std::int64_t> lengths);

enum class Backing { Array, Planar, Cell };

std::string_view to_string(Backing backing);

inline constexpr std::uint64_t kDefaultCacheBudget = 64ull << 20;
inline constexpr std::int64_t kDefaultCellLength = 64;

struct CellParams {
  std::vector<std::int64_t> cell_dims;  // empty → 64 per axis
  std::uint64_t cache_budget_bytes = kDefaultCacheBudget;
  std::filesystem::path spill_directory; // empty → private temp directory
};

struct CacheStats {
  std::uint64_t resident_cells = 0;
  std::uint64_t evictions = 0;
  std::uint64_t dirty_writebacks = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t resident_bytes = 0;
  std::uint64_t peak_resident_bytes = 0;
};

/// Supplies the initial bytes of a cell that has never been spilled.
using CellSource =
    std::function<void(std::uint64_t cell_index, std::span<std::byte> out)>;

/// Inclusive per-axis bounds.
struct Box {
  std::vector<std::int64_t> min;
  std::vector<std::int64_t> max;

  std::uint64_t volume() const;
};

/// Box plus an optional mask; the mask sees absolute positions.
struct Region {
  Box bounds;
  std::function<bool(std::span<const std::int64_t>)> mask;

  static Region box(std::vector<std::int64_t> min, std::vector<std::int64_t> max);
};

namespace detail {
class Storage;
}

/// N-dimensional sample grid. Canonical order is row-major with the first
/// axis varying fastest. Writes clamp to the pixel type's range.
class NDImage {
public:
  /// Throws ImageError when the backing cannot hold the requested geometry.
  static std::shared_ptr<NDImage> create(PixelType type, std::vector<Axis> axes,
                                         Backing backing = Backing::Array,
                                         CellParams params = {});

  ~NDImage();
  NDImage(const NDImage &) = delete;
  NDImage &operator=(const NDImage &) = delete;

  PixelType pixel_type() const { return type_; }
  const std::vector<Axis> &axes() const { return axes_; }
  std::size_t num_dims() const { return axes_.size(); }
  const std::vector<std::int64_t> &dims() const { return dims_; }
  std::uint64_t size() const { return total_; }
  Backing backing() const { return backing_; }
  /// Effective cell parameters (CELL backing only).
  const CellParams &cell_params() const { return cell_params_; }

  double get(std::span<const std::int64_t> pos) const;
  void set(std::span<const std::int64_t> pos, double value);
  std::int64_t get_integer(std::span<const std::int64_t> pos) const;
  void set_integer(std::span<const std::int64_t> pos, std::int64_t value);
  std::uint64_t get_raw(std::span<const std::int64_t> pos) const;
  void set_raw(std::span<const std::int64_t> pos, std::uint64_t raw);

  double get_at(std::uint64_t linear) const;
  void set_at(std::uint64_t linear, double value);
  std::uint64_t get_raw_at(std::uint64_t linear) const;
  void set_raw_at(std::uint64_t linear, std::uint64_t raw);

  std::uint64_t linear_index(std::span<const std::int64_t> pos) const;
  void position_of(std::uint64_t linear, std::span<std::int64_t> out) const;
  bool contains(std::span<const std::int64_t> pos) const;
  Box bounds() const;

  /// Raw storage of an ARRAY image.
  std::span<std::byte> array_bytes();
  std::span<const std::byte> array_bytes() const;
  /// Planes of a PLANAR image (first two axes form a plane).
  std::size_t plane_count() const;
  std::uint64_t plane_samples() const;
  std::span<std::byte> plane_bytes(std::size_t plane);
  std::span<const std::byte> plane_bytes(std::size_t plane) const;

  /// Samples of `box` in canonical order, as doubles or raw bit patterns.
  void read_block(const Box &box, std::span<double> out) const;
  void write_block(const Box &box, std::span<const double> in);
  void read_block_raw(const Box &box, std::span<std::uint64_t> out) const;
  void write_block_raw(const Box &box, std::span<const std::uint64_t> in);

  /// Natural processing units: cells for CELL, bounded row slabs otherwise.
  std::vector<Box> chunks() const;

  /// CELL only; throws ImageError otherwise. A hit or miss is counted each
  /// time access moves to a different cell than the previous access.
  CacheStats cache_stats() const;
  std::uint64_t cell_count() const;
  Box cell_box(std::uint64_t cell_index) const;
  void set_cell_source(CellSource source);
  /// Writes every dirty resident cell to its spill file.
  void flush_cells();

  /// Same geometry, backing and cell layout; fresh zero samples.
  std::shared_ptr<NDImage> create_like() const;
  std::shared_ptr<NDImage> create_like(PixelType type) const;

private:
  NDImage(PixelType type, std::vector<Axis> axes, Backing backing);
  void check_block(const Box &box, std::size_t n) const;

  PixelType type_;
  std::vector<Axis> axes_;
  std::vector<std::int64_t> dims_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t total_ = 0;
  Backing backing_;
  CellParams cell_params_;
  std::unique_ptr<detail::Storage> storage_;
};

using ImagePtr = std::shared_ptr<NDImage>;

/// Canonical-order partition: full first axis, bounded runs of the second.
std::vector<Box> row_slabs(std::span<const std::int64_t> dims);

/// Deep copy into a new image with the given backing.
ImagePtr copy_image(const NDImage &src, Backing backing, CellParams params = {});

/// FNV-1a over raw samples in canonical order.
std::uint64_t content_hash(const NDImage &img);

/// True when dims, pixel type and every raw sample agree.
bool same_samples(const NDImage &a, const NDImage &b);

/// Visits every in-bounds, mask-accepted sample once in canonical order.
class Cursor {
public:
  explicit Cursor(NDImage &img, std::optional<Region> region = std::nullopt);
  /// Read-only traversal; set() throws ImageError.
  explicit Cursor(const NDImage &img, std::optional<Region> region = std::nullopt);

  /// Advances to the next sample; false when exhausted.
  bool next();
  std::span<const std::int64_t> position() const { return pos_; }
  std::uint64_t linear() const { return linear_; }
  double get() const { return img_->get_at(linear_); }
  void set(double v);

private:
  bool step();

  const NDImage *img_;
  NDImage *mutable_img_ = nullptr;
  Region region_;
  std::vector<std::int64_t> pos_;
  std::uint64_t linear_ = 0;
  bool started_ = false;
  bool done_ = false;
};

/// Named image with optional origin and free-form metadata.
class Dataset {
public:
  /// Throws ImageError if axis labels repeat.
  Dataset(std::string name, ImagePtr image, std::optional<Location> source = std::nullopt);

  const std::string &name() const { return name_; }
  const ImagePtr &image() const { return image_; }
  const std::optional<Location> &source() const { return source_; }
  std::map<std::string, std::string> &properties() { return properties_; }
  const std::map<std::string, std::string> &properties() const { return properties_; }

private:
  std::string name_;
  ImagePtr image_;
  std::optional<Location> source_;
  std::map<std::string, std::string> properties_;
};

using DatasetPtr = std::shared_ptr<Dataset>;

/// "256x256" style rendering of the dimensions.
std::string dims_string(const NDImage &img);

} // namespace ndforge
