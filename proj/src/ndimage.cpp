#include "ndforge/ndimage.hpp"

#include "ndforge/error.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <limits>
#include <list>
#include <mutex>
#include <random>
#include <set>
#include <unordered_map>

namespace ndforge {

namespace {

constexpr std::uint64_t kMaxContiguousSamples = (std::uint64_t{1} << 31) - 1;
constexpr std::uint64_t kSlabSamples = std::uint64_t{1} << 20;

std::string join_dims(std::span<const std::int64_t> dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i)
      s += 'x';
    s += std::to_string(dims[i]);
  }
  return s;
}

} // namespace

std::vector<Box> row_slabs(std::span<const std::int64_t> dims) {
  std::vector<Box> out;
  const std::size_t n = dims.size();
  if (n == 1) {
    for (std::int64_t x = 0; x < dims[0];
         x += static_cast<std::int64_t>(kSlabSamples))
      out.push_back(
          {{x}, {std::min<std::int64_t>(dims[0], x + kSlabSamples) - 1}});
    return out;
  }
  std::int64_t rows = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(kSlabSamples) / dims[0]);
  std::vector<std::int64_t> outer(n, 0);
  for (;;) {
    for (std::int64_t y = 0; y < dims[1]; y += rows) {
      Box b{outer, outer};
      b.min[0] = 0;
      b.max[0] = dims[0] - 1;
      b.min[1] = y;
      b.max[1] = std::min(dims[1], y + rows) - 1;
      out.push_back(std::move(b));
    }
    std::size_t d = 2;
    while (d < n && ++outer[d] == dims[d])
      outer[d++] = 0;
    if (d >= n)
      break;
  }
  return out;
}

namespace {

std::filesystem::path unique_temp_dir() {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  auto base = std::filesystem::temp_directory_path();
  for (;;) {
    auto name = "ndforge-cells-" + std::to_string(rd()) + "-" +
                std::to_string(counter++);
    auto dir = base / name;
    if (std::filesystem::create_directory(dir))
      return dir;
  }
}

} // namespace

std::uint64_t Box::volume() const {
  std::uint64_t v = 1;
  for (std::size_t d = 0; d < min.size(); ++d)
    v *= static_cast<std::uint64_t>(max[d] - min[d] + 1);
  return v;
}

Region Region::box(std::vector<std::int64_t> min, std::vector<std::int64_t> max) {
  return Region{Box{std::move(min), std::move(max)}, {}};
}

AxisLabel AxisLabel::parse(std::string_view text) {
  if (text == "X")
    return {AxisKind::X, {}};
  if (text == "Y")
    return {AxisKind::Y, {}};
  if (text == "Z")
    return {AxisKind::Z, {}};
  if (text == "TIME" || text == "Time")
    return {AxisKind::Time, {}};
  if (text == "CHANNEL" || text == "Channel")
    return {AxisKind::Channel, {}};
  return {AxisKind::Custom, std::string(text)};
}

std::string AxisLabel::name() const {
  switch (kind) {
  case AxisKind::X:
    return "X";
  case AxisKind::Y:
    return "Y";
  case AxisKind::Z:
    return "Z";
  case AxisKind::Time:
    return "TIME";
  case AxisKind::Channel:
    return "CHANNEL";
  case AxisKind::Custom:
    return custom;
  }
  return custom;
}

std::vector<Axis> make_axes(std::span<const std::int64_t> lengths) {
  static constexpr AxisKind kinds[] = {AxisKind::X, AxisKind::Y, AxisKind::Z,
                                       AxisKind::Time, AxisKind::Channel};
  std::vector<Axis> axes;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Axis a;
    a.length = lengths[i];
    if (i < std::size(kinds))
      a.label = {kinds[i], {}};
    else
      a.label = {AxisKind::Custom, "dim" + std::to_string(i)};
    axes.push_back(std::move(a));
  }
  return axes;
}

std::vector<Axis> make_axes(std::initializer_list<std::int64_t> lengths) {
  return make_axes(std::span<const std::int64_t>(lengths.begin(), lengths.size()));
}

std::string_view to_string(Backing backing) {
  switch (backing) {
  case Backing::Array:
    return "array";
  case Backing::Planar:
    return "planar";
  case Backing::Cell:
    return "cell";
  }
  return "?";
}

namespace detail {

class Storage {
public:
  virtual ~Storage() = default;
  virtual std::uint64_t load(std::uint64_t linear) = 0;
  virtual void store(std::uint64_t linear, std::uint64_t raw) = 0;
  /// A run never crosses a row (first-axis) boundary.
  virtual void load_run(std::uint64_t linear, std::uint64_t count,
                        std::uint64_t *out) = 0;
  virtual void store_run(std::uint64_t linear, std::uint64_t count,
                         const std::uint64_t *in) = 0;
};

namespace {

class ArrayStorage final : public Storage {
public:
  ArrayStorage(PixelType type, std::uint64_t total)
      : bits_(type.bits()), bytes_(packed_storage_bytes(type, total)) {}

  std::uint64_t load(std::uint64_t i) override {
    return load_packed(bytes_.data(), bits_, i);
  }
  void store(std::uint64_t i, std::uint64_t raw) override {
    store_packed(bytes_.data(), bits_, i, raw);
  }
  void load_run(std::uint64_t i, std::uint64_t n, std::uint64_t *out) override {
    for (std::uint64_t k = 0; k < n; ++k)
      out[k] = load_packed(bytes_.data(), bits_, i + k);
  }
  void store_run(std::uint64_t i, std::uint64_t n,
                 const std::uint64_t *in) override {
    for (std::uint64_t k = 0; k < n; ++k)
      store_packed(bytes_.data(), bits_, i + k, in[k]);
  }

  std::vector<std::byte> &bytes() { return bytes_; }

private:
  unsigned bits_;
  std::vector<std::byte> bytes_;
};

class PlanarStorage final : public Storage {
public:
  PlanarStorage(PixelType type, std::uint64_t plane_samples,
                std::uint64_t planes)
      : bits_(type.bits()), plane_samples_(plane_samples) {
    planes_.reserve(planes);
    for (std::uint64_t p = 0; p < planes; ++p)
      planes_.emplace_back(packed_storage_bytes(type, plane_samples));
  }

  std::uint64_t load(std::uint64_t i) override {
    return load_packed(planes_[i / plane_samples_].data(), bits_,
                       i % plane_samples_);
  }
  void store(std::uint64_t i, std::uint64_t raw) override {
    store_packed(planes_[i / plane_samples_].data(), bits_, i % plane_samples_,
                 raw);
  }
  void load_run(std::uint64_t i, std::uint64_t n, std::uint64_t *out) override {
    const std::byte *base = planes_[i / plane_samples_].data();
    std::uint64_t off = i % plane_samples_;
    for (std::uint64_t k = 0; k < n; ++k)
      out[k] = load_packed(base, bits_, off + k);
  }
  void store_run(std::uint64_t i, std::uint64_t n,
                 const std::uint64_t *in) override {
    std::byte *base = planes_[i / plane_samples_].data();
    std::uint64_t off = i % plane_samples_;
    for (std::uint64_t k = 0; k < n; ++k)
      store_packed(base, bits_, off + k, in[k]);
  }

  std::uint64_t plane_samples() const { return plane_samples_; }
  std::vector<std::vector<std::byte>> &planes() { return planes_; }

private:
  unsigned bits_;
  std::uint64_t plane_samples_;
  std::vector<std::vector<std::byte>> planes_;
};

} // namespace

/// Demand-paged cells with LRU eviction and per-cell spill files.
class CellStorage final : public Storage {
public:
  CellStorage(PixelType type, std::vector<std::int64_t> dims,
              const CellParams &params)
      : type_(type), bits_(type.bits()), dims_(std::move(dims)),
        cell_dims_(params.cell_dims), budget_(params.cache_budget_bytes),
        spill_dir_(params.spill_directory) {
    std::uint64_t count = 1;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      grid_.push_back((dims_[d] + cell_dims_[d] - 1) / cell_dims_[d]);
      count *= static_cast<std::uint64_t>(grid_.back());
    }
    cell_count_ = count;
  }

  ~CellStorage() override {
    std::error_code ec;
    for (auto idx : spilled_)
      std::filesystem::remove(spill_path(idx), ec);
    if (owns_dir_ && !spill_dir_.empty())
      std::filesystem::remove_all(spill_dir_, ec);
  }

  std::uint64_t cell_count() const { return cell_count_; }

  Box cell_box(std::uint64_t idx) const {
    Box b;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      auto c = static_cast<std::int64_t>(idx % static_cast<std::uint64_t>(grid_[d]));
      idx /= static_cast<std::uint64_t>(grid_[d]);
      b.min.push_back(c * cell_dims_[d]);
      b.max.push_back(std::min(dims_[d], (c + 1) * cell_dims_[d]) - 1);
    }
    return b;
  }

  std::uint64_t load(std::uint64_t linear) override {
    std::lock_guard lock(mutex_);
    auto [cell, off] = locate(linear);
    return load_packed(fault(cell).data.data(), bits_, off);
  }

  void store(std::uint64_t linear, std::uint64_t raw) override {
    std::lock_guard lock(mutex_);
    auto [cell, off] = locate(linear);
    Cell &c = fault(cell);
    store_packed(c.data.data(), bits_, off, raw);
    c.dirty = true;
  }

  void load_run(std::uint64_t linear, std::uint64_t n,
                std::uint64_t *out) override {
    std::lock_guard lock(mutex_);
    while (n > 0) {
      auto [cell, off] = locate(linear);
      auto seg = segment(linear, n);
      const std::byte *base = fault(cell).data.data();
      for (std::uint64_t k = 0; k < seg; ++k)
        out[k] = load_packed(base, bits_, off + k);
      out += seg;
      linear += seg;
      n -= seg;
    }
  }

  void store_run(std::uint64_t linear, std::uint64_t n,
                 const std::uint64_t *in) override {
    std::lock_guard lock(mutex_);
    while (n > 0) {
      auto [cell, off] = locate(linear);
      auto seg = segment(linear, n);
      Cell &c = fault(cell);
      for (std::uint64_t k = 0; k < seg; ++k)
        store_packed(c.data.data(), bits_, off + k, in[k]);
      c.dirty = true;
      in += seg;
      linear += seg;
      n -= seg;
    }
  }

  CacheStats stats() const {
    std::lock_guard lock(mutex_);
    CacheStats s = stats_;
    s.resident_cells = resident_.size();
    s.resident_bytes = resident_bytes_;
    return s;
  }

  void set_source(CellSource source) {
    std::lock_guard lock(mutex_);
    source_ = std::move(source);
  }

  void flush() {
    std::lock_guard lock(mutex_);
    for (auto &[idx, cell] : resident_)
      if (cell.dirty) {
        spill(idx, cell);
        cell.dirty = false;
      }
  }

private:
  struct Cell {
    std::vector<std::byte> data;
    bool dirty = false;
    std::list<std::uint64_t>::iterator lru;
  };

  std::pair<std::uint64_t, std::uint64_t> locate(std::uint64_t linear) const {
    std::uint64_t cell = 0, cell_stride = 1;
    std::uint64_t off = 0, off_stride = 1;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      auto len = static_cast<std::uint64_t>(dims_[d]);
      auto p = static_cast<std::int64_t>(linear % len);
      linear /= len;
      auto cd = cell_dims_[d];
      auto c = p / cd;
      auto extent = std::min(dims_[d] - c * cd, cd);
      cell += static_cast<std::uint64_t>(c) * cell_stride;
      cell_stride *= static_cast<std::uint64_t>(grid_[d]);
      off += static_cast<std::uint64_t>(p - c * cd) * off_stride;
      off_stride *= static_cast<std::uint64_t>(extent);
    }
    return {cell, off};
  }

  /// Samples from `linear` to the end of its cell along the first axis.
  std::uint64_t segment(std::uint64_t linear, std::uint64_t n) const {
    auto x = static_cast<std::int64_t>(linear % static_cast<std::uint64_t>(dims_[0]));
    auto end = std::min(dims_[0], (x / cell_dims_[0] + 1) * cell_dims_[0]);
    return std::min<std::uint64_t>(n, static_cast<std::uint64_t>(end - x));
  }

  std::uint64_t cell_bytes(std::uint64_t idx) const {
    return packed_storage_bytes(type_, cell_box(idx).volume());
  }

  std::filesystem::path spill_path(std::uint64_t idx) const {
    return spill_dir_ / ("cell_" + std::to_string(idx) + ".bin");
  }

  void ensure_spill_dir() {
    if (dir_ready_)
      return;
    if (spill_dir_.empty()) {
      spill_dir_ = unique_temp_dir();
      owns_dir_ = true;
    } else if (!std::filesystem::exists(spill_dir_)) {
      std::filesystem::create_directories(spill_dir_);
      owns_dir_ = true;
    }
    dir_ready_ = true;
  }

  void spill(std::uint64_t idx, const Cell &cell) {
    ensure_spill_dir();
    std::ofstream out(spill_path(idx), std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(cell.data.data()),
              static_cast<std::streamsize>(cell.data.size()));
    if (!out)
      throw IoError("cannot write spill file " + spill_path(idx).string());
    spilled_.insert(idx);
    ++stats_.dirty_writebacks;
  }

  void evict_one() {
    auto idx = lru_.back();
    auto it = resident_.find(idx);
    if (it->second.dirty)
      spill(idx, it->second);
    resident_bytes_ -= it->second.data.size();
    lru_.pop_back();
    resident_.erase(it);
    ++stats_.evictions;
  }

  Cell &fault(std::uint64_t idx) {
    if (auto it = resident_.find(idx); it != resident_.end()) {
      if (idx != last_) {
        ++stats_.hits;
        lru_.splice(lru_.begin(), lru_, it->second.lru);
      }
      last_ = idx;
      return it->second;
    }
    ++stats_.misses;
    last_ = idx;
    auto size = cell_bytes(idx);
    while (!lru_.empty() && resident_bytes_ + size > budget_)
      evict_one();

    Cell cell;
    cell.data.assign(size, std::byte{0});
    if (spilled_.count(idx)) {
      std::ifstream in(spill_path(idx), std::ios::binary);
      in.read(reinterpret_cast<char *>(cell.data.data()),
              static_cast<std::streamsize>(size));
      if (!in)
        throw IoError("cannot read spill file " + spill_path(idx).string());
    } else if (source_) {
      source_(idx, cell.data);
    }
    lru_.push_front(idx);
    cell.lru = lru_.begin();
    resident_bytes_ += size;
    stats_.peak_resident_bytes =
        std::max(stats_.peak_resident_bytes, resident_bytes_);
    return resident_.emplace(idx, std::move(cell)).first->second;
  }

  PixelType type_;
  unsigned bits_;
  std::vector<std::int64_t> dims_;
  std::vector<std::int64_t> cell_dims_;
  std::vector<std::int64_t> grid_;
  std::uint64_t cell_count_ = 0;
  std::uint64_t budget_;
  std::filesystem::path spill_dir_;
  bool owns_dir_ = false;
  bool dir_ready_ = false;

  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, Cell> resident_;
  std::list<std::uint64_t> lru_;
  std::set<std::uint64_t> spilled_;
  std::uint64_t resident_bytes_ = 0;
  std::uint64_t last_ = std::numeric_limits<std::uint64_t>::max();
  CacheStats stats_;
  CellSource source_;
};

} // namespace detail

NDImage::NDImage(PixelType type, std::vector<Axis> axes, Backing backing)
    : type_(type), axes_(std::move(axes)), backing_(backing) {}

NDImage::~NDImage() = default;

std::shared_ptr<NDImage> NDImage::create(PixelType type, std::vector<Axis> axes,
                                         Backing backing, CellParams params) {
  if (axes.empty())
    throw ImageError("an image needs at least one axis");
  std::shared_ptr<NDImage> img(new NDImage(type, std::move(axes), backing));
  std::uint64_t total = 1;
  for (const auto &a : img->axes_) {
    if (a.length < 1)
      throw ImageError("axis " + a.label.name() + " has length " +
                       std::to_string(a.length) + "; lengths must be >= 1");
    auto len = static_cast<std::uint64_t>(a.length);
    if (total > static_cast<std::uint64_t>(
                    std::numeric_limits<std::int64_t>::max()) /
                    len)
      throw ImageError("total sample count exceeds 2^63 - 1");
    img->strides_.push_back(total);
    total *= len;
    img->dims_.push_back(a.length);
  }
  img->total_ = total;
  const auto &dims = img->dims_;

  switch (backing) {
  case Backing::Array:
    if (total > kMaxContiguousSamples)
      throw ImageError("array image of " + join_dims(dims) + " holds " +
                       std::to_string(total) +
                       " samples; one contiguous buffer is limited to 2^31 - 1");
    img->storage_ = std::make_unique<detail::ArrayStorage>(type, total);
    break;
  case Backing::Planar: {
    std::uint64_t plane = static_cast<std::uint64_t>(dims[0]) *
                          (dims.size() > 1 ? static_cast<std::uint64_t>(dims[1]) : 1);
    if (plane > kMaxContiguousSamples)
      throw ImageError("planar image plane of " + std::to_string(plane) +
                       " samples is too large; planes are limited to 2^31 - 1");
    img->storage_ =
        std::make_unique<detail::PlanarStorage>(type, plane, total / plane);
    break;
  }
  case Backing::Cell: {
    if (params.cell_dims.empty())
      params.cell_dims.assign(dims.size(), kDefaultCellLength);
    if (params.cell_dims.size() != dims.size())
      throw ImageError("cell dims have " +
                       std::to_string(params.cell_dims.size()) +
                       " entries for a " + std::to_string(dims.size()) +
                       "-d image");
    for (std::size_t d = 0; d < dims.size(); ++d) {
      if (params.cell_dims[d] < 1)
        throw ImageError("cell dims must be >= 1");
      params.cell_dims[d] = std::min(params.cell_dims[d], dims[d]);
    }
    if (params.cache_budget_bytes == 0)
      throw ImageError("cell cache budget must be positive");
    img->storage_ = std::make_unique<detail::CellStorage>(type, dims, params);
    img->cell_params_ = std::move(params);
    break;
  }
  }
  return img;
}

std::uint64_t NDImage::linear_index(std::span<const std::int64_t> pos) const {
  if (!contains(pos)) {
    std::string p;
    for (std::size_t i = 0; i < pos.size(); ++i)
      p += (i ? "," : "") + std::to_string(pos[i]);
    throw BoundsError("position (" + p + ") is outside image " +
                      join_dims(dims_));
  }
  std::uint64_t lin = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d)
    lin += static_cast<std::uint64_t>(pos[d]) * strides_[d];
  return lin;
}

void NDImage::position_of(std::uint64_t linear,
                          std::span<std::int64_t> out) const {
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    out[d] = static_cast<std::int64_t>(linear % static_cast<std::uint64_t>(dims_[d]));
    linear /= static_cast<std::uint64_t>(dims_[d]);
  }
}

bool NDImage::contains(std::span<const std::int64_t> pos) const {
  if (pos.size() != dims_.size())
    return false;
  for (std::size_t d = 0; d < dims_.size(); ++d)
    if (pos[d] < 0 || pos[d] >= dims_[d])
      return false;
  return true;
}

Box NDImage::bounds() const {
  Box b{std::vector<std::int64_t>(dims_.size(), 0), dims_};
  for (auto &m : b.max)
    --m;
  return b;
}

double NDImage::get(std::span<const std::int64_t> pos) const {
  return type_.decode(storage_->load(linear_index(pos)));
}

void NDImage::set(std::span<const std::int64_t> pos, double value) {
  storage_->store(linear_index(pos), type_.encode(value));
}

std::int64_t NDImage::get_integer(std::span<const std::int64_t> pos) const {
  return type_.decode_integer(storage_->load(linear_index(pos)));
}

void NDImage::set_integer(std::span<const std::int64_t> pos, std::int64_t value) {
  storage_->store(linear_index(pos), type_.encode_integer(value));
}

std::uint64_t NDImage::get_raw(std::span<const std::int64_t> pos) const {
  return storage_->load(linear_index(pos));
}

void NDImage::set_raw(std::span<const std::int64_t> pos, std::uint64_t raw) {
  storage_->store(linear_index(pos), raw);
}

double NDImage::get_at(std::uint64_t linear) const {
  return type_.decode(storage_->load(linear));
}

void NDImage::set_at(std::uint64_t linear, double value) {
  storage_->store(linear, type_.encode(value));
}

std::uint64_t NDImage::get_raw_at(std::uint64_t linear) const {
  return storage_->load(linear);
}

void NDImage::set_raw_at(std::uint64_t linear, std::uint64_t raw) {
  storage_->store(linear, raw);
}

std::span<std::byte> NDImage::array_bytes() {
  if (backing_ != Backing::Array)
    throw ImageError("not an array image");
  return static_cast<detail::ArrayStorage &>(*storage_).bytes();
}

std::span<const std::byte> NDImage::array_bytes() const {
  return const_cast<NDImage *>(this)->array_bytes();
}

std::size_t NDImage::plane_count() const {
  if (backing_ != Backing::Planar)
    throw ImageError("not a planar image");
  return static_cast<detail::PlanarStorage &>(*storage_).planes().size();
}

std::uint64_t NDImage::plane_samples() const {
  if (backing_ != Backing::Planar)
    throw ImageError("not a planar image");
  return static_cast<detail::PlanarStorage &>(*storage_).plane_samples();
}

std::span<std::byte> NDImage::plane_bytes(std::size_t plane) {
  if (backing_ != Backing::Planar)
    throw ImageError("not a planar image");
  return static_cast<detail::PlanarStorage &>(*storage_).planes().at(plane);
}

std::span<const std::byte> NDImage::plane_bytes(std::size_t plane) const {
  return const_cast<NDImage *>(this)->plane_bytes(plane);
}

void NDImage::check_block(const Box &box, std::size_t n) const {
  if (box.min.size() != dims_.size() || box.max.size() != dims_.size())
    throw BoundsError("block rank does not match image rank");
  for (std::size_t d = 0; d < dims_.size(); ++d)
    if (box.min[d] < 0 || box.max[d] >= dims_[d] || box.min[d] > box.max[d])
      throw BoundsError("block is outside image " + join_dims(dims_));
  if (n != box.volume())
    throw BoundsError("block buffer holds " + std::to_string(n) +
                      " samples, block has " + std::to_string(box.volume()));
}

void NDImage::read_block_raw(const Box &box, std::span<std::uint64_t> out) const {
  check_block(box, out.size());
  std::vector<std::int64_t> pos = box.min;
  const auto run = static_cast<std::uint64_t>(box.max[0] - box.min[0] + 1);
  std::uint64_t offset = 0;
  for (;;) {
    storage_->load_run(linear_index(pos), run, out.data() + offset);
    offset += run;
    std::size_t d = 1;
    while (d < pos.size() && ++pos[d] > box.max[d]) {
      pos[d] = box.min[d];
      ++d;
    }
    if (d >= pos.size())
      break;
  }
}

void NDImage::write_block_raw(const Box &box, std::span<const std::uint64_t> in) {
  check_block(box, in.size());
  std::vector<std::int64_t> pos = box.min;
  const auto run = static_cast<std::uint64_t>(box.max[0] - box.min[0] + 1);
  std::uint64_t offset = 0;
  for (;;) {
    storage_->store_run(linear_index(pos), run, in.data() + offset);
    offset += run;
    std::size_t d = 1;
    while (d < pos.size() && ++pos[d] > box.max[d]) {
      pos[d] = box.min[d];
      ++d;
    }
    if (d >= pos.size())
      break;
  }
}

void NDImage::read_block(const Box &box, std::span<double> out) const {
  std::vector<std::uint64_t> raw(out.size());
  read_block_raw(box, raw);
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = type_.decode(raw[i]);
}

void NDImage::write_block(const Box &box, std::span<const double> in) {
  std::vector<std::uint64_t> raw(in.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = type_.encode(in[i]);
  write_block_raw(box, raw);
}

std::vector<Box> NDImage::chunks() const {
  if (backing_ == Backing::Cell) {
    auto &cells = static_cast<detail::CellStorage &>(*storage_);
    std::vector<Box> out;
    out.reserve(cells.cell_count());
    for (std::uint64_t i = 0; i < cells.cell_count(); ++i)
      out.push_back(cells.cell_box(i));
    return out;
  }
  return row_slabs(dims_);
}

CacheStats NDImage::cache_stats() const {
  if (backing_ != Backing::Cell)
    throw ImageError("cache statistics exist only for cell images");
  return static_cast<detail::CellStorage &>(*storage_).stats();
}

std::uint64_t NDImage::cell_count() const {
  if (backing_ != Backing::Cell)
    throw ImageError("not a cell image");
  return static_cast<detail::CellStorage &>(*storage_).cell_count();
}

Box NDImage::cell_box(std::uint64_t cell_index) const {
  if (backing_ != Backing::Cell)
    throw ImageError("not a cell image");
  auto &cells = static_cast<detail::CellStorage &>(*storage_);
  if (cell_index >= cells.cell_count())
    throw BoundsError("cell index " + std::to_string(cell_index) +
                      " out of range");
  return cells.cell_box(cell_index);
}

void NDImage::set_cell_source(CellSource source) {
  if (backing_ != Backing::Cell)
    throw ImageError("not a cell image");
  static_cast<detail::CellStorage &>(*storage_).set_source(std::move(source));
}

void NDImage::flush_cells() {
  if (backing_ != Backing::Cell)
    throw ImageError("not a cell image");
  static_cast<detail::CellStorage &>(*storage_).flush();
}

std::shared_ptr<NDImage> NDImage::create_like() const {
  return create_like(type_);
}

std::shared_ptr<NDImage> NDImage::create_like(PixelType type) const {
  CellParams params;
  if (backing_ == Backing::Cell) {
    params.cell_dims = cell_params_.cell_dims;
    params.cache_budget_bytes = cell_params_.cache_budget_bytes;
  }
  return create(type, axes_, backing_, params);
}

ImagePtr copy_image(const NDImage &src, Backing backing, CellParams params) {
  auto dst = NDImage::create(src.pixel_type(), src.axes(), backing, std::move(params));
  std::vector<std::uint64_t> buf;
  for (const auto &box : src.chunks()) {
    buf.resize(box.volume());
    src.read_block_raw(box, buf);
    dst->write_block_raw(box, buf);
  }
  return dst;
}

std::uint64_t content_hash(const NDImage &img) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(img.pixel_type().code()));
  for (auto d : img.dims())
    mix(static_cast<std::uint64_t>(d));
  std::vector<std::uint64_t> buf;
  for (const auto &box : row_slabs(img.dims())) {
    buf.resize(box.volume());
    img.read_block_raw(box, buf);
    for (auto v : buf)
      mix(v);
  }
  return h;
}

bool same_samples(const NDImage &a, const NDImage &b) {
  if (a.dims() != b.dims() || !(a.pixel_type() == b.pixel_type()))
    return false;
  std::vector<std::uint64_t> ba, bb;
  for (const auto &box : row_slabs(a.dims())) {
    ba.resize(box.volume());
    bb.resize(box.volume());
    a.read_block_raw(box, ba);
    b.read_block_raw(box, bb);
    if (ba != bb)
      return false;
  }
  return true;
}

Cursor::Cursor(NDImage &img, std::optional<Region> region)
    : Cursor(static_cast<const NDImage &>(img), std::move(region)) {
  mutable_img_ = &img;
}

void Cursor::set(double v) {
  if (mutable_img_ == nullptr)
    throw ImageError("cursor is read-only");
  mutable_img_->set_at(linear_, v);
}

Cursor::Cursor(const NDImage &img, std::optional<Region> region)
    : img_(&img), region_(region ? std::move(*region) : Region{img.bounds(), {}}) {
  const auto &b = region_.bounds;
  if (b.min.size() != img.num_dims() || b.max.size() != img.num_dims())
    throw BoundsError("region rank does not match image rank");
  for (std::size_t d = 0; d < img.num_dims(); ++d)
    if (b.min[d] > b.max[d] || b.min[d] < 0 || b.max[d] >= img.dims()[d])
      throw BoundsError("region does not fit inside the image");
  pos_ = b.min;
}

bool Cursor::step() {
  const auto &b = region_.bounds;
  std::size_t d = 0;
  while (d < pos_.size() && ++pos_[d] > b.max[d]) {
    pos_[d] = b.min[d];
    ++d;
  }
  if (d >= pos_.size()) {
    done_ = true;
    return false;
  }
  return true;
}

bool Cursor::next() {
  if (done_)
    return false;
  if (!started_)
    started_ = true;
  else if (!step())
    return false;
  while (region_.mask && !region_.mask(pos_))
    if (!step())
      return false;
  linear_ = img_->linear_index(pos_);
  return true;
}

Dataset::Dataset(std::string name, ImagePtr image, std::optional<Location> source)
    : name_(std::move(name)), image_(std::move(image)), source_(std::move(source)) {
  if (!image_)
    throw ImageError("dataset '" + name_ + "' has no image");
  std::set<std::string> labels;
  for (const auto &a : image_->axes())
    if (!labels.insert(a.label.name()).second)
      throw ImageError("dataset '" + name_ + "' repeats axis label " +
                       a.label.name());
}

std::string dims_string(const NDImage &img) { return join_dims(img.dims()); }

} // namespace ndforge
