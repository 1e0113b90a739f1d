#include "ndforge/io.hpp"

#include "formats.hpp"
#include "ndforge/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <mutex>

namespace ndforge::io {

// ---- handles ---------------------------------------------------------------

std::size_t DataHandle::read(std::span<std::byte> out) {
  const std::size_t n = do_read(pos_, out);
  if (n > 0)
    reads_.push_back({pos_, pos_ + n});
  pos_ += n;
  return n;
}

void DataHandle::read_exact(std::span<std::byte> out) {
  const std::uint64_t at = pos_;
  if (read(out) != out.size())
    throw FormatError("unexpected end of data", std::min(at + out.size(), length()));
}

std::vector<std::byte> DataHandle::read_all() {
  std::vector<std::byte> out(length() > pos_ ? length() - pos_ : 0);
  out.resize(read(out));
  return out;
}

void DataHandle::write(std::span<const std::byte> in) {
  do_write(pos_, in);
  pos_ += in.size();
}

namespace {

class MemoryHandle final : public DataHandle {
public:
  explicit MemoryHandle(std::shared_ptr<std::vector<std::byte>> buf) : buf_(std::move(buf)) {}

  std::uint64_t length() const override { return buf_->size(); }

protected:
  std::size_t do_read(std::uint64_t pos, std::span<std::byte> out) override {
    if (pos >= buf_->size())
      return 0;
    const std::size_t n = std::min<std::uint64_t>(out.size(), buf_->size() - pos);
    std::memcpy(out.data(), buf_->data() + pos, n);
    return n;
  }

  void do_write(std::uint64_t pos, std::span<const std::byte> in) override {
    if (pos + in.size() > buf_->size())
      buf_->resize(pos + in.size());
    std::memcpy(buf_->data() + pos, in.data(), in.size());
  }

private:
  std::shared_ptr<std::vector<std::byte>> buf_;
};

class FileHandle final : public DataHandle {
public:
  FileHandle(const std::filesystem::path &path, Mode mode) : path_(path) {
    std::ios::openmode m = std::ios::binary | std::ios::in;
    if (mode == Mode::Read) {
      if (!std::filesystem::is_regular_file(path))
        throw IoError("no such file: " + path.string());
    } else if (mode == Mode::Write || !std::filesystem::exists(path)) {
      std::ofstream create(path, std::ios::binary | std::ios::trunc);
      if (!create)
        throw IoError("cannot create " + path.string());
    }
    if (mode != Mode::Read)
      m |= std::ios::out;
    file_.open(path, m);
    if (!file_)
      throw IoError("cannot open " + path.string());
    file_.seekg(0, std::ios::end);
    length_ = static_cast<std::uint64_t>(file_.tellg());
  }

  std::uint64_t length() const override { return length_; }
  void flush() override { file_.flush(); }

protected:
  std::size_t do_read(std::uint64_t pos, std::span<std::byte> out) override {
    if (pos >= length_)
      return 0;
    file_.clear();
    file_.seekg(static_cast<std::streamoff>(pos));
    const auto n = std::min<std::uint64_t>(out.size(), length_ - pos);
    file_.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(file_.gcount());
  }

  void do_write(std::uint64_t pos, std::span<const std::byte> in) override {
    file_.clear();
    file_.seekp(static_cast<std::streamoff>(pos));
    file_.write(reinterpret_cast<const char *>(in.data()),
                static_cast<std::streamsize>(in.size()));
    if (!file_)
      throw IoError("write failed on " + path_.string());
    length_ = std::max<std::uint64_t>(length_, pos + in.size());
  }

private:
  std::filesystem::path path_;
  std::fstream file_;
  std::uint64_t length_ = 0;
};

std::string_view scheme_name(Scheme s) {
  switch (s) {
  case Scheme::File:
    return "file";
  case Scheme::Memory:
    return "memory";
  case Scheme::Url:
    return "url";
  }
  return "?";
}

std::string lower(std::string s) {
  for (auto &c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

} // namespace

std::unique_ptr<DataHandle> resolve_handle(const Context &ctx, const Location &loc,
                                           Mode mode) {
  const auto scheme = scheme_name(loc.scheme);
  for (const auto &meta : ctx.resolve_plugins(PluginKind::IO)) {
    if (meta.name != scheme)
      continue;
    if (const auto *f = std::any_cast<HandleFactory>(&meta.provider))
      return (*f)(loc, mode);
  }
  throw IoError("unsupported location scheme '" + std::string(scheme) + "'");
}

// ---- metadata --------------------------------------------------------------

std::vector<std::int64_t> ImageMetadata::dims() const {
  std::vector<std::int64_t> d;
  for (const auto &a : axes)
    d.push_back(a.length);
  return d;
}

bool operator==(const ImageMetadata &a, const ImageMetadata &b) {
  if (a.model != b.model || a.name != b.name || !(a.type == b.type) ||
      a.pairs != b.pairs || a.axes.size() != b.axes.size())
    return false;
  for (std::size_t i = 0; i < a.axes.size(); ++i)
    if (!(a.axes[i].label == b.axes[i].label) || a.axes[i].length != b.axes[i].length)
      return false;
  return true;
}

Box grid_cell_box(std::span<const std::int64_t> dims,
                  std::span<const std::int64_t> cell_dims, std::uint64_t index) {
  Box b;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto grid = static_cast<std::uint64_t>((dims[d] + cell_dims[d] - 1) / cell_dims[d]);
    const auto c = static_cast<std::int64_t>(index % grid);
    index /= grid;
    b.min.push_back(c * cell_dims[d]);
    b.max.push_back(std::min(dims[d], (c + 1) * cell_dims[d]) - 1);
  }
  return b;
}

std::vector<std::byte> Format::read_block(DataHandle &, const ImageMetadata &,
                                          std::uint64_t) const {
  throw FormatError("format '" + id() + "' has no block reads");
}

// ---- format registry -------------------------------------------------------

void register_format(Context &ctx, FormatPtr format, std::int32_t priority) {
  PluginMetadata meta;
  meta.id = "format." + format->id();
  meta.kind = PluginKind::Format;
  meta.name = format->id();
  meta.priority = priority;
  meta.provider = std::move(format);
  ctx.register_plugin(std::move(meta));
}

std::vector<FormatPtr> list_formats(const Context &ctx) {
  std::vector<FormatPtr> out;
  for (const auto &meta : ctx.resolve_plugins(PluginKind::Format))
    if (const auto *f = std::any_cast<FormatPtr>(&meta.provider); f && *f)
      out.push_back(*f);
  return out;
}

FormatPtr find_format(const Context &ctx, std::string_view id) {
  for (auto &f : list_formats(ctx))
    if (f->id() == id)
      return f;
  return nullptr;
}

FormatPtr detect_format(const Context &ctx, const Location &loc) {
  auto handle = resolve_handle(ctx, loc);
  std::vector<std::byte> head(16);
  head.resize(handle->read(head));
  const std::string name = lower(loc.name());

  FormatPtr best;
  int best_rank = 0;
  for (const auto &f : list_formats(ctx)) {
    int rank = 0;
    for (const auto &m : f->magics())
      if (!m.empty() && head.size() >= m.size() &&
          std::memcmp(head.data(), m.data(), m.size()) == 0)
        rank = 2;
    if (rank == 0)
      for (const auto &s : f->suffixes()) {
        const std::string suffix = "." + lower(s);
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
          rank = 1;
      }
    if (rank > best_rank) {
      best = f;
      best_rank = rank;
    }
  }
  if (!best)
    throw FormatError("no format recognizes '" + loc.name() + "'");
  return best;
}

// ---- open / save -----------------------------------------------------------

DatasetPtr read(const Context &ctx, const Location &loc, const OpenOptions &options) {
  auto format = detect_format(ctx, loc);
  if (!format->caps().read)
    throw FormatError("format '" + format->id() + "' cannot read");
  std::shared_ptr<DataHandle> handle = resolve_handle(ctx, loc);
  ImageMetadata meta = format->read_metadata(*handle);
  std::uint64_t samples = 1;
  for (auto d : meta.dims())
    samples *= static_cast<std::uint64_t>(d);
  const auto bytes = packed_storage_bytes(meta.type, samples);

  ImagePtr img;
  if (format->caps().block_read && bytes > options.cell_threshold_bytes) {
    CellParams params;
    params.cell_dims = meta.cell_dims;
    params.cache_budget_bytes = options.cache_budget_bytes;
    img = NDImage::create(meta.type, meta.axes, Backing::Cell, params);
    auto mutex = std::make_shared<std::mutex>();
    img->set_cell_source([format, handle, meta, mutex](std::uint64_t idx,
                                                        std::span<std::byte> out) {
      std::lock_guard lock(*mutex);
      auto bytes = format->read_block(*handle, meta, idx);
      std::memcpy(out.data(), bytes.data(), std::min(bytes.size(), out.size()));
    });
  } else {
    img = format->read_image(*handle, meta, Backing::Array, {});
  }
  auto ds = std::make_shared<Dataset>(loc.name(), img, loc);
  ds->properties() = meta.pairs;
  return ds;
}

DatasetPtr open(Context &ctx, const Location &loc, const OpenOptions &options) {
  auto ds = read(ctx, loc, options);
  ctx.set_active_dataset(ds);
  return ds;
}

void save(const Context &ctx, const Dataset &dataset, const Location &loc,
          const std::string &format_id, const SaveOptions &options) {
  auto format = find_format(ctx, format_id);
  if (!format)
    throw FormatError("unknown format '" + format_id + "'");
  if (!format->caps().write)
    throw FormatError("format '" + format_id + "' cannot write");
  if (loc.scheme == Scheme::File) {
    // Encode fully before replacing the destination.
    auto buffer = std::make_shared<std::vector<std::byte>>();
    {
      auto mem = resolve_handle(ctx, Location::memory(buffer), Mode::Write);
      format->write(dataset, *mem, options);
    }
    auto tmp = loc.path;
    tmp += ".tmp";
    {
      auto h = resolve_handle(ctx, Location::file(tmp), Mode::Write);
      h->write(*buffer);
      h->flush();
    }
    std::filesystem::rename(tmp, loc.path);
    return;
  }
  auto handle = resolve_handle(ctx, loc, Mode::Write);
  format->write(dataset, *handle, options);
  handle->flush();
}

std::vector<std::byte> read_block(const Format &format, DataHandle &handle,
                                  const ImageMetadata &meta, std::uint64_t cell_index) {
  if (!format.caps().block_read)
    throw FormatError("format '" + format.id() + "' has no block reads");
  return format.read_block(handle, meta, cell_index);
}

// ---- raw -------------------------------------------------------------------

RawParams parse_raw_params(std::span<const std::string> tokens) {
  RawParams p;
  bool have_type = false;
  for (const auto &t : tokens) {
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("raw: expected key=value, got '" + t + "'");
    const std::string key = t.substr(0, eq), value = t.substr(eq + 1);
    if (key == "dims") {
      p.dims.clear();
      std::size_t start = 0;
      for (;;) {
        const auto x = value.find('x', start);
        const std::string part = value.substr(start, x - start);
        std::size_t used = 0;
        long long v = 0;
        try {
          v = std::stoll(part, &used);
        } catch (const std::exception &) {
          used = 0;
        }
        if (used != part.size() || part.empty() || v < 1)
          throw UsageError("raw: bad dims '" + value + "'");
        p.dims.push_back(v);
        if (x == std::string::npos)
          break;
        start = x + 1;
      }
    } else if (key == "type") {
      auto type = PixelType::parse(value);
      if (!type)
        throw UsageError("raw: unknown pixel type '" + value + "'");
      p.type = *type;
      have_type = true;
    } else if (key == "offset") {
      try {
        std::size_t used = 0;
        p.offset = std::stoull(value, &used);
        if (used != value.size())
          throw std::invalid_argument(value);
      } catch (const std::exception &) {
        throw UsageError("raw: bad offset '" + value + "'");
      }
    } else {
      throw UsageError("raw: unknown key '" + key + "'");
    }
  }
  if (p.dims.empty() || !have_type)
    throw UsageError("raw: dims= and type= are required");
  return p;
}

DatasetPtr read_raw(const Context &ctx, const Location &loc, const RawParams &params) {
  auto handle = resolve_handle(ctx, loc);
  std::uint64_t samples = 1;
  for (auto d : params.dims)
    samples *= static_cast<std::uint64_t>(d);
  std::vector<std::byte> bytes(packed_storage_bytes(params.type, samples));
  handle->seek(params.offset);
  handle->read_exact(bytes);
  std::vector<std::uint64_t> raw(samples);
  detail::unpack(bytes, params.type, raw);
  auto img = NDImage::create(params.type, make_axes(params.dims));
  img->write_block_raw(img->bounds(), raw);
  return std::make_shared<Dataset>(loc.name(), img, loc);
}

// ---- translation -----------------------------------------------------------

void register_translator(Context &ctx, std::string id, Translator translator,
                         std::int32_t priority) {
  PluginMetadata meta;
  meta.id = std::move(id);
  meta.kind = PluginKind::Translator;
  meta.name = translator.source + "->" + translator.target;
  meta.priority = priority;
  meta.provider = std::make_shared<const Translator>(std::move(translator));
  ctx.register_plugin(std::move(meta));
}

ImageMetadata translate(const Context &ctx, const ImageMetadata &meta,
                        const std::string &target) {
  if (meta.model == target)
    return meta;
  for (const auto &p : ctx.resolve_plugins(PluginKind::Translator)) {
    const auto *t = std::any_cast<std::shared_ptr<const Translator>>(&p.provider);
    if (t && *t && (*t)->source == meta.model && (*t)->target == target) {
      ImageMetadata out = (*t)->apply(meta);
      out.model = target;
      return out;
    }
  }
  throw Error("no translator from '" + meta.model + "' to '" + target + "'");
}

ImageMetadata metadata_of(const Dataset &dataset, std::string model) {
  ImageMetadata m;
  m.model = std::move(model);
  m.name = dataset.name();
  m.axes = dataset.image()->axes();
  m.type = dataset.image()->pixel_type();
  m.pairs = dataset.properties();
  return m;
}

namespace {

/// Copies structure and renames keys through `rename`; keys it rejects are
/// kept under the "unmapped." prefix.
ImageMetadata remap(const ImageMetadata &in,
                    const std::function<std::optional<std::string>(const std::string &)> &rename) {
  ImageMetadata out = in;
  out.pairs.clear();
  for (const auto &[k, v] : in.pairs) {
    if (auto nk = rename(k))
      out.pairs[*nk] = v;
    else
      out.pairs["unmapped." + k] = v;
  }
  return out;
}

std::function<std::optional<std::string>(const std::string &)>
prefix_swap(std::string from, std::string to) {
  return [from, to](const std::string &k) -> std::optional<std::string> {
    if (k.rfind(from, 0) == 0)
      return to + k.substr(from.size());
    return std::nullopt;
  };
}

void register_builtin_translators(Context &ctx) {
  register_translator(ctx, "translate.pgm-to-generic",
                      {"pgm", "generic", [](const ImageMetadata &m) {
                         return remap(m, prefix_swap("pgm.comment.", "comment."));
                       }});
  register_translator(ctx, "translate.generic-to-pgm",
                      {"generic", "pgm", [](const ImageMetadata &m) {
                         return remap(m, prefix_swap("comment.", "pgm.comment."));
                       }});
  register_translator(ctx, "translate.nchk-to-generic",
                      {"nchk", "generic", [](const ImageMetadata &m) {
                         auto out = remap(m, prefix_swap("nchk.", "format."));
                         for (std::size_t i = 0; i < m.axes.size(); ++i)
                           out.pairs["axis." + std::to_string(i)] = m.axes[i].label.name();
                         return out;
                       }});
}

} // namespace

void register_builtin_io(Context &ctx) {
  {
    PluginMetadata meta;
    meta.id = "handle.file";
    meta.kind = PluginKind::IO;
    meta.name = "file";
    meta.provider = HandleFactory([](const Location &loc, Mode mode) {
      return std::unique_ptr<DataHandle>(std::make_unique<FileHandle>(loc.path, mode));
    });
    ctx.register_plugin(std::move(meta));
  }
  {
    PluginMetadata meta;
    meta.id = "handle.memory";
    meta.kind = PluginKind::IO;
    meta.name = "memory";
    meta.provider = HandleFactory([](const Location &loc, Mode mode) {
      if (!loc.buffer)
        throw IoError("memory location without a buffer");
      if (mode == Mode::Write)
        loc.buffer->clear();
      return std::unique_ptr<DataHandle>(std::make_unique<MemoryHandle>(loc.buffer));
    });
    ctx.register_plugin(std::move(meta));
  }
  register_format(ctx, detail::make_pgm_format());
  register_format(ctx, detail::make_nchk_format());
  register_builtin_translators(ctx);
}

} // namespace ndforge::io
