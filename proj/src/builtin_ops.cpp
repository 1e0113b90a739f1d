#include "ndforge/error.hpp"
#include "ndforge/ops.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <numbers>
#include <thread>

namespace ndforge::ops {

static_assert(std::endian::native == std::endian::little,
              "raw sample buffers are little-endian");

namespace {

using ST = SemanticType;

ImagePtr image_arg(Args args, std::size_t i) {
  auto img = as_image(args[i]);
  if (!img)
    throw OpError("argument " + std::to_string(i + 1) + " is not an image");
  return img;
}

double scalar_arg(Args args, std::size_t i) {
  auto v = as_double(args[i]);
  if (!v)
    throw OpError("argument " + std::to_string(i + 1) + " is not a number");
  return *v;
}

void require_same_dims(const NDImage &a, const NDImage &b, std::string_view what) {
  if (a.dims() != b.dims())
    throw OpError(std::string(what) + ": dimension mismatch " + dims_string(a) +
                  " vs " + dims_string(b));
}

/// out[i] = f(in[i]) over the input's natural chunks.
template <class F> void apply_unary(const NDImage &in, NDImage &out, F f) {
  require_same_dims(in, out, "output");
  std::vector<double> buf;
  for (const auto &box : in.chunks()) {
    buf.resize(box.volume());
    in.read_block(box, buf);
    for (auto &v : buf)
      v = f(v);
    out.write_block(box, buf);
  }
}

template <class F>
void apply_binary(const NDImage &a, const NDImage &b, NDImage &out, F f) {
  require_same_dims(a, b, "element-wise op");
  require_same_dims(a, out, "output");
  std::vector<double> ba, bb;
  for (const auto &box : a.chunks()) {
    ba.resize(box.volume());
    bb.resize(box.volume());
    a.read_block(box, ba);
    b.read_block(box, bb);
    for (std::size_t i = 0; i < ba.size(); ++i)
      ba[i] = f(ba[i], bb[i]);
    out.write_block(box, ba);
  }
}

Value make_like(Args args) { return image_arg(args, 0)->create_like(); }

bool byte_aligned(const Value &v) {
  auto img = as_image(v);
  return img && !img->pixel_type().is_packed();
}

ParamType byte_aligned_image(Backing backing) {
  ParamType p = ParamType::image(backing);
  p.constraint = byte_aligned;
  p.constraint_label = "byte-aligned";
  return p;
}

OpSignature sig(std::string name, std::vector<ParamType> params, ST output) {
  return OpSignature{std::move(name), std::move(params), output};
}

// ---- math.add(image, constant) kernels -------------------------------------

/// Precomputed encode(decode(r) + c) for 8 and 16 bit types.
struct AddTable {
  PixelType type;
  double c = 0;
  bool saturating_u8 = false;
  int ci = 0;
  std::vector<std::uint16_t> lut;

  AddTable(PixelType t, double constant) : type(t), c(constant) {
    if (t.code() == PixelTypeCode::UInt8 && std::isfinite(c) && c == std::trunc(c)) {
      saturating_u8 = true;
      ci = static_cast<int>(std::clamp(c, -256.0, 256.0));
    } else if (t.bits() == 8 || t.bits() == 16) {
      lut.resize(std::size_t{1} << t.bits());
      for (std::size_t r = 0; r < lut.size(); ++r)
        lut[r] = static_cast<std::uint16_t>(t.encode(t.decode(r) + c));
    }
  }

  void run(const std::byte *src, std::byte *dst, std::uint64_t n) const {
    if (saturating_u8) {
      const auto *s = reinterpret_cast<const std::uint8_t *>(src);
      auto *d = reinterpret_cast<std::uint8_t *>(dst);
      const int k = ci;
      for (std::uint64_t i = 0; i < n; ++i) {
        int v = s[i] + k;
        v = v < 0 ? 0 : v;
        v = v > 255 ? 255 : v;
        d[i] = static_cast<std::uint8_t>(v);
      }
      return;
    }
    if (type.bits() == 8) {
      const auto *s = reinterpret_cast<const std::uint8_t *>(src);
      auto *d = reinterpret_cast<std::uint8_t *>(dst);
      for (std::uint64_t i = 0; i < n; ++i)
        d[i] = static_cast<std::uint8_t>(lut[s[i]]);
      return;
    }
    if (type.bits() == 16) {
      for (std::uint64_t i = 0; i < n; ++i) {
        std::uint16_t r;
        std::memcpy(&r, src + 2 * i, 2);
        r = lut[r];
        std::memcpy(dst + 2 * i, &r, 2);
      }
      return;
    }
    const unsigned bits = type.bits();
    for (std::uint64_t i = 0; i < n; ++i) {
      auto raw = detail::load_packed(src, bits, i);
      detail::store_packed(dst, bits, i, type.encode(type.decode(raw) + c));
    }
  }
};

void require_byte_aligned(const NDImage &img, std::string_view variant) {
  if (img.pixel_type().is_packed())
    throw OpError(std::string(variant) + " requires a byte-aligned pixel type, got " +
                  std::string(img.pixel_type().name()));
}

// ---- gauss -----------------------------------------------------------------

/// Reflect without repeating the edge sample; period 2(n-1).
std::int64_t mirror(std::int64_t i, std::int64_t n) {
  if (n == 1)
    return 0;
  const std::int64_t period = 2 * (n - 1);
  std::int64_t m = i % period;
  if (m < 0)
    m += period;
  return m < n ? m : period - m;
}

void convolve_axis(std::vector<double> &data, std::span<const std::int64_t> dims,
                   std::size_t axis, const std::vector<double> &kernel) {
  const auto r = static_cast<std::int64_t>(kernel.size() / 2);
  std::uint64_t stride = 1;
  for (std::size_t d = 0; d < axis; ++d)
    stride *= static_cast<std::uint64_t>(dims[d]);
  const std::int64_t n = dims[axis];
  const std::uint64_t block = stride * static_cast<std::uint64_t>(n);
  const std::uint64_t outer = data.size() / block;
  std::vector<double> line(static_cast<std::size_t>(n));
  for (std::uint64_t o = 0; o < outer; ++o) {
    for (std::uint64_t inner = 0; inner < stride; ++inner) {
      const std::uint64_t base = o * block + inner;
      for (std::int64_t i = 0; i < n; ++i)
        line[i] = data[base + i * stride];
      for (std::int64_t i = 0; i < n; ++i) {
        double acc = 0;
        for (std::int64_t k = -r; k <= r; ++k)
          acc += kernel[k + r] * line[mirror(i + k, n)];
        data[base + i * stride] = acc;
      }
    }
  }
}

// ---- map -------------------------------------------------------------------

using ScalarFn = std::function<double(double)>;

ScalarFn scalar_function(Context &ctx, const std::string &op_name,
                         const std::vector<Value> &extra) {
  OpRequest req;
  req.name = op_name;
  req.args.push_back(0.0);
  req.args.insert(req.args.end(), extra.begin(), extra.end());
  req.kind = OpKind::Function;
  Match m = match(ctx, req);
  if (type_of(m.args[0]) != ST::Float64)
    throw NoMatchError("map: '" + op_name + "' does not take a scalar sample");
  if (m.op->body.scalar_kernel && m.args.size() <= 2) {
    double second = 0;
    if (m.args.size() == 2) {
      auto v = as_double(m.args[1]);
      if (!v)
        throw OpError("map: extra argument of '" + op_name + "' is not numeric");
      second = *v;
    }
    auto kernel = m.op->body.scalar_kernel;
    return [kernel, second](double x) { return kernel(x, second); };
  }
  auto op = m.op;
  auto args = std::make_shared<std::vector<Value>>(m.args);
  return [&ctx, op, args](double x) {
    std::vector<Value> a = *args;
    a[0] = x;
    auto r = as_double(op->body.calculate(ctx, a));
    if (!r)
      throw OpError("map: '" + op->id + "' did not return a number");
    return *r;
  };
}

/// Runs `work(i)` for i in [0, n) over `threads` contiguous ranges.
template <class W> void parallel_ranges(std::size_t n, unsigned threads, W work) {
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i)
      work(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
    pool.emplace_back([&, t, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i)
          work(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto &th : pool)
    th.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

CellParams like_params(const NDImage &img) {
  CellParams p;
  if (img.backing() == Backing::Cell) {
    p.cell_dims = img.cell_params().cell_dims;
    p.cache_budget_bytes = img.cell_params().cache_budget_bytes;
  }
  return p;
}

} // namespace

// ---- public direct implementations -----------------------------------------

namespace add_variants {

void generic(const NDImage &in, double c, NDImage &out) {
  require_same_dims(in, out, "output");
  const std::uint64_t n = in.size();
  for (std::uint64_t i = 0; i < n; ++i)
    out.set_at(i, in.get_at(i) + c);
}

void planar(const NDImage &in, double c, NDImage &out) {
  if (in.backing() != Backing::Planar || out.backing() != Backing::Planar)
    throw OpError("planar add requires planar input and output");
  require_same_dims(in, out, "output");
  require_byte_aligned(in, "planar add");
  if (!(in.pixel_type() == out.pixel_type()))
    throw OpError("planar add requires matching pixel types");
  AddTable table(in.pixel_type(), c);
  for (std::size_t p = 0; p < in.plane_count(); ++p)
    table.run(in.plane_bytes(p).data(), out.plane_bytes(p).data(), in.plane_samples());
}

void array_inplace(NDImage &img, double c) {
  if (img.backing() != Backing::Array)
    throw OpError("array add requires an array image");
  require_byte_aligned(img, "array add");
  AddTable table(img.pixel_type(), c);
  auto bytes = img.array_bytes();
  table.run(bytes.data(), bytes.data(), img.size());
}

void array_inplace_mt(NDImage &img, double c, unsigned threads) {
  if (img.backing() != Backing::Array)
    throw OpError("array add requires an array image");
  require_byte_aligned(img, "array add");
  AddTable table(img.pixel_type(), c);
  auto bytes = img.array_bytes();
  const std::uint64_t n = img.size();
  const std::uint64_t width = img.pixel_type().bits() / 8;
  threads = std::max(1u, threads);
  parallel_ranges(threads, threads, [&](std::size_t t) {
    const std::uint64_t lo = n * t / threads, hi = n * (t + 1) / threads;
    table.run(bytes.data() + lo * width, bytes.data() + lo * width, hi - lo);
  });
}

} // namespace add_variants

std::vector<double> gauss_kernel(double sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma))
    throw OpError("gauss: sigma must be positive, got " + format_double(sigma));
  const auto r = static_cast<std::int64_t>(std::ceil(3 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * r + 1));
  double total = 0;
  for (std::int64_t k = -r; k <= r; ++k) {
    w[k + r] = std::exp(-static_cast<double>(k * k) / (2 * sigma * sigma));
    total += w[k + r];
  }
  for (auto &v : w)
    v /= total;
  return w;
}

ImagePtr gauss(const NDImage &img, std::span<const double> sigmas) {
  std::vector<std::size_t> spatial;
  for (std::size_t d = 0; d < img.num_dims(); ++d)
    if (img.axes()[d].label.is_spatial())
      spatial.push_back(d);
  if (sigmas.size() != 1 && sigmas.size() != spatial.size())
    throw OpError("gauss: expected 1 or " + std::to_string(spatial.size()) +
                  " sigmas, got " + std::to_string(sigmas.size()));
  std::vector<std::vector<double>> kernels;
  for (std::size_t i = 0; i < spatial.size(); ++i)
    kernels.push_back(gauss_kernel(sigmas.size() == 1 ? sigmas[0] : sigmas[i]));
  if (spatial.empty())
    gauss_kernel(sigmas[0]);

  std::vector<double> data(img.size());
  const Box all = img.bounds();
  img.read_block(all, data);
  for (std::size_t i = 0; i < spatial.size(); ++i)
    convolve_axis(data, img.dims(), spatial[i], kernels[i]);
  auto out = img.create_like();
  out->write_block(all, data);
  return out;
}

ImagePtr gauss(const NDImage &img, double sigma) {
  return gauss(img, std::span<const double>(&sigma, 1));
}

double sum(const NDImage &img, const Region *region) {
  double acc = 0;
  if (region) {
    Cursor c(img, *region);
    while (c.next())
      acc += c.get();
    return acc;
  }
  std::vector<double> buf;
  for (const auto &box : row_slabs(img.dims())) {
    buf.resize(box.volume());
    img.read_block(box, buf);
    for (double v : buf)
      acc += v;
  }
  return acc;
}

double size(const NDImage &img, const Region *region) {
  if (!region)
    return static_cast<double>(img.size());
  if (!region->mask)
    return static_cast<double>(region->bounds.volume());
  std::uint64_t n = 0;
  Cursor c(img, *region);
  while (c.next())
    ++n;
  return static_cast<double>(n);
}

double mean(Context &ctx, const ImagePtr &img, const Region *region) {
  OpRequest req;
  req.name = "math.div";
  req.args = {sum(*img, region), size(*img, region)};
  req.kind = OpKind::Function;
  auto r = as_double(run(ctx, req));
  if (!r)
    throw OpError("stats.mean: math.div did not return a number");
  return *r;
}

ImagePtr map(Context &ctx, const ImagePtr &img, const std::string &op_name,
             std::vector<Value> extra, const MapOptions &options) {
  if (!img)
    throw OpError("map: null image");
  ScalarFn f = scalar_function(ctx, op_name, extra);
  unsigned threads = std::max(1u, options.threads);
  if (img->pixel_type().is_packed() && img->backing() != Backing::Cell)
    threads = 1; // bands may share bytes

  if (!options.region) {
    auto out = img->create_like();
    const auto boxes = img->chunks();
    parallel_ranges(boxes.size(), threads, [&](std::size_t i) {
      std::vector<double> buf(boxes[i].volume());
      img->read_block(boxes[i], buf);
      for (auto &v : buf)
        v = f(v);
      out->write_block(boxes[i], buf);
    });
    return out;
  }

  const Region &region = *options.region;
  auto out = copy_image(*img, img->backing(), like_params(*img));
  const std::size_t last = img->num_dims() - 1;
  const std::int64_t lo = region.bounds.min.at(last);
  const std::int64_t extent = region.bounds.max.at(last) - lo + 1;
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, extent));
  parallel_ranges(threads, threads, [&](std::size_t t) {
    Region band = region;
    band.bounds.min[last] = lo + extent * static_cast<std::int64_t>(t) / threads;
    band.bounds.max[last] = lo + extent * static_cast<std::int64_t>(t + 1) / threads - 1;
    if (band.bounds.min[last] > band.bounds.max[last])
      return;
    Cursor c(*img, band);
    while (c.next())
      out->set_at(c.linear(), f(c.get()));
  });
  return out;
}

// ---- registration ----------------------------------------------------------

namespace {

using Kernel2 = double (*)(double, double);

void register_arithmetic(Context &ctx, const std::string &name, Kernel2 k,
                         bool is_div) {
  const std::string base = "math." + name;
  const auto P = ParamType::of;
  {
    OpCandidate op;
    op.id = base + ".scalar";
    op.signature = sig(base, {P(ST::Float64), P(ST::Float64)}, ST::Float64);
    op.kind = OpKind::Function;
    op.arity = 2;
    op.body.scalar_kernel = k;
    op.body.calculate = [k](Context &, Args a) -> Value {
      return k(scalar_arg(a, 0), scalar_arg(a, 1));
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = base + ".constant-generic";
    op.signature = sig(base, {ParamType::image(), P(ST::Float64)}, ST::Image);
    op.kind = OpKind::HybridCF;
    op.arity = 1;
    auto fill = [k, is_div, name](Args a, NDImage &out) {
      auto in = image_arg(a, 0);
      const double c = scalar_arg(a, 1);
      if (is_div && c == 0)
        throw OpError("math.div: division by scalar zero");
      if (name == "add") {
        add_variants::generic(*in, c, out);
        return;
      }
      apply_unary(*in, out, [k, c](double v) { return k(v, c); });
    };
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [fill](Context &, Args a, const Value &out) {
      fill(a, *as_image(out));
    };
    op.body.calculate = [fill](Context &, Args a) -> Value {
      auto out = image_arg(a, 0)->create_like();
      fill(a, *out);
      return out;
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = base + ".image-image";
    op.signature = sig(base, {ParamType::image(), ParamType::image()}, ST::Image);
    op.kind = OpKind::HybridCF;
    op.arity = 2;
    auto fill = [k, is_div](Args a, NDImage &out) {
      auto x = image_arg(a, 0);
      auto y = image_arg(a, 1);
      if (is_div && !out.pixel_type().is_float()) {
        const double top = out.pixel_type().max_value();
        apply_binary(*x, *y, out,
                     [top](double p, double q) { return q == 0 ? top : p / q; });
        return;
      }
      apply_binary(*x, *y, out, k);
    };
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [fill](Context &, Args a, const Value &out) {
      fill(a, *as_image(out));
    };
    op.body.calculate = [fill](Context &, Args a) -> Value {
      auto out = image_arg(a, 0)->create_like();
      fill(a, *out);
      return out;
    };
    register_op(ctx, std::move(op));
  }
}

void register_add_specializations(Context &ctx) {
  const auto P = ParamType::of;
  {
    OpCandidate op;
    op.id = "math.add.constant-to-planar";
    op.signature = sig("math.add", {byte_aligned_image(Backing::Planar), P(ST::Float64)},
                       ST::Image);
    op.kind = OpKind::HybridCFI;
    op.arity = 1;
    op.priority = 10;
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [](Context &, Args a, const Value &out) {
      add_variants::planar(*image_arg(a, 0), scalar_arg(a, 1), *as_image(out));
    };
    op.body.calculate = [](Context &, Args a) -> Value {
      auto in = image_arg(a, 0);
      auto out = in->create_like();
      add_variants::planar(*in, scalar_arg(a, 1), *out);
      return out;
    };
    op.body.mutate = [](Context &, Args a) {
      auto in = image_arg(a, 0);
      add_variants::planar(*in, scalar_arg(a, 1), *in);
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.add.constant-to-array-inplace";
    op.signature = sig("math.add", {byte_aligned_image(Backing::Array), P(ST::Float64)},
                       ST::Image);
    op.kind = OpKind::Inplace;
    op.arity = 1;
    op.priority = 20;
    op.body.mutate = [](Context &, Args a) {
      add_variants::array_inplace(*image_arg(a, 0), scalar_arg(a, 1));
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.add.constant-to-array-inplace-mt";
    op.signature = sig("math.add", {byte_aligned_image(Backing::Array), P(ST::Float64)},
                       ST::Image);
    op.kind = OpKind::Inplace;
    op.arity = 1;
    op.priority = 15;
    op.body.mutate = [](Context &, Args a) {
      add_variants::array_inplace_mt(*image_arg(a, 0), scalar_arg(a, 1),
                                     std::max(1u, std::thread::hardware_concurrency()));
    };
    register_op(ctx, std::move(op));
  }
}

void register_unary_math(Context &ctx) {
  const auto P = ParamType::of;
  {
    OpCandidate op;
    op.id = "math.sqrt.scalar";
    op.signature = sig("math.sqrt", {P(ST::Float64)}, ST::Float64);
    op.arity = 1;
    op.body.scalar_kernel = [](double x, double) { return std::sqrt(x); };
    op.body.calculate = [](Context &, Args a) -> Value { return std::sqrt(scalar_arg(a, 0)); };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.sqrt.image";
    op.signature = sig("math.sqrt", {ParamType::image()}, ST::Image);
    op.kind = OpKind::HybridCF;
    op.arity = 1;
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [](Context &, Args a, const Value &out) {
      apply_unary(*image_arg(a, 0), *as_image(out), [](double v) { return std::sqrt(v); });
    };
    op.body.calculate = [](Context &, Args a) -> Value {
      auto in = image_arg(a, 0);
      auto out = in->create_like();
      apply_unary(*in, *out, [](double v) { return std::sqrt(v); });
      return out;
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.negate.scalar";
    op.signature = sig("math.negate", {P(ST::Float64)}, ST::Float64);
    op.arity = 1;
    op.body.scalar_kernel = [](double x, double) { return -x; };
    op.body.calculate = [](Context &, Args a) -> Value { return -scalar_arg(a, 0); };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.negate.image";
    op.signature = sig("math.negate", {ParamType::image()}, ST::Image);
    op.kind = OpKind::HybridCI;
    op.arity = 1;
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [](Context &, Args a, const Value &out) {
      apply_unary(*image_arg(a, 0), *as_image(out), [](double v) { return -v; });
    };
    op.body.mutate = [](Context &, Args a) {
      auto img = image_arg(a, 0);
      apply_unary(*img, *img, [](double v) { return -v; });
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "math.pi";
    op.signature = sig("math.pi", {}, ST::Float64);
    op.arity = 0;
    op.body.calculate = [](Context &, Args) -> Value { return std::numbers::pi; };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "image.copy";
    op.signature = sig("image.copy", {ParamType::image()}, ST::Image);
    op.kind = OpKind::Computer;
    op.arity = 1;
    op.body.allocate = [](Context &, Args a) { return make_like(a); };
    op.body.compute = [](Context &, Args a, const Value &out) {
      apply_unary(*image_arg(a, 0), *as_image(out), [](double v) { return v; });
    };
    register_op(ctx, std::move(op));
  }
}

void register_filters(Context &ctx) {
  const auto P = ParamType::of;
  {
    OpCandidate op;
    op.id = "filter.gauss.isotropic";
    op.signature = sig("filter.gauss", {ParamType::image(), P(ST::Float64)}, ST::Image);
    op.arity = 1;
    op.body.calculate = [](Context &, Args a) -> Value {
      return gauss(*image_arg(a, 0), scalar_arg(a, 1));
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "filter.gauss.per-axis";
    op.signature = sig("filter.gauss", {ParamType::image(), P(ST::Float64List)}, ST::Image);
    op.arity = 1;
    op.body.calculate = [](Context &, Args a) -> Value {
      return gauss(*image_arg(a, 0), std::get<std::vector<double>>(a[1]));
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "filter.dog";
    op.signature = sig("filter.dog",
                       {ParamType::image(), P(ST::Float64), P(ST::Float64)}, ST::Image);
    op.arity = 1;
    op.body.calculate = [](Context &c, Args a) -> Value {
      auto img = image_arg(a, 0);
      auto unary = [&](double sigma) {
        OpRequest r{"filter.gauss", {img, sigma}, OpKind::Function, {}, false};
        return match(c, r);
      };
      const Match g1 = unary(scalar_arg(a, 1));
      const Match g2 = unary(scalar_arg(a, 2));
      Value b1 = execute(c, g1, OpKind::Function);
      Value b2 = execute(c, g2, OpKind::Function);
      OpRequest sr{"math.sub", {b1, b2}, OpKind::Function, {}, false};
      return execute(c, match(c, sr), OpKind::Function);
    };
    register_op(ctx, std::move(op));
  }
}

void register_stats(Context &ctx) {
  auto stat = [&ctx](std::string name, std::function<Value(Context &, Args)> fn) {
    OpCandidate op;
    op.id = name;
    op.signature = sig(name, {ParamType::image()}, ST::Float64);
    op.arity = 1;
    op.body.calculate = std::move(fn);
    register_op(ctx, std::move(op));
  };
  stat("stats.sum", [](Context &, Args a) -> Value { return sum(*image_arg(a, 0)); });
  stat("stats.size", [](Context &, Args a) -> Value { return size(*image_arg(a, 0)); });
  stat("stats.mean", [](Context &c, Args a) -> Value { return mean(c, image_arg(a, 0)); });
}

void register_map(Context &ctx) {
  const auto P = ParamType::of;
  {
    OpCandidate op;
    op.id = "ops.map.unary";
    op.signature = sig("ops.map", {ParamType::image(), P(ST::String)}, ST::Image);
    op.arity = 1;
    op.body.calculate = [](Context &c, Args a) -> Value {
      return map(c, image_arg(a, 0), std::get<std::string>(a[1]));
    };
    register_op(ctx, std::move(op));
  }
  {
    OpCandidate op;
    op.id = "ops.map.binary";
    op.signature =
        sig("ops.map", {ParamType::image(), P(ST::String), P(ST::Float64)}, ST::Image);
    op.arity = 1;
    op.body.calculate = [](Context &c, Args a) -> Value {
      return map(c, image_arg(a, 0), std::get<std::string>(a[1]), {a[2]});
    };
    register_op(ctx, std::move(op));
  }
}

} // namespace

void register_builtin_ops(Context &ctx) {
  register_arithmetic(ctx, "add", [](double a, double b) { return a + b; }, false);
  register_arithmetic(ctx, "sub", [](double a, double b) { return a - b; }, false);
  register_arithmetic(ctx, "mul", [](double a, double b) { return a * b; }, false);
  register_arithmetic(ctx, "div", [](double a, double b) { return a / b; }, true);
  register_add_specializations(ctx);
  register_unary_math(ctx);
  register_filters(ctx);
  register_stats(ctx);
  register_map(ctx);
}

} // namespace ndforge::ops
