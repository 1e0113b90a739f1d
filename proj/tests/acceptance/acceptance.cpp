// Acceptance harness: one PASS/FAIL line per primary criterion.

#include "ndforge/cli.hpp"
#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/io.hpp"
#include "ndforge/modules.hpp"
#include "ndforge/ops.hpp"
#include "ndforge/updater.hpp"

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace ndforge;
namespace fs = std::filesystem;

namespace {

// Pinned limits.
constexpr double kMatchingMaxSeconds = 1.0;
constexpr int kMatchingRepeats = 1000;
constexpr double kDogMaxSeconds = 5.0;
constexpr double kDogConstantTolerance = 0.0; // bit-identical
constexpr int kMeanImages = 100;
constexpr int kPackingFuzz = 10000;
constexpr double kPackingRatio = 0.75;
constexpr std::int64_t kScaleEdge = 50000;
constexpr std::int64_t kScaleCell = 512;
constexpr std::uint64_t kScaleBudget = 64ull << 20;
constexpr double kScalePeakFactor = 2.0;
constexpr int kScaleSamples = 10000;
constexpr int kScaleTiles = 40;
constexpr double kScaleMaxSeconds = 600.0;
constexpr int kPersistenceOps = 10000;
constexpr double kBenchMinFold = 3.0;
constexpr unsigned kBenchMtMinThreads = 4;
constexpr double kBenchMaxSeconds = 120.0;
constexpr int kRoundTripImages = 50;
constexpr int kIsolationSteps = 10000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string &name, bool pass, const std::string &detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass)
    ++failures;
}

/// Runs `body`, turning an escaped exception into a failure line.
void criterion(const std::string &name, const std::function<std::pair<bool, std::string>()> &body) {
  try {
    const auto [pass, detail] = body();
    report(name, pass, detail);
  } catch (const std::exception &e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::unique_ptr<Context> ops_context() {
  auto ctx = std::make_unique<Context>();
  register_builtin_converters(*ctx);
  ops::register_builtin_ops(*ctx);
  return ctx;
}

// ---- 1 ---------------------------------------------------------------------

std::pair<bool, std::string> op_matching() {
  auto ctx = ops_context();
  const PixelType u8(PixelTypeCode::UInt8);
  auto planar = NDImage::create(u8, make_axes({64, 64}), Backing::Planar);
  auto a = NDImage::create(u8, make_axes({64, 64}));
  auto b = NDImage::create(u8, make_axes({64, 64}));
  const auto t0 = Clock::now();
  bool ok = true;
  std::string first_planar, first_image;
  for (int i = 0; i < kMatchingRepeats; ++i) {
    ops::OpRequest r1{"math.add", {planar, 5.0}, std::nullopt, std::nullopt, false};
    ops::OpRequest r2{"math.add", {a, b}, std::nullopt, std::nullopt, false};
    const auto p = ops::match(*ctx, r1).op->id;
    const auto q = ops::match(*ctx, r2).op->id;
    if (i == 0) {
      first_planar = p;
      first_image = q;
    }
    ok = ok && p == "math.add.constant-to-planar" && q == "math.add.image-image";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kMatchingMaxSeconds;
  return {ok, "planar+float64 -> " + first_planar + ", image+image -> " + first_image + ", " +
                  std::to_string(kMatchingRepeats) + " repeats in " + fmt(secs) + " s"};
}

// ---- 2 ---------------------------------------------------------------------

std::pair<bool, std::string> dog_identity() {
  auto ctx = ops_context();
  const auto t0 = Clock::now();
  auto img = test::random_image(PixelType(PixelTypeCode::Float64), {256, 256}, 2024);
  const auto as_img = [](const Value &v) { return as_image(v); };
  auto dog = as_img(ops::run(*ctx, "filter.dog", {img, 2.0, 1.0}));
  auto g1 = as_img(ops::run(*ctx, "filter.gauss", {img, 2.0}));
  auto g2 = as_img(ops::run(*ctx, "filter.gauss", {img, 1.0}));
  ops::OpRequest sub{"math.sub", {g1, g2}, ops::OpKind::Function, std::nullopt, false};
  auto ref = as_img(ops::run(*ctx, sub));
  std::uint64_t mismatched = 0;
  for (std::uint64_t i = 0; i < img->size(); ++i)
    mismatched += dog->get_at(i) != ref->get_at(i);
  auto same = as_img(ops::run(*ctx, "filter.dog", {img, 1.5, 1.5}));
  double worst_zero = 0;
  for (std::uint64_t i = 0; i < same->size(); ++i)
    worst_zero = std::max(worst_zero, std::abs(same->get_at(i)));
  const double secs = seconds_since(t0);
  const bool ok = mismatched == 0 && worst_zero <= kDogConstantTolerance && secs < kDogMaxSeconds;
  return {ok, std::to_string(mismatched) + " mismatched samples vs sub(gauss,gauss), max |dog(s,s)| = " +
                  fmt(worst_zero, 1) + ", " + fmt(secs) + " s"};
}

// ---- 3 ---------------------------------------------------------------------

std::pair<bool, std::string> mean_identity() {
  auto ctx = ops_context();
  std::mt19937 rng(3);
  int exact = 0;
  const std::vector<PixelTypeCode> codes{PixelTypeCode::UInt8, PixelTypeCode::Int16,
                                         PixelTypeCode::Float32, PixelTypeCode::Float64};
  for (int i = 0; i < kMeanImages; ++i) {
    auto img = test::random_image(PixelType(codes[i % codes.size()]),
                                  {1 + static_cast<std::int64_t>(rng() % 90),
                                   1 + static_cast<std::int64_t>(rng() % 90)},
                                  1000 + i);
    const Value s = ops::run(*ctx, "stats.sum", {img});
    const Value n = ops::run(*ctx, "stats.size", {img});
    ops::OpRequest div{"math.div", {s, n}, std::nullopt, std::nullopt, false};
    const double expected = std::get<double>(ops::run(*ctx, div));
    exact += std::get<double>(ops::run(*ctx, "stats.mean", {img})) == expected;
  }
  return {exact == kMeanImages,
          std::to_string(exact) + "/" + std::to_string(kMeanImages) + " images bit-exact"};
}

// ---- 4 ---------------------------------------------------------------------

std::pair<bool, std::string> uint12_packing() {
  const PixelType u12(PixelTypeCode::UInt12), u16(PixelTypeCode::UInt16);
  std::mt19937_64 rng(4);
  int size_errors = 0;
  for (int i = 0; i < kPackingFuzz; ++i) {
    const std::uint64_t n = rng() % (1ull << 40);
    if (packed_storage_bytes(u12, n) != (12 * n + 7) / 8)
      ++size_errors;
  }
  const std::uint64_t big = 1ull << 30;
  const double ratio = static_cast<double>(packed_storage_bytes(u12, big)) /
                       static_cast<double>(packed_storage_bytes(u16, big));

  // Every value at a random slot in a packed buffer, neighbours intact.
  const std::uint64_t slots = 10007;
  std::vector<std::byte> buf(packed_storage_bytes(u12, slots));
  std::vector<std::uint64_t> model(slots);
  for (std::uint64_t i = 0; i < slots; ++i) {
    model[i] = rng() & 0xfff;
    ndforge::detail::store_packed(buf.data(), 12, i, model[i]);
  }
  int value_errors = 0;
  for (std::uint64_t v = 0; v < 4096; ++v) {
    const std::uint64_t at = rng() % slots;
    ndforge::detail::store_packed(buf.data(), 12, at, v);
    model[at] = v;
    if (ndforge::detail::load_packed(buf.data(), 12, at) != v)
      ++value_errors;
  }
  for (std::uint64_t i = 0; i < slots; ++i)
    value_errors += ndforge::detail::load_packed(buf.data(), 12, i) != model[i];

  // The same through an image.
  auto img = NDImage::create(u12, make_axes({97, 89}));
  std::vector<double> img_model(img->size(), 0.0);
  for (std::uint64_t v = 0; v < 4096; ++v) {
    const std::uint64_t at = rng() % img->size();
    img->set_at(at, static_cast<double>(v));
    img_model[at] = static_cast<double>(v);
  }
  for (std::uint64_t i = 0; i < img->size(); ++i)
    value_errors += img->get_at(i) != img_model[i];

  const bool ok = size_errors == 0 && ratio == kPackingRatio && value_errors == 0;
  return {ok, std::to_string(size_errors) + " size errors over " + std::to_string(kPackingFuzz) +
                  " n, uint12/uint16 = " + fmt(ratio, 4) + ", " + std::to_string(value_errors) +
                  " round-trip errors over 4096 values"};
}

// ---- 5 ---------------------------------------------------------------------

std::uint8_t scale_sample(std::int64_t x, std::int64_t y) {
  std::uint64_t z = static_cast<std::uint64_t>(y) * 0x9E3779B97F4A7C15ull +
                    static_cast<std::uint64_t>(x) + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return static_cast<std::uint8_t>((z ^ (z >> 31)) & 0xff);
}

std::uint64_t peak_rss_kib() {
  std::ifstream in("/proc/self/status");
  for (std::string line; std::getline(in, line);)
    if (line.rfind("VmHWM:", 0) == 0)
      return std::stoull(line.substr(6));
  return 0;
}

std::pair<bool, std::string> scalability() {
  auto ctx = ops_context();
  const PixelType u8(PixelTypeCode::UInt8);
  const std::vector<std::int64_t> dims{kScaleEdge, kScaleEdge};
  const std::vector<std::int64_t> cell_dims{kScaleCell, kScaleCell};

  bool planar_rejected = false;
  try {
    NDImage::create(u8, make_axes(dims), Backing::Planar);
  } catch (const ImageError &) {
    planar_rejected = true;
  }

  test::TempDir spill_in, spill_out;
  CellParams params;
  params.cell_dims = cell_dims;
  params.cache_budget_bytes = kScaleBudget;
  params.spill_directory = spill_in.path();
  auto src = NDImage::create(u8, make_axes(dims), Backing::Cell, params);
  src->set_cell_source([&](std::uint64_t idx, std::span<std::byte> out) {
    const Box box = io::grid_cell_box(dims, cell_dims, idx);
    std::size_t k = 0;
    for (std::int64_t y = box.min[1]; y <= box.max[1]; ++y)
      for (std::int64_t x = box.min[0]; x <= box.max[0]; ++x)
        out[k++] = std::byte{scale_sample(x, y)};
  });

  const auto rss_before = peak_rss_kib();
  const auto t0 = Clock::now();
  ops::MapOptions mo;
  mo.threads = std::max(1u, std::thread::hardware_concurrency());
  auto dst = ops::map(*ctx, src, "math.sqrt", {}, mo);
  const double map_secs = seconds_since(t0);
  const bool dst_is_cell = dst->backing() == Backing::Cell;

  // Oracle: rebuild a few 512x512 tiles as ARRAY images and map them.
  std::mt19937_64 rng(5);
  const std::int64_t tiles_per_axis = (kScaleEdge + kScaleCell - 1) / kScaleCell;
  int mismatches = 0, checked = 0;
  for (int t = 0; t < kScaleTiles; ++t) {
    const std::int64_t tx = static_cast<std::int64_t>(rng() % tiles_per_axis);
    const std::int64_t ty = static_cast<std::int64_t>(rng() % tiles_per_axis);
    const std::int64_t x0 = tx * kScaleCell, y0 = ty * kScaleCell;
    const std::int64_t w = std::min(kScaleCell, kScaleEdge - x0);
    const std::int64_t h = std::min(kScaleCell, kScaleEdge - y0);
    auto tile = NDImage::create(u8, make_axes({w, h}));
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        tile->set(std::vector<std::int64_t>{x, y}, scale_sample(x0 + x, y0 + y));
    auto oracle = ops::map(*ctx, tile, "math.sqrt");
    for (int s = 0; s < kScaleSamples / kScaleTiles; ++s) {
      const std::int64_t x = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(w));
      const std::int64_t y = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(h));
      const double got = dst->get(std::vector<std::int64_t>{x0 + x, y0 + y});
      const double want = oracle->get(std::vector<std::int64_t>{x, y});
      mismatches += got != want;
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  const auto in_peak = src->cache_stats().peak_resident_bytes;
  const auto out_peak = dst->cache_stats().peak_resident_bytes;
  const double limit = kScalePeakFactor * static_cast<double>(kScaleBudget);
  const bool peak_ok = static_cast<double>(in_peak) <= limit &&
                       static_cast<double>(out_peak) <= limit;
  const auto rss_after = peak_rss_kib();

  const bool ok = planar_rejected && dst_is_cell && mismatches == 0 &&
                  checked == kScaleSamples && peak_ok && secs < kScaleMaxSeconds;
  return {ok, std::string("PLANAR ") + (planar_rejected ? "rejected" : "accepted") + ", " +
                  std::to_string(mismatches) + "/" + std::to_string(checked) +
                  " samples differ from ARRAY tiles, peak cache in/out " +
                  fmt(static_cast<double>(in_peak) / (1 << 20), 1) + "/" +
                  fmt(static_cast<double>(out_peak) / (1 << 20), 1) + " MiB (budget " +
                  std::to_string(kScaleBudget >> 20) + " MiB), map " + fmt(map_secs, 1) +
                  " s, total " + fmt(secs, 1) + " s, process peak RSS " +
                  std::to_string(rss_before / 1024) + " -> " + std::to_string(rss_after / 1024) +
                  " MiB"};
}

// ---- 6 ---------------------------------------------------------------------

std::pair<bool, std::string> cell_persistence() {
  const PixelType u12(PixelTypeCode::UInt12);
  const std::vector<std::int64_t> dims{64, 48};
  auto oracle = NDImage::create(u12, make_axes(dims));
  test::TempDir spill;
  CellParams p;
  p.cell_dims = {8, 8};
  p.cache_budget_bytes = 4 * packed_storage_bytes(u12, 64);
  p.spill_directory = spill.path();
  auto cell = NDImage::create(u12, make_axes(dims), Backing::Cell, p);
  std::mt19937_64 rng(6);
  int mismatches = 0;
  for (int op = 0; op < kPersistenceOps; ++op) {
    const std::uint64_t at = rng() % oracle->size();
    switch (rng() % 4) {
    case 0:
    case 1: {
      const double v = static_cast<double>(rng() % 4096);
      oracle->set_at(at, v);
      cell->set_at(at, v);
      break;
    }
    case 2:
      mismatches += cell->get_at(at) != oracle->get_at(at);
      break;
    default:
      if (rng() % 20 == 0)
        cell->flush_cells();
      break;
    }
  }
  for (std::uint64_t i = 0; i < oracle->size(); ++i)
    mismatches += cell->get_at(i) != oracle->get_at(i);
  const auto stats = cell->cache_stats();
  const bool ok = mismatches == 0 && stats.evictions > 0 &&
                  stats.peak_resident_bytes <= p.cache_budget_bytes;
  return {ok, std::to_string(mismatches) + " mismatches vs ARRAY oracle, " +
                  std::to_string(stats.evictions) + " evictions, " +
                  std::to_string(stats.dirty_writebacks) + " write-backs"};
}

// ---- 7 ---------------------------------------------------------------------

std::pair<bool, std::string> bench_property() {
  const auto t0 = Clock::now();
  cli::BenchOptions o; // 4096x4096, 20 rounds
  const auto r = cli::run_bench(o);
  const double secs = seconds_since(t0);
  const double fold = r.fold_vs_generic(r.index("array-inplace"));
  const double st = r.median(r.index("array-inplace"));
  const double mt = r.median(r.index("array-mt"));
  const unsigned hw = std::thread::hardware_concurrency();
  const bool mt_applies = hw >= kBenchMtMinThreads;
  const bool mt_ok = !mt_applies || mt <= st;
  const bool ok = r.outputs_identical && fold >= kBenchMinFold && mt_ok && secs < kBenchMaxSeconds;
  return {ok, "array-inplace " + fmt(fold, 2) + "x generic (median " + fmt(st) + " ms vs " +
                  fmt(r.median(r.index("generic"))) + " ms), mt median " + fmt(mt) + " ms" +
                  (mt_applies ? "" : " (mt clause not applicable: " + std::to_string(hw) +
                                         " hardware threads)") +
                  ", outputs " + (r.outputs_identical ? "identical" : "DIFFER") + ", " +
                  fmt(secs, 1) + " s"};
}

// ---- 8 ---------------------------------------------------------------------

std::pair<bool, std::string> updater_states() {
  using namespace updater;
  test::TempDir local, site;
  fs::copy(test::fixture("updater/local"), local.path(), fs::copy_options::recursive);
  fs::copy(test::fixture("updater/site"), site.path(), fs::copy_options::recursive);
  const auto manifest = load_manifest_file(site / std::string(kManifestName));
  std::map<std::string, std::string> got;
  for (const auto &s : classify(local.path(), {manifest}))
    got[s.path] = std::string(to_string(s.state));
  const std::map<std::string, std::string> expected{{"a.txt", "UP_TO_DATE"},
                                                    {"b.txt", "OLD_VERSION"},
                                                    {"c.txt", "LOCALLY_MODIFIED"},
                                                    {"d.txt", "UNTRACKED"}};
  const bool states_ok = got == expected;

  const auto cli = test::run_binary({"update", "--root", local.path().string(), "--site",
                                     site.path().string(), "--apply"},
                                    local / ".prefs");
  fs::remove(local / ".prefs");
  auto after = classify(local.path(), {manifest});
  LocalDirectoryTransport transport({{manifest.site_name, site.path()}});
  apply(plan(after, {manifest}), transport, local.path());
  auto again = classify(local.path(), {manifest});
  bool fixed = after.size() == again.size();
  for (std::size_t i = 0; fixed && i < after.size(); ++i)
    fixed = after[i].path == again[i].path && after[i].state == again[i].state;
  bool settled = true;
  for (const auto &s : after)
    settled = settled && s.state != FileState::OldVersion && s.state != FileState::Missing;

  const auto first = write_manifest(manifest);
  const auto second = write_manifest(load_manifest(first));
  const bool golden = manifest_xml(manifest) == test::read_text(test::fixture("updater/golden.xml")) &&
                      first == second;

  const bool ok = states_ok && cli.code == 3 && fixed && settled && golden;
  std::string states;
  for (const auto &[p, s] : got)
    states += (states.empty() ? "" : " ") + p + "=" + s;
  return {ok, states + "; update --apply exit " + std::to_string(cli.code) + ", re-classify " +
                  (fixed && settled ? "fixed point" : "NOT fixed") + ", manifest bytes " +
                  (golden ? "stable and golden" : "UNSTABLE")};
}

// ---- 9 ---------------------------------------------------------------------

std::pair<bool, std::string> headless_run() {
  test::TempDir d;
  const auto r = test::run_binary(
      {"run", test::fixture("greet.sjm").string(), "name=World", "age=7"}, d / "prefs");
  const std::string want = "greeting = Hello, World. You are 7 years old.\n";
  const bool ok = r.code == 0 && r.out == want;
  std::string shown = r.out;
  if (!shown.empty() && shown.back() == '\n')
    shown.pop_back();
  return {ok, "exit " + std::to_string(r.code) + ", stdout \"" + shown + "\""};
}

// ---- 10 --------------------------------------------------------------------

std::pair<bool, std::string> format_round_trips() {
  Context ctx;
  io::register_builtin_io(ctx);
  test::TempDir dir;
  std::mt19937 rng(10);
  int p2 = 0, p5 = 0, nchk = 0;
  for (int i = 0; i < kRoundTripImages; ++i) {
    const PixelType type(i % 2 ? PixelTypeCode::UInt16 : PixelTypeCode::UInt8);
    auto img = test::random_image(type, {1 + static_cast<std::int64_t>(rng() % 64),
                                         1 + static_cast<std::int64_t>(rng() % 64)},
                                  500 + i);
    for (bool ascii : {true, false}) {
      io::SaveOptions o;
      o.ascii = ascii;
      const auto path = dir / ("p" + std::to_string(i) + (ascii ? "a" : "b") + ".pgm");
      io::save(ctx, Dataset("x", img), Location::file(path), "pgm", o);
      auto back = io::read(ctx, Location::file(path))->image();
      (ascii ? p2 : p5) += back->dims() == img->dims() && same_samples(*back, *img);
    }
  }
  const std::vector<PixelTypeCode> codes{PixelTypeCode::Bit,    PixelTypeCode::UInt12,
                                         PixelTypeCode::UInt8,  PixelTypeCode::Int32,
                                         PixelTypeCode::Float32, PixelTypeCode::Float64};
  for (int i = 0; i < kRoundTripImages; ++i) {
    const PixelType type(codes[i % codes.size()]);
    std::vector<std::int64_t> dims{1 + static_cast<std::int64_t>(rng() % 48),
                                   1 + static_cast<std::int64_t>(rng() % 48)};
    if (i % 4 == 0)
      dims.push_back(1 + static_cast<std::int64_t>(rng() % 5));
    auto img = test::random_image(type, dims, 900 + i);
    io::SaveOptions o;
    for (auto d : dims)
      o.cell_dims.push_back(1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(d)));
    const auto path = dir / ("n" + std::to_string(i) + ".nchk");
    io::save(ctx, Dataset("x", img), Location::file(path), "nchk", o);
    auto back = io::read(ctx, Location::file(path))->image();
    nchk += back->dims() == img->dims() && back->pixel_type() == type && same_samples(*back, *img);
  }

  auto tiny = NDImage::create(PixelType(PixelTypeCode::UInt8), make_axes({2, 2}));
  const std::vector<int> samples{0, 127, 128, 255};
  for (std::uint64_t i = 0; i < 4; ++i)
    tiny->set_at(i, samples[i]);
  io::save(ctx, Dataset("g", tiny), Location::file(dir / "g.pgm"), "pgm");
  std::string golden = "P5\n2 2\n255\n";
  for (int s : samples)
    golden += static_cast<char>(s);
  const bool golden_ok = test::read_text(dir / "g.pgm") == golden;

  const bool ok = p2 == kRoundTripImages && p5 == kRoundTripImages && nchk == kRoundTripImages &&
                  golden_ok;
  const auto n = std::to_string(kRoundTripImages);
  return {ok, "P2 " + std::to_string(p2) + "/" + n + ", P5 " + std::to_string(p5) + "/" + n +
                  ", NCHK " + std::to_string(nchk) + "/" + n + " sample-exact, 2x2 golden " +
                  (golden_ok ? "match" : "MISMATCH")};
}

// ---- 11 --------------------------------------------------------------------

std::pair<bool, std::string> auto_conversion() {
  auto ctx = create_default_context();
  modules::ModuleSpec spec;
  spec.name = "halve";
  spec.params = {
      modules::ParamSpec{"x", modules::Direction::Input, SemanticType::Float64, true, std::nullopt},
      modules::ParamSpec{"y", modules::Direction::Output, SemanticType::Float64, true, std::nullopt}};
  spec.body = [](Context &, const ValueMap &in) {
    return ValueMap{{"y", std::get<double>(in.at("x")) / 2}};
  };
  ctx->set_output_sink([](std::string_view) {});
  const std::vector<std::string> good{"x=2.5"};
  const auto out = modules::run_module(*ctx, spec, modules::harvest_from_pairs(*ctx, spec, good));
  const double y = std::get<double>(out.at("y"));

  std::string error;
  std::string param;
  try {
    const std::vector<std::string> bad{"x=two"};
    modules::harvest_from_pairs(*ctx, spec, bad);
  } catch (const HarvestError &e) {
    error = e.what();
    param = e.param();
  }
  const bool ok = y == 1.25 && param == "x" && error.find("'x'") != std::string::npos;
  return {ok, "x=\"2.5\" -> y = " + format_double(y) + "; x=\"two\" -> " +
                  (error.empty() ? "no error" : "\"" + error + "\"")};
}

// ---- 12 --------------------------------------------------------------------

std::pair<bool, std::string> context_isolation() {
  std::mt19937 rng(12);
  Context ctx[2];
  std::vector<std::pair<std::int32_t, std::string>> model[2][3];
  const PluginKind kinds[3] = {PluginKind::Op, PluginKind::Format, PluginKind::Service};
  int violations = 0, registrations = 0, resolves = 0;
  for (int step = 0; step < kIsolationSteps; ++step) {
    const int c = static_cast<int>(rng() % 2);
    const int k = static_cast<int>(rng() % 3);
    if (rng() % 2) {
      PluginMetadata m;
      m.id = "ctx" + std::to_string(c) + ".p" + std::to_string(step);
      m.kind = kinds[k];
      m.name = m.id;
      m.priority = static_cast<std::int32_t>(rng() % 7) - 3;
      ctx[c].register_plugin(m);
      model[c][k].emplace_back(m.priority, m.id);
      ++registrations;
    } else {
      auto expect = model[c][k];
      std::stable_sort(expect.begin(), expect.end(),
                       [](const auto &a, const auto &b) { return a.first > b.first; });
      const auto got = ctx[c].resolve_plugins(kinds[k]);
      ++resolves;
      if (got.size() != expect.size()) {
        ++violations;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].id != expect[i].second ||
            got[i].id.rfind("ctx" + std::to_string(c) + ".", 0) != 0) {
          ++violations;
          break;
        }
      }
    }
  }
  std::size_t expect_total[2] = {0, 0};
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 3; ++k)
      expect_total[c] += model[c][k].size();
  violations += ctx[0].plugin_count() != expect_total[0];
  violations += ctx[1].plugin_count() != expect_total[1];
  return {violations == 0, std::to_string(kIsolationSteps) + " steps (" +
                               std::to_string(registrations) + " registrations, " +
                               std::to_string(resolves) + " resolves), " +
                               std::to_string(violations) + " cross-context violations"};
}

} // namespace

int main() {
  criterion("op-matching-anchors", op_matching);
  criterion("dog-compositional-identity", dog_identity);
  criterion("mean-equals-sum-over-size", mean_identity);
  criterion("uint12-packing", uint12_packing);
  criterion("scalability-50000x50000-cell", scalability);
  criterion("cell-persistence-fuzz", cell_persistence);
  criterion("benchmark-specialization-fold", bench_property);
  criterion("updater-states-and-fixed-point", updater_states);
  criterion("headless-module-run", headless_run);
  criterion("format-round-trips", format_round_trips);
  criterion("converter-auto-conversion", auto_conversion);
  criterion("context-isolation", context_isolation);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
