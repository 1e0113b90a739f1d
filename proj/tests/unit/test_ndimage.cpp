#include "ndforge/error.hpp"
#include "ndforge/ndimage.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

using namespace ndforge;

namespace {

const PixelType kU8(PixelTypeCode::UInt8);
const PixelType kU12(PixelTypeCode::UInt12);
const PixelType kU16(PixelTypeCode::UInt16);

std::vector<PixelType> all_types() {
  using C = PixelTypeCode;
  return {C::Bool1, C::Bit,   C::UInt2, C::UInt4,  C::UInt8,   C::UInt12, C::UInt16,
          C::UInt32, C::UInt64, C::Int8, C::Int16, C::Int32, C::Float32, C::Float64};
}

CellParams small_cells(std::vector<std::int64_t> dims, std::uint64_t budget,
                       const std::filesystem::path &spill = {}) {
  CellParams p;
  p.cell_dims = std::move(dims);
  p.cache_budget_bytes = budget;
  p.spill_directory = spill;
  return p;
}

} // namespace

TEST(PixelType, RangesPerTable) {
  EXPECT_EQ(kU12.min_value(), 0);
  EXPECT_EQ(kU12.max_value(), 4095);
  EXPECT_EQ(kU8.max_value(), 255);
  EXPECT_EQ(PixelType(PixelTypeCode::Int16).min_value(), -32768);
  EXPECT_EQ(PixelType(PixelTypeCode::Int16).max_value(), 32767);
  EXPECT_EQ(PixelType(PixelTypeCode::UInt4).max_value(), 15);
  EXPECT_EQ(PixelType(PixelTypeCode::UInt2).max_value(), 3);
  EXPECT_EQ(PixelType(PixelTypeCode::Bit).max_value(), 1);
  EXPECT_EQ(PixelType(PixelTypeCode::Int8).min_value(), -128);
  EXPECT_EQ(PixelType(PixelTypeCode::UInt32).max_value(), 4294967295.0);
}

TEST(PixelType, PackedStorageBytes) {
  EXPECT_EQ(packed_storage_bytes(kU12, 1000000), 1500000u);
  EXPECT_EQ(packed_storage_bytes(kU16, 1000000), 2000000u);
  EXPECT_EQ(packed_storage_bytes(PixelType(PixelTypeCode::Bit), 9), 2u);
  EXPECT_EQ(packed_storage_bytes(kU8, 0), 0u);
}

TEST(PixelType, PackedStorageMatchesCeilingOracle) {
  std::mt19937_64 rng(1);
  for (const auto &t : all_types())
    for (int i = 0; i < 200; ++i) {
      const std::uint64_t n = rng() % 10000000;
      EXPECT_EQ(packed_storage_bytes(t, n), (n * t.bits() + 7) / 8) << t.name();
    }
}

TEST(PixelType, ClampAndRounding) {
  EXPECT_EQ(kU12.decode(kU12.encode(5000)), 4095);
  EXPECT_EQ(kU8.decode(kU8.encode(-1)), 0);
  const PixelType i16(PixelTypeCode::Int16);
  EXPECT_EQ(i16.decode(i16.encode(3.7)), 4);
  EXPECT_EQ(i16.decode(i16.encode(-2.5)), -3);
  EXPECT_EQ(i16.decode(i16.encode(2.5)), 3);
}

TEST(PixelType, NamesRoundTrip) {
  for (const auto &t : all_types()) {
    EXPECT_FALSE(t.name().empty());
  }
  EXPECT_EQ(kU12.name(), "uint12");
}

TEST(Packing, ExhaustiveRoundTripPerPackedTypeWithUndisturbedNeighbours) {
  using C = PixelTypeCode;
  std::mt19937_64 rng(2);
  for (auto code : {C::Bit, C::UInt2, C::UInt4, C::UInt12}) {
    const PixelType t(code);
    const std::uint64_t values = t.max_integer() + 1;
    const std::uint64_t n = 3 * values + 17;
    std::vector<std::byte> buf(packed_storage_bytes(t, n));
    std::vector<std::uint64_t> model(n, 0);
    for (std::uint64_t v = 0; v < values; ++v) {
      const std::uint64_t at = rng() % n;
      detail::store_packed(buf.data(), t.bits(), at, v);
      model[at] = v;
      const std::uint64_t probe = rng() % n;
      ASSERT_EQ(detail::load_packed(buf.data(), t.bits(), probe), model[probe]);
      ASSERT_EQ(detail::load_packed(buf.data(), t.bits(), at), v);
    }
    for (std::uint64_t i = 0; i < n; ++i)
      ASSERT_EQ(detail::load_packed(buf.data(), t.bits(), i), model[i]) << t.name();
  }
}

TEST(Image, ZeroInitialised) {
  auto img = NDImage::create(kU8, make_axes({4, 4}));
  EXPECT_EQ(img->size(), 16u);
  for (std::uint64_t i = 0; i < 16; ++i)
    EXPECT_EQ(img->get_at(i), 0);
}

TEST(Image, SetGetClampAndRound) {
  auto img = NDImage::create(kU12, make_axes({3, 3}));
  const std::vector<std::int64_t> p{1, 2};
  img->set(p, 4095);
  EXPECT_EQ(img->get(p), 4095);
  img->set(p, 5000);
  EXPECT_EQ(img->get(p), 4095);
  auto u8 = NDImage::create(kU8, make_axes({2}));
  u8->set(std::vector<std::int64_t>{0}, -1);
  EXPECT_EQ(u8->get(std::vector<std::int64_t>{0}), 0);
  auto i16 = NDImage::create(PixelType(PixelTypeCode::Int16), make_axes({2}));
  i16->set(std::vector<std::int64_t>{1}, 3.7);
  EXPECT_EQ(i16->get(std::vector<std::int64_t>{1}), 4);
}

TEST(Image, OutOfBoundsRejected) {
  auto img = NDImage::create(kU8, make_axes({4, 4}));
  EXPECT_THROW(img->get(std::vector<std::int64_t>{4, 0}), BoundsError);
  EXPECT_THROW(img->set(std::vector<std::int64_t>{0, -1}, 1), BoundsError);
  EXPECT_THROW(img->get(std::vector<std::int64_t>{0}), BoundsError);
}

TEST(Image, PlanarRejectsHugePlaneCellAccepts) {
  EXPECT_THROW(NDImage::create(kU16, make_axes({50000, 50000}), Backing::Planar), ImageError);
  auto cell = NDImage::create(kU16, make_axes({50000, 50000}), Backing::Cell,
                              small_cells({512, 512}, 64ull << 20));
  EXPECT_EQ(cell->cache_stats().resident_cells, 0u);
  EXPECT_EQ(cell->size(), 2500000000u);
}

TEST(Image, ArrayRejectsHugeTotal) {
  EXPECT_THROW(NDImage::create(kU8, make_axes({1ll << 20, 1ll << 20})), ImageError);
}

TEST(Image, DuplicateAxisLabelsRejectedInDataset) {
  auto axes = make_axes({2, 2});
  axes[1].label = axes[0].label;
  auto img = NDImage::create(kU8, axes);
  EXPECT_THROW(Dataset("d", img), ImageError);
}

TEST(Image, ClampIdempotence) {
  for (const auto &t : all_types()) {
    auto img = test::random_image(t, {9, 5}, 4);
    for (std::uint64_t i = 0; i < img->size(); ++i) {
      const auto before = img->get_raw_at(i);
      img->set_at(i, img->get_at(i));
      ASSERT_EQ(img->get_raw_at(i), before) << t.name();
    }
  }
}

TEST(Cursor, RowMajorFirstAxisFastest) {
  auto img = NDImage::create(kU8, make_axes({2, 2}));
  Cursor c(*img);
  std::vector<std::vector<std::int64_t>> seen;
  while (c.next())
    seen.emplace_back(c.position().begin(), c.position().end());
  EXPECT_EQ(seen, (std::vector<std::vector<std::int64_t>>{{0, 0}, {1, 0}, {0, 1}, {1, 1}}));
}

TEST(Cursor, RegionVolume) {
  auto img = NDImage::create(kU8, make_axes({4, 4}));
  Cursor c(*img, Region::box({1, 1}, {2, 2}));
  int n = 0;
  while (c.next())
    ++n;
  EXPECT_EQ(n, 4);
}

TEST(Cursor, MaskedCountMatchesBruteForceAndIsBijective) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto img = NDImage::create(kU8, make_axes({11, 7, 3}));
    std::vector<char> keep(img->size());
    std::uint64_t k = 0;
    for (auto &b : keep)
      k += (b = static_cast<char>(rng() % 2));
    Region r = Region::box({0, 0, 0}, {10, 6, 2});
    auto image = img;
    r.mask = [&keep, image](std::span<const std::int64_t> p) {
      return keep[image->linear_index(p)] != 0;
    };
    Cursor c(*img, r);
    std::set<std::uint64_t> visited;
    std::uint64_t last = 0;
    bool first = true;
    while (c.next()) {
      ASSERT_TRUE(keep[c.linear()]);
      ASSERT_TRUE(visited.insert(c.linear()).second);
      if (!first)
        ASSERT_GT(c.linear(), last);
      last = c.linear();
      first = false;
    }
    EXPECT_EQ(visited.size(), k);
  }
}

TEST(Backings, ObservationallyEquivalentUnderRandomWrites) {
  std::mt19937_64 rng(21);
  test::TempDir spill;
  for (const auto &t : {kU8, kU12, PixelType(PixelTypeCode::Float32),
                        PixelType(PixelTypeCode::Int16), PixelType(PixelTypeCode::Bit)}) {
    const std::vector<std::int64_t> dims{17, 13, 5};
    auto array = NDImage::create(t, make_axes(dims));
    auto planar = NDImage::create(t, make_axes(dims), Backing::Planar);
    auto cell = NDImage::create(t, make_axes(dims), Backing::Cell,
                                small_cells({4, 4, 2}, 64, spill.path()));
    for (int i = 0; i < 3000; ++i) {
      const std::uint64_t at = rng() % array->size();
      const double v = static_cast<double>(static_cast<std::int64_t>(rng() % 20000) - 10000) / 3;
      array->set_at(at, v);
      planar->set_at(at, v);
      cell->set_at(at, v);
    }
    for (std::uint64_t i = 0; i < array->size(); ++i) {
      ASSERT_EQ(planar->get_at(i), array->get_at(i));
      ASSERT_EQ(cell->get_at(i), array->get_at(i));
    }
    Cursor a(*array), c(*cell);
    while (a.next()) {
      ASSERT_TRUE(c.next());
      ASSERT_EQ(a.get(), c.get());
    }
  }
}

TEST(Cells, FreshStatsAreZeroAndFirstTouchMisses) {
  auto img = NDImage::create(kU8, make_axes({128, 128}), Backing::Cell,
                             small_cells({32, 32}, 1 << 20));
  const auto fresh = img->cache_stats();
  EXPECT_EQ(fresh.resident_cells, 0u);
  EXPECT_EQ(fresh.evictions + fresh.hits + fresh.misses + fresh.dirty_writebacks, 0u);
  img->get(std::vector<std::int64_t>{5, 5});
  const auto s = img->cache_stats();
  EXPECT_EQ(s.resident_cells, 1u);
  EXPECT_EQ(s.misses, 1u);
}

TEST(Cells, StatsOnNonCellImageRejected) {
  auto img = NDImage::create(kU8, make_axes({4, 4}));
  EXPECT_THROW(img->cache_stats(), ImageError);
}

TEST(Cells, ScanLargerThanBudgetEvicts) {
  // 256x256 uint8 in 32x32 cells (1 KiB each), budget of 16 cells: 4x smaller
  // than the 64-cell image.
  auto img = NDImage::create(kU8, make_axes({256, 256}), Backing::Cell,
                             small_cells({32, 32}, 16 * 1024));
  for (std::uint64_t c = 0; c < img->cell_count(); ++c) {
    const Box b = img->cell_box(c);
    std::vector<double> block(b.volume(), 1.0);
    img->write_block(b, block);
  }
  const auto s = img->cache_stats();
  EXPECT_GT(s.evictions, 0u);
  EXPECT_EQ(s.hits + s.misses, img->cell_count());
  EXPECT_LE(s.peak_resident_bytes, 16u * 1024u);
}

TEST(Cells, WriteEvictReadPersists) {
  test::TempDir spill;
  auto img = NDImage::create(kU16, make_axes({64, 64}), Backing::Cell,
                             small_cells({16, 16}, 512, spill.path()));
  img->set(std::vector<std::int64_t>{3, 3}, 1234);
  for (std::int64_t y = 0; y < 64; y += 16)
    for (std::int64_t x = 0; x < 64; x += 16)
      img->get(std::vector<std::int64_t>{x, y});
  EXPECT_GT(img->cache_stats().dirty_writebacks, 0u);
  EXPECT_TRUE(std::filesystem::exists(spill.path() / "cell_0.bin"));
  EXPECT_EQ(img->get(std::vector<std::int64_t>{3, 3}), 1234);
}

TEST(Cells, SpillFilesRemovedWithImage) {
  test::TempDir spill;
  {
    auto img = NDImage::create(kU8, make_axes({64, 64}), Backing::Cell,
                               small_cells({8, 8}, 64, spill.path()));
    for (std::uint64_t i = 0; i < img->size(); i += 7)
      img->set_at(i, 9);
    EXPECT_FALSE(std::filesystem::is_empty(spill.path()));
  }
  EXPECT_TRUE(std::filesystem::is_empty(spill.path()));
}

TEST(Cells, PersistenceFuzzAgainstArrayOracle) {
  std::mt19937_64 rng(77);
  const std::vector<std::int64_t> dims{40, 30};
  auto oracle = NDImage::create(kU12, make_axes(dims));
  test::TempDir spill;
  // 8x8 uint12 cells are 96 bytes; the budget holds 4 of them.
  auto cell = NDImage::create(kU12, make_axes(dims), Backing::Cell,
                              small_cells({8, 8}, 4 * 96, spill.path()));
  for (int op = 0; op < 10000; ++op) {
    const std::uint64_t at = rng() % oracle->size();
    switch (rng() % 3) {
    case 0: {
      const double v = static_cast<double>(rng() % 5000);
      oracle->set_at(at, v);
      cell->set_at(at, v);
      break;
    }
    case 1:
      ASSERT_EQ(cell->get_at(at), oracle->get_at(at)) << "op " << op;
      break;
    default:
      if (rng() % 50 == 0)
        cell->flush_cells();
      break;
    }
  }
  for (std::uint64_t i = 0; i < oracle->size(); ++i)
    ASSERT_EQ(cell->get_at(i), oracle->get_at(i));
  EXPECT_LE(cell->cache_stats().resident_bytes, 4u * 96);
  EXPECT_LE(cell->cache_stats().peak_resident_bytes, 4u * 96);
}

TEST(Blocks, ReadWriteBlockMatchesPerSample) {
  for (auto backing : {Backing::Array, Backing::Planar, Backing::Cell}) {
    auto img = test::random_image(kU8, {10, 9, 4}, 5, backing,
                                  small_cells({3, 4, 2}, 1 << 20));
    Box b{{2, 1, 1}, {7, 6, 2}};
    std::vector<double> block(b.volume());
    img->read_block(b, block);
    std::size_t k = 0;
    for (std::int64_t z = 1; z <= 2; ++z)
      for (std::int64_t y = 1; y <= 6; ++y)
        for (std::int64_t x = 2; x <= 7; ++x)
          ASSERT_EQ(block[k++], img->get(std::vector<std::int64_t>{x, y, z}));
    for (auto &v : block)
      v = 200;
    img->write_block(b, block);
    EXPECT_EQ(img->get(std::vector<std::int64_t>{7, 6, 2}), 200);
  }
}

TEST(Axes, LabelsAndParsing) {
  const auto axes = make_axes({4, 3, 2, 5, 3});
  EXPECT_EQ(axes[0].label.name(), "X");
  EXPECT_EQ(axes[2].label.name(), "Z");
  EXPECT_EQ(AxisLabel::parse("TIME").kind, AxisKind::Time);
  EXPECT_EQ(AxisLabel::parse("wavelength").name(), "wavelength");
  EXPECT_EQ(AxisLabel::parse("wavelength").kind, AxisKind::Custom);
}
