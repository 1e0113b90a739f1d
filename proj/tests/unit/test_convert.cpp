#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/ndimage.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace ndforge;

namespace {

struct ConvertTest : ::testing::Test {
  ConvertTest() { register_builtin_converters(ctx); }
  Context ctx;
};

} // namespace

TEST_F(ConvertTest, StringParsesToFloat64) {
  EXPECT_TRUE(supports(ctx, std::string("3.14"), SemanticType::Float64));
  EXPECT_EQ(std::get<double>(convert(ctx, std::string("3.14"), SemanticType::Float64)), 3.14);
  EXPECT_EQ(std::get<double>(convert(ctx, std::string("-2.5e3"), SemanticType::Float64)), -2500.0);
}

TEST_F(ConvertTest, IdentityIsSupportedAndUnchanged) {
  EXPECT_TRUE(supports(ctx, std::int64_t{7}, SemanticType::Int64));
  EXPECT_EQ(std::get<std::int64_t>(convert(ctx, std::int64_t{7}, SemanticType::Int64)), 7);
  const Value s = std::string("abc");
  EXPECT_EQ(convert(ctx, s, SemanticType::String), s);
}

TEST_F(ConvertTest, NonNumericStringIsUnsupported) {
  EXPECT_FALSE(supports(ctx, std::string("abc"), SemanticType::Float64));
  try {
    convert(ctx, std::string("abc"), SemanticType::Float64);
    FAIL();
  } catch (const ConversionError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("string"), std::string::npos);
    EXPECT_NE(msg.find("float64"), std::string::npos);
  }
}

TEST_F(ConvertTest, Int64WidensToFloat64) {
  EXPECT_EQ(std::get<double>(convert(ctx, std::int64_t{5}, SemanticType::Float64)), 5.0);
}

TEST_F(ConvertTest, IntegerWideningChain) {
  EXPECT_EQ(std::get<std::int16_t>(convert(ctx, std::int8_t{-3}, SemanticType::Int16)), -3);
  EXPECT_EQ(std::get<std::int32_t>(convert(ctx, std::int16_t{300}, SemanticType::Int32)), 300);
  EXPECT_EQ(std::get<std::int64_t>(convert(ctx, std::int32_t{-70000}, SemanticType::Int64)),
            -70000);
  EXPECT_EQ(std::get<double>(convert(ctx, 1.5f, SemanticType::Float64)), 1.5);
}

TEST_F(ConvertTest, NoNarrowing) {
  EXPECT_FALSE(supports(ctx, 2.0, SemanticType::Int64));
  EXPECT_FALSE(supports(ctx, std::int64_t{2}, SemanticType::Int32));
}

TEST_F(ConvertTest, BooleanAndIntegerStrings) {
  EXPECT_EQ(std::get<bool>(convert(ctx, std::string("true"), SemanticType::Boolean)), true);
  EXPECT_EQ(std::get<bool>(convert(ctx, std::string("false"), SemanticType::Boolean)), false);
  EXPECT_FALSE(supports(ctx, std::string("yes"), SemanticType::Boolean));
  EXPECT_EQ(std::get<std::int64_t>(convert(ctx, std::string("-42"), SemanticType::Int64)), -42);
  EXPECT_FALSE(supports(ctx, std::string("4.2"), SemanticType::Int64));
}

TEST_F(ConvertTest, DatasetImageWrapUnwrapPreservesSamples) {
  auto img = test::random_image(PixelType(PixelTypeCode::UInt16), {13, 7}, 9);
  auto ds = std::make_shared<Dataset>("d", img);
  const auto unwrapped = std::get<ImagePtr>(convert(ctx, ds, SemanticType::Image));
  EXPECT_EQ(unwrapped, img);
  const auto wrapped = std::get<DatasetPtr>(convert(ctx, img, SemanticType::Dataset));
  ASSERT_TRUE(wrapped);
  const auto back = std::get<ImagePtr>(convert(ctx, wrapped, SemanticType::Image));
  EXPECT_EQ(back->dims(), img->dims());
  EXPECT_EQ(back->pixel_type(), img->pixel_type());
  for (std::uint64_t i = 0; i < img->size(); ++i)
    ASSERT_EQ(back->get_at(i), img->get_at(i));
}

TEST_F(ConvertTest, RankingIsCostThenPriorityThenRegistration) {
  Context c;
  auto make = [](std::string id, unsigned cost, std::int32_t prio, double mark) {
    Converter conv;
    conv.id = std::move(id);
    conv.source = SemanticType::String;
    conv.target = SemanticType::Float64;
    conv.cost = cost;
    conv.priority = prio;
    conv.apply = [mark](const Value &) { return Value{mark}; };
    return conv;
  };
  register_converter(c, make("conv.expensive", 5, 100, 1.0));
  register_converter(c, make("conv.cheap-low", 1, 0, 2.0));
  register_converter(c, make("conv.cheap-high", 1, 10, 3.0));
  register_converter(c, make("conv.cheap-high-late", 1, 10, 4.0));
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(std::get<double>(convert(c, std::string("x"), SemanticType::Float64)), 3.0);
}

TEST(ConvertParse, Literals) {
  EXPECT_EQ(parse_float64("1e3"), 1000.0);
  EXPECT_FALSE(parse_float64("1e3x"));
  EXPECT_FALSE(parse_float64(""));
  EXPECT_EQ(parse_int64("+12"), 12);
  EXPECT_FALSE(parse_int64("12.0"));
  EXPECT_FALSE(parse_boolean("TRUE1"));
}
