#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/eval.hpp"
#include "ndforge/ops.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ndforge;

namespace {

struct EvalTest : ::testing::Test {
  EvalTest() {
    register_builtin_converters(ctx);
    ops::register_builtin_ops(ctx);
    ops::register_eval_op(ctx);
  }

  double num(std::string_view text, const ValueMap &b = {}) {
    return std::get<double>(ops::eval(ctx, text, b));
  }

  Context ctx;
};

/// Reference evaluator over doubles for random arithmetic trees.
struct Gen {
  std::mt19937 rng;
  std::string text;
  double build(int depth) {
    if (depth == 0 || rng() % 3 == 0) {
      const int v = static_cast<int>(rng() % 20) + 1;
      text += std::to_string(v);
      return v;
    }
    const char op = "+-*"[rng() % 3];
    text += '(';
    const double a = build(depth - 1);
    text += ' ';
    text += op;
    text += ' ';
    const double b = build(depth - 1);
    text += ')';
    return op == '+' ? a + b : op == '-' ? a - b : a * b;
  }
};

} // namespace

TEST_F(EvalTest, Precedence) {
  EXPECT_EQ(num("2+3*4"), 14.0);
  EXPECT_EQ(num("(2+3)*4"), 20.0);
  EXPECT_EQ(num("10-4-3"), 3.0);
  EXPECT_EQ(num("12/3/2"), 2.0);
  EXPECT_EQ(num("-2*3"), -6.0);
  EXPECT_EQ(num("--4"), 4.0);
}

TEST_F(EvalTest, CallsDispatchOps) {
  EXPECT_EQ(num("sqrt(16)"), 4.0);
  EXPECT_EQ(num("math.sqrt(81) + 1"), 10.0);
  EXPECT_NEAR(num("math.pi()"), M_PI, 1e-15);
}

TEST_F(EvalTest, StringConcatenationRendersOtherSide) {
  ValueMap b{{"name", std::string("World")}, {"age", std::int64_t{7}}};
  EXPECT_EQ(std::get<std::string>(ops::eval(ctx, "\"Hi \" + name + \" \" + age", b)),
            "Hi World 7");
  EXPECT_EQ(std::get<std::string>(ops::eval(ctx, "\"a\\tb\"")), "a\tb");
}

TEST_F(EvalTest, BindingsAndImages) {
  auto img = test::constant_image(PixelType(PixelTypeCode::Float64), {4, 4}, 2.0);
  const auto out = as_image(ops::eval(ctx, "img * 3 + 1", {{"img", img}}));
  ASSERT_TRUE(out);
  for (std::uint64_t i = 0; i < out->size(); ++i)
    ASSERT_EQ(out->get_at(i), 7.0);
  EXPECT_EQ(img->get_at(0), 2.0);
}

TEST_F(EvalTest, ErrorsCarryOffsets) {
  try {
    ops::eval(ctx, "1 + nope");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.position(), 4u);
  }
  try {
    ops::eval(ctx, "(1 + 2");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.position(), 6u);
  }
  EXPECT_THROW(ops::eval(ctx, "1 +"), ParseError);
  EXPECT_THROW(ops::eval(ctx, "nosuch.op(1)"), NoMatchError);
}

TEST_F(EvalTest, ProgramAssignmentsAndComments) {
  const auto out = ops::eval_program(ctx, "# header\nx = 2 + 3\ny = x * x; z = y - 1 # tail\n");
  EXPECT_EQ(std::get<double>(out.at("x")), 5.0);
  EXPECT_EQ(std::get<double>(out.at("y")), 25.0);
  EXPECT_EQ(std::get<double>(out.at("z")), 24.0);
}

TEST_F(EvalTest, EvalOpReturnsValue) {
  EXPECT_EQ(std::get<double>(ops::run(ctx, "ops.eval", {std::string("2+3")})), 5.0);
}

TEST_F(EvalTest, RandomArithmeticMatchesReference) {
  Gen g{std::mt19937(21), {}};
  for (int i = 0; i < 300; ++i) {
    g.text.clear();
    const double expected = g.build(4);
    ASSERT_EQ(num(g.text), expected) << g.text;
  }
}
