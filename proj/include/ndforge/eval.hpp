#pragma once

#include "ndforge/container.hpp"
#include "ndforge/value.hpp"

#include <string_view>

namespace ndforge::ops {

/// Evaluates one expression:
///   expr    := term (('+'|'-') term)*
///   term    := unary (('*'|'/') unary)*
///   unary   := '-' unary | primary
///   primary := NUMBER | STRING | IDENT | IDENT '(' args ')' | '(' expr ')'
/// Infix operators run math.add/sub/mul/div, unary minus runs math.negate and
/// calls dispatch any op by name. '+' concatenates when either side is a
/// string. Throws ParseError with the byte offset of the offending token.
Value eval(Context &ctx, std::string_view expression, const ValueMap &bindings = {});

/// Runs `name = expr` statements separated by newlines or ';'. Text from '#'
/// to the end of a line is ignored. Returns `bindings` extended by every
/// assignment.
ValueMap eval_program(Context &ctx, std::string_view program, ValueMap bindings = {});

/// Registers ops.eval(string) -> any.
void register_eval_op(Context &ctx);

} // namespace ndforge::ops
