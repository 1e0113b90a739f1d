#include "ndforge/eval.hpp"

#include "ndforge/error.hpp"
#include "ndforge/ops.hpp"

#include <cctype>
#include <charconv>

namespace ndforge::ops {

namespace {

enum class Tok { End, Number, String, Ident, Op, Newline };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0;
  std::size_t pos = 0;
};

class Parser {
public:
  Parser(Context &ctx, std::string_view text, ValueMap &bindings, bool program)
      : ctx_(ctx), text_(text), bindings_(bindings), program_(program) {
    advance();
  }

  Value expression_only() {
    Value v = expr();
    if (tok_.kind != Tok::End)
      fail("unexpected '" + tok_.text + "'");
    return v;
  }

  void program() {
    for (;;) {
      while (tok_.kind == Tok::Newline || is_op(";"))
        advance();
      if (tok_.kind == Tok::End)
        return;
      if (tok_.kind != Tok::Ident)
        fail("expected an assignment");
      const std::string name = tok_.text;
      advance();
      if (!is_op("="))
        fail("expected '=' after '" + name + "'");
      advance();
      bindings_[name] = expr();
      if (tok_.kind != Tok::End && tok_.kind != Tok::Newline && !is_op(";"))
        fail("unexpected '" + tok_.text + "'");
    }
  }

private:
  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError(msg + " at offset " + std::to_string(tok_.pos), tok_.pos);
  }

  bool is_op(std::string_view op) const { return tok_.kind == Tok::Op && tok_.text == op; }

  void advance() {
    for (;;) {
      while (i_ < text_.size() && (text_[i_] == ' ' || text_[i_] == '\t' ||
                                   text_[i_] == '\r' || (!program_ && text_[i_] == '\n')))
        ++i_;
      if (program_ && i_ < text_.size() && text_[i_] == '#') {
        while (i_ < text_.size() && text_[i_] != '\n')
          ++i_;
        continue;
      }
      break;
    }
    tok_ = Token{};
    tok_.pos = i_;
    if (i_ >= text_.size())
      return;
    const char c = text_[i_];
    if (c == '\n') {
      tok_.kind = Tok::Newline;
      tok_.text = "\\n";
      ++i_;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) ||
                                  text_[j] == '_' || text_[j] == '.'))
        ++j;
      tok_.kind = Tok::Ident;
      tok_.text = std::string(text_.substr(i_, j - i_));
      i_ = j;
      return;
    }
    if (c == '"') {
      lex_string();
      return;
    }
    if (std::string_view("+-*/(),=;").find(c) != std::string_view::npos) {
      tok_.kind = Tok::Op;
      tok_.text = std::string(1, c);
      ++i_;
      return;
    }
    tok_.text = std::string(1, c);
    fail("unexpected character '" + tok_.text + "'");
  }

  void lex_number() {
    std::size_t j = i_;
    auto digits = [&] {
      while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j])))
        ++j;
    };
    digits();
    if (j < text_.size() && text_[j] == '.') {
      ++j;
      digits();
    }
    if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < text_.size() && (text_[k] == '+' || text_[k] == '-'))
        ++k;
      if (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) {
        j = k;
        digits();
      }
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + i_, text_.data() + j, v);
    tok_.text = std::string(text_.substr(i_, j - i_));
    if (ec != std::errc{} || ptr != text_.data() + j)
      fail("malformed number '" + tok_.text + "'");
    tok_.kind = Tok::Number;
    tok_.number = v;
    i_ = j;
  }

  void lex_string() {
    std::string s;
    std::size_t j = i_ + 1;
    for (;;) {
      if (j >= text_.size() || text_[j] == '\n')
        fail("unterminated string");
      const char c = text_[j++];
      if (c == '"')
        break;
      if (c == '\\' && j < text_.size()) {
        const char e = text_[j++];
        s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        continue;
      }
      s += c;
    }
    tok_.kind = Tok::String;
    tok_.text = std::move(s);
    i_ = j;
  }

  Value call(const std::string &name, std::vector<Value> args,
             std::optional<OpKind> kind) {
    OpRequest req;
    req.name = name;
    req.args = std::move(args);
    req.kind = kind;
    return run(ctx_, req);
  }

  Value binary(char op, const Value &a, const Value &b) {
    if (op == '+' && (type_of(a) == SemanticType::String ||
                      type_of(b) == SemanticType::String))
      return render(a) + render(b);
    static const char *names[] = {"math.add", "math.sub", "math.mul", "math.div"};
    const char *name = names[std::string_view("+-*/").find(op)];
    return call(name, {a, b}, OpKind::Function);
  }

  Value expr() {
    Value v = term();
    while (is_op("+") || is_op("-")) {
      const char op = tok_.text[0];
      advance();
      v = binary(op, v, term());
    }
    return v;
  }

  Value term() {
    Value v = unary();
    while (is_op("*") || is_op("/")) {
      const char op = tok_.text[0];
      advance();
      v = binary(op, v, unary());
    }
    return v;
  }

  Value unary() {
    if (is_op("-")) {
      advance();
      return call("math.negate", {unary()}, std::nullopt);
    }
    return primary();
  }

  Value primary() {
    if (tok_.kind == Tok::Number) {
      double v = tok_.number;
      advance();
      return v;
    }
    if (tok_.kind == Tok::String) {
      std::string s = tok_.text;
      advance();
      return s;
    }
    if (is_op("(")) {
      advance();
      Value v = expr();
      if (!is_op(")"))
        fail("expected ')'");
      advance();
      return v;
    }
    if (tok_.kind == Tok::Ident) {
      const std::string name = tok_.text;
      const std::size_t at = tok_.pos;
      advance();
      if (is_op("("))
        return call_expr(name);
      auto it = bindings_.find(name);
      if (it == bindings_.end())
        throw ParseError("unbound identifier '" + name + "' at offset " +
                             std::to_string(at),
                         at);
      return it->second;
    }
    if (tok_.kind == Tok::End || tok_.kind == Tok::Newline)
      fail("unexpected end of expression");
    fail("unexpected '" + tok_.text + "'");
  }

  Value call_expr(const std::string &name) {
    advance(); // '('
    std::vector<Value> args;
    if (!is_op(")")) {
      for (;;) {
        args.push_back(expr());
        if (is_op(")"))
          break;
        if (!is_op(","))
          fail("expected ',' or ')'");
        advance();
      }
    }
    advance(); // ')'
    try {
      return call(name, args, OpKind::Function);
    } catch (const NoMatchError &first) {
      try {
        return call(name, args, OpKind::Computer);
      } catch (const NoMatchError &) {
        throw first;
      }
    }
  }

  Context &ctx_;
  std::string_view text_;
  ValueMap &bindings_;
  bool program_;
  std::size_t i_ = 0;
  Token tok_;
};

} // namespace

Value eval(Context &ctx, std::string_view expression, const ValueMap &bindings) {
  ValueMap local = bindings;
  Parser p(ctx, expression, local, false);
  return p.expression_only();
}

ValueMap eval_program(Context &ctx, std::string_view program, ValueMap bindings) {
  Parser p(ctx, program, bindings, true);
  p.program();
  return bindings;
}

void register_eval_op(Context &ctx) {
  OpCandidate op;
  op.id = "ops.eval";
  op.signature = OpSignature{"ops.eval", {ParamType::of(SemanticType::String)},
                             SemanticType::None};
  op.arity = 1;
  op.body.calculate = [](Context &c, Args a) -> Value {
    return eval(c, std::get<std::string>(a[0]));
  };
  register_op(ctx, std::move(op));
}

} // namespace ndforge::ops
