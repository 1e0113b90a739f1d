#include "ndforge/convert.hpp"

#include "ndforge/error.hpp"

#include <algorithm>
#include <charconv>
#include <memory>

namespace ndforge {

std::optional<double> parse_float64(std::string_view text) {
  if (!text.empty() && text.front() == '+')
    text.remove_prefix(1);
  if (text.empty())
    return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int64(std::string_view text) {
  if (!text.empty() && text.front() == '+')
    text.remove_prefix(1);
  if (text.empty())
    return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return v;
}

std::optional<bool> parse_boolean(std::string_view text) {
  if (text == "true")
    return true;
  if (text == "false")
    return false;
  return std::nullopt;
}

void register_converter(Context &ctx, Converter converter) {
  PluginMetadata meta;
  meta.id = converter.id;
  meta.kind = PluginKind::Converter;
  meta.name = std::string(to_string(converter.source)) + "->" +
              std::string(to_string(converter.target));
  meta.priority = converter.priority;
  meta.provider = std::make_shared<const Converter>(std::move(converter));
  ctx.register_plugin(std::move(meta));
}

std::optional<Converter> find_converter(const Context &ctx, const Value &value,
                                        SemanticType target) {
  const auto source = type_of(value);
  std::shared_ptr<const Converter> best;
  // resolve_plugins already orders by (-priority, registration); cost is the
  // primary key, so the first minimum-cost candidate wins.
  for (const auto &meta : ctx.resolve_plugins(PluginKind::Converter)) {
    const auto *conv =
        std::any_cast<std::shared_ptr<const Converter>>(&meta.provider);
    if (conv == nullptr || !*conv)
      continue;
    const Converter &c = **conv;
    if (c.source != source || c.target != target)
      continue;
    if (c.accepts && !c.accepts(value))
      continue;
    if (!best || c.cost < best->cost)
      best = *conv;
  }
  if (!best)
    return std::nullopt;
  return *best;
}

bool supports(const Context &ctx, const Value &value, SemanticType target) {
  if (type_of(value) == target)
    return true;
  return find_converter(ctx, value, target).has_value();
}

Value convert(const Context &ctx, const Value &value, SemanticType target) {
  auto source = type_of(value);
  if (source == target)
    return value;
  auto conv = find_converter(ctx, value, target);
  if (!conv)
    throw ConversionError("cannot convert " + std::string(to_string(source)) +
                          " value '" + render(value) + "' to " +
                          std::string(to_string(target)));
  return conv->apply(value);
}

namespace {

template <class From, class To>
Converter widen(std::string id, SemanticType from, SemanticType to) {
  Converter c;
  c.id = std::move(id);
  c.source = from;
  c.target = to;
  c.widening = true;
  c.apply = [](const Value &v) -> Value {
    return static_cast<To>(std::get<From>(v));
  };
  return c;
}

} // namespace

void register_builtin_converters(Context &ctx) {
  using ST = SemanticType;
  {
    Converter c;
    c.id = "convert.string-to-float64";
    c.source = ST::String;
    c.target = ST::Float64;
    c.accepts = [](const Value &v) {
      return parse_float64(std::get<std::string>(v)).has_value();
    };
    c.apply = [](const Value &v) -> Value {
      return *parse_float64(std::get<std::string>(v));
    };
    register_converter(ctx, std::move(c));
  }
  {
    Converter c;
    c.id = "convert.string-to-int64";
    c.source = ST::String;
    c.target = ST::Int64;
    c.accepts = [](const Value &v) {
      return parse_int64(std::get<std::string>(v)).has_value();
    };
    c.apply = [](const Value &v) -> Value {
      return *parse_int64(std::get<std::string>(v));
    };
    register_converter(ctx, std::move(c));
  }
  {
    Converter c;
    c.id = "convert.string-to-boolean";
    c.source = ST::String;
    c.target = ST::Boolean;
    c.accepts = [](const Value &v) {
      return parse_boolean(std::get<std::string>(v)).has_value();
    };
    c.apply = [](const Value &v) -> Value {
      return *parse_boolean(std::get<std::string>(v));
    };
    register_converter(ctx, std::move(c));
  }
  {
    Converter c;
    c.id = "convert.string-to-file-path";
    c.source = ST::String;
    c.target = ST::FilePath;
    c.apply = [](const Value &v) -> Value {
      return FilePath{std::get<std::string>(v)};
    };
    register_converter(ctx, std::move(c));
  }
  register_converter(ctx, widen<std::int8_t, std::int16_t>("convert.int8-to-int16", ST::Int8, ST::Int16));
  register_converter(ctx, widen<std::int8_t, std::int32_t>("convert.int8-to-int32", ST::Int8, ST::Int32));
  register_converter(ctx, widen<std::int8_t, std::int64_t>("convert.int8-to-int64", ST::Int8, ST::Int64));
  register_converter(ctx, widen<std::int16_t, std::int32_t>("convert.int16-to-int32", ST::Int16, ST::Int32));
  register_converter(ctx, widen<std::int16_t, std::int64_t>("convert.int16-to-int64", ST::Int16, ST::Int64));
  register_converter(ctx, widen<std::int32_t, std::int64_t>("convert.int32-to-int64", ST::Int32, ST::Int64));
  register_converter(ctx, widen<std::int64_t, double>("convert.int64-to-float64", ST::Int64, ST::Float64));
  register_converter(ctx, widen<float, double>("convert.float32-to-float64", ST::Float32, ST::Float64));
  {
    Converter c;
    c.id = "convert.dataset-to-image";
    c.source = ST::Dataset;
    c.target = ST::Image;
    c.accepts = [](const Value &v) { return std::get<DatasetPtr>(v) != nullptr; };
    c.apply = [](const Value &v) -> Value {
      return std::get<DatasetPtr>(v)->image();
    };
    register_converter(ctx, std::move(c));
  }
  {
    Converter c;
    c.id = "convert.image-to-dataset";
    c.source = ST::Image;
    c.target = ST::Dataset;
    c.accepts = [](const Value &v) { return std::get<ImagePtr>(v) != nullptr; };
    c.apply = [](const Value &v) -> Value {
      return std::make_shared<Dataset>("image", std::get<ImagePtr>(v));
    };
    register_converter(ctx, std::move(c));
  }
}

} // namespace ndforge
