#include "ndforge/value.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace ndforge {

namespace {

constexpr std::array<std::pair<SemanticType, std::string_view>, 13> kTypeNames{{
    {SemanticType::None, "none"},
    {SemanticType::String, "string"},
    {SemanticType::Int8, "int8"},
    {SemanticType::Int16, "int16"},
    {SemanticType::Int32, "int32"},
    {SemanticType::Int64, "int64"},
    {SemanticType::Float32, "float32"},
    {SemanticType::Float64, "float64"},
    {SemanticType::Boolean, "boolean"},
    {SemanticType::Dataset, "dataset"},
    {SemanticType::Image, "image"},
    {SemanticType::FilePath, "file-path"},
    {SemanticType::Float64List, "float64[]"},
}};

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

SemanticType type_of(const Value &value) {
  return std::visit(
      overloaded{
          [](std::monostate) { return SemanticType::None; },
          [](const std::string &) { return SemanticType::String; },
          [](std::int8_t) { return SemanticType::Int8; },
          [](std::int16_t) { return SemanticType::Int16; },
          [](std::int32_t) { return SemanticType::Int32; },
          [](std::int64_t) { return SemanticType::Int64; },
          [](float) { return SemanticType::Float32; },
          [](double) { return SemanticType::Float64; },
          [](bool) { return SemanticType::Boolean; },
          [](const FilePath &) { return SemanticType::FilePath; },
          [](const DatasetPtr &) { return SemanticType::Dataset; },
          [](const ImagePtr &) { return SemanticType::Image; },
          [](const std::vector<double> &) { return SemanticType::Float64List; },
      },
      value);
}

std::string_view to_string(SemanticType type) {
  for (const auto &[t, name] : kTypeNames)
    if (t == type)
      return name;
  return "unknown";
}

std::optional<SemanticType> parse_semantic_type(std::string_view name) {
  for (const auto &[t, n] : kTypeNames)
    if (n == name)
      return t;
  return std::nullopt;
}

bool is_numeric(SemanticType type) {
  switch (type) {
  case SemanticType::Int8:
  case SemanticType::Int16:
  case SemanticType::Int32:
  case SemanticType::Int64:
  case SemanticType::Float32:
  case SemanticType::Float64:
    return true;
  default:
    return false;
  }
}

std::optional<double> as_double(const Value &value) {
  return std::visit(
      [](const auto &v) -> std::optional<double> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>)
          return static_cast<double>(v);
        else
          return std::nullopt;
      },
      value);
}

ImagePtr as_image(const Value &value) {
  if (const auto *img = std::get_if<ImagePtr>(&value))
    return *img;
  if (const auto *ds = std::get_if<DatasetPtr>(&value))
    return *ds ? (*ds)->image() : nullptr;
  return nullptr;
}

std::string format_double(double v) {
  if (std::isnan(v))
    return "NaN";
  if (std::isinf(v))
    return v > 0 ? "Infinity" : "-Infinity";
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string render(const Value &value) {
  auto image_text = [](const NDImage &img) {
    return "image " + dims_string(img) + " " + std::string(img.pixel_type().name());
  };
  return std::visit(
      overloaded{
          [](std::monostate) -> std::string { return "<none>"; },
          [](const std::string &s) { return s; },
          [](std::int8_t v) { return std::to_string(v); },
          [](std::int16_t v) { return std::to_string(v); },
          [](std::int32_t v) { return std::to_string(v); },
          [](std::int64_t v) { return std::to_string(v); },
          [](float v) { return format_double(v); },
          [](double v) { return format_double(v); },
          [](bool v) -> std::string { return v ? "true" : "false"; },
          [](const FilePath &p) { return p.path; },
          [&](const DatasetPtr &d) -> std::string {
            return d ? image_text(*d->image()) : "<none>";
          },
          [&](const ImagePtr &i) -> std::string {
            return i ? image_text(*i) : "<none>";
          },
          [](const std::vector<double> &list) {
            std::string s = "[";
            for (std::size_t i = 0; i < list.size(); ++i)
              s += (i ? ", " : "") + format_double(list[i]);
            return s + "]";
          },
      },
      value);
}

} // namespace ndforge
