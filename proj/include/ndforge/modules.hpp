#pragma once

#include "ndforge/container.hpp"
#include "ndforge/value.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ndforge::modules {

enum class Direction { Input, Output };

struct ParamSpec {
  std::string name;
  Direction direction = Direction::Input;
  SemanticType type = SemanticType::String; // None on an output accepts any value
  bool required = true;
  std::optional<Value> default_value;
};

struct ModuleSpec {
  using Body = std::function<ValueMap(Context &, const ValueMap &inputs)>;

  std::string name;
  std::vector<ParamSpec> params;
  Body body;

  std::vector<const ParamSpec *> inputs() const;
  std::vector<const ParamSpec *> outputs() const;
  const ParamSpec *input(std::string_view name) const;
};

struct ModuleInstance {
  const ModuleSpec *spec = nullptr;
  ValueMap provided;
  ValueMap inputs;
  ValueMap outputs;
  std::set<std::string> resolved;
};

/// `#@INPUT <Type> <name>` / `#@OUTPUT <Type> <name>` header lines; the whole
/// text becomes an expression program body. Throws ParseError whose position
/// is the 1-based line number.
ModuleSpec parse_param_headers(std::string_view text, std::string name = "script");
/// Header type token → semantic type (String, int, double, boolean, Dataset,
/// Img, File).
std::optional<SemanticType> header_type(std::string_view token);

/// Preprocessors (priority order), body, postprocessors. Body failures are
/// rethrown as ModuleError carrying the module name.
ValueMap run_module(Context &ctx, const ModuleSpec &spec, const ValueMap &provided);

void preprocess_chain(Context &ctx, ModuleInstance &inst);
void postprocess_chain(Context &ctx, ModuleInstance &inst);

/// Parses `key=value` literals against the declared input types. Image and
/// dataset values are opened through the format registry. Never mutates the
/// context.
ValueMap harvest_from_pairs(const Context &ctx, const ModuleSpec &spec,
                            std::span<const std::string> pairs);

/// Provider of PluginKind::Preprocessor and PluginKind::Postprocessor plugins.
using ModuleProcessor = std::function<void(Context &, ModuleInstance &)>;

/// Provider of PluginKind::Display plugins.
struct Display {
  std::function<bool(const Value &)> accepts;
  std::function<void(Context &, const std::string &name, const Value &)> show;
};

void register_preprocessor(Context &ctx, std::string id, std::int32_t priority,
                           ModuleProcessor processor);
void register_postprocessor(Context &ctx, std::string id, std::int32_t priority,
                            ModuleProcessor processor);
void register_display(Context &ctx, std::string id, std::int32_t priority, Display display);

/// Built-in commands are PluginKind::Command plugins named after the module.
void register_command(Context &ctx, ModuleSpec spec, std::int32_t priority = 0);
std::shared_ptr<const ModuleSpec> find_command(const Context &ctx, std::string_view name);

/// Preference key for the last-used value of an input.
std::string last_used_key(const ModuleSpec &spec, const std::string &param);

/// Binder, active-image, last-used and validator preprocessors; text display;
/// last-used recorder; the ops.eval command.
void register_builtin_module_plugins(Context &ctx);

} // namespace ndforge::modules
