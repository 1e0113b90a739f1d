#include "ndforge/modules.hpp"

#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/eval.hpp"
#include "ndforge/io.hpp"

#include <regex>
#include <sstream>

namespace ndforge::modules {

std::vector<const ParamSpec *> ModuleSpec::inputs() const {
  std::vector<const ParamSpec *> out;
  for (const auto &p : params)
    if (p.direction == Direction::Input)
      out.push_back(&p);
  return out;
}

std::vector<const ParamSpec *> ModuleSpec::outputs() const {
  std::vector<const ParamSpec *> out;
  for (const auto &p : params)
    if (p.direction == Direction::Output)
      out.push_back(&p);
  return out;
}

const ParamSpec *ModuleSpec::input(std::string_view name) const {
  for (const auto &p : params)
    if (p.direction == Direction::Input && p.name == name)
      return &p;
  return nullptr;
}

std::optional<SemanticType> header_type(std::string_view token) {
  using ST = SemanticType;
  static const std::pair<std::string_view, ST> table[] = {
      {"String", ST::String},   {"int", ST::Int64},  {"double", ST::Float64},
      {"boolean", ST::Boolean}, {"Dataset", ST::Dataset}, {"Img", ST::Image},
      {"File", ST::FilePath},
  };
  for (const auto &[name, type] : table)
    if (name == token)
      return type;
  return std::nullopt;
}

ModuleSpec parse_param_headers(std::string_view text, std::string name) {
  static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
  ModuleSpec spec;
  spec.name = std::move(name);
  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line.compare(start, 2, "#@") != 0)
      continue;
    std::istringstream words(line.substr(start));
    std::vector<std::string> tok;
    for (std::string w; words >> w;)
      tok.push_back(w);
    auto fail = [&](const std::string &what) {
      throw ParseError("line " + std::to_string(line_no) + ": " + what, line_no);
    };
    if (tok.size() != 3 || (tok[0] != "#@INPUT" && tok[0] != "#@OUTPUT"))
      fail("malformed header '" + line.substr(start) + "'");
    auto type = header_type(tok[1]);
    if (!type)
      fail("unknown parameter type '" + tok[1] + "'");
    if (!std::regex_match(tok[2], ident))
      fail("invalid parameter name '" + tok[2] + "'");
    for (const auto &p : spec.params)
      if (p.name == tok[2])
        fail("duplicate parameter '" + tok[2] + "'");
    ParamSpec p;
    p.name = tok[2];
    p.direction = tok[0] == "#@INPUT" ? Direction::Input : Direction::Output;
    p.type = *type;
    spec.params.push_back(std::move(p));
  }
  spec.body = [program = std::string(text)](Context &ctx, const ValueMap &inputs) {
    return ops::eval_program(ctx, program, inputs);
  };
  return spec;
}

namespace {

void run_processors(Context &ctx, ModuleInstance &inst, PluginKind kind) {
  for (const auto &meta : ctx.resolve_plugins(kind))
    if (const auto *p = std::any_cast<ModuleProcessor>(&meta.provider))
      (*p)(ctx, inst);
}

bool is_image_like(SemanticType t) {
  return t == SemanticType::Dataset || t == SemanticType::Image;
}

void register_processor(Context &ctx, PluginKind kind, std::string id,
                        std::int32_t priority, ModuleProcessor processor) {
  PluginMetadata meta;
  meta.name = id;
  meta.id = std::move(id);
  meta.kind = kind;
  meta.priority = priority;
  meta.provider = std::move(processor);
  ctx.register_plugin(std::move(meta));
}

std::string harvest_message(const ModuleSpec &spec, const ParamSpec &p,
                            const std::string &why) {
  return "module '" + spec.name + "': input '" + p.name + "' (" +
         std::string(to_string(p.type)) + "): " + why;
}

} // namespace

void preprocess_chain(Context &ctx, ModuleInstance &inst) {
  run_processors(ctx, inst, PluginKind::Preprocessor);
}

void postprocess_chain(Context &ctx, ModuleInstance &inst) {
  run_processors(ctx, inst, PluginKind::Postprocessor);
}

ValueMap run_module(Context &ctx, const ModuleSpec &spec, const ValueMap &provided) {
  ModuleInstance inst;
  inst.spec = &spec;
  inst.provided = provided;
  ctx.publish(make_event({"event", "module-event", "module-started"}, spec.name));
  preprocess_chain(ctx, inst);

  ValueMap produced;
  try {
    if (!spec.body)
      throw ModuleError("no body");
    produced = spec.body(ctx, inst.inputs);
  } catch (const HarvestError &) {
    throw;
  } catch (const std::exception &e) {
    ctx.publish(make_event({"event", "module-event", "module-failed"}, spec.name));
    throw ModuleError("module '" + spec.name + "': " + e.what());
  }

  for (const ParamSpec *p : spec.outputs()) {
    auto it = produced.find(p->name);
    if (it == produced.end())
      throw ModuleError("module '" + spec.name + "': output '" + p->name +
                        "' was not set");
    if (p->type == SemanticType::None) {
      inst.outputs[p->name] = it->second;
      continue;
    }
    try {
      inst.outputs[p->name] = convert(ctx, it->second, p->type);
    } catch (const ConversionError &e) {
      throw ModuleError("module '" + spec.name + "': output '" + p->name + "': " + e.what());
    }
  }

  postprocess_chain(ctx, inst);
  ctx.publish(make_event({"event", "module-event", "module-finished"}, spec.name));
  return inst.outputs;
}

ValueMap harvest_from_pairs(const Context &ctx, const ModuleSpec &spec,
                            std::span<const std::string> pairs) {
  ValueMap out;
  for (const auto &pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0)
      throw HarvestError(pair, "module '" + spec.name + "': expected key=value, got '" +
                                   pair + "'");
    const std::string key = pair.substr(0, eq);
    const std::string text = pair.substr(eq + 1);
    const ParamSpec *p = spec.input(key);
    if (!p)
      throw HarvestError(key, "module '" + spec.name + "' has no input '" + key + "'");
    if (is_image_like(p->type)) {
      try {
        auto ds = io::read(ctx, Location::file(text));
        out[key] = p->type == SemanticType::Image ? Value(ds->image()) : Value(ds);
      } catch (const Error &e) {
        throw HarvestError(key, harvest_message(spec, *p, e.what()));
      }
      continue;
    }
    if (p->type == SemanticType::String) {
      out[key] = text;
      continue;
    }
    auto conv = find_converter(ctx, Value(text), p->type);
    if (!conv)
      throw HarvestError(key, harvest_message(spec, *p, "cannot parse '" + text + "' as " +
                                                            std::string(to_string(p->type))));
    out[key] = conv->apply(Value(text));
  }
  return out;
}

void register_preprocessor(Context &ctx, std::string id, std::int32_t priority,
                           ModuleProcessor processor) {
  register_processor(ctx, PluginKind::Preprocessor, std::move(id), priority,
                     std::move(processor));
}

void register_postprocessor(Context &ctx, std::string id, std::int32_t priority,
                            ModuleProcessor processor) {
  register_processor(ctx, PluginKind::Postprocessor, std::move(id), priority,
                     std::move(processor));
}

void register_display(Context &ctx, std::string id, std::int32_t priority, Display display) {
  PluginMetadata meta;
  meta.name = id;
  meta.id = std::move(id);
  meta.kind = PluginKind::Display;
  meta.priority = priority;
  meta.provider = std::make_shared<const Display>(std::move(display));
  ctx.register_plugin(std::move(meta));
}

void register_command(Context &ctx, ModuleSpec spec, std::int32_t priority) {
  PluginMetadata meta;
  meta.id = "command." + spec.name;
  meta.name = spec.name;
  meta.kind = PluginKind::Command;
  meta.priority = priority;
  meta.provider = std::make_shared<const ModuleSpec>(std::move(spec));
  ctx.register_plugin(std::move(meta));
}

std::shared_ptr<const ModuleSpec> find_command(const Context &ctx, std::string_view name) {
  for (const auto &meta : ctx.resolve_plugins(PluginKind::Command))
    if (meta.name == name)
      if (const auto *p = std::any_cast<std::shared_ptr<const ModuleSpec>>(&meta.provider))
        return *p;
  return nullptr;
}

std::string last_used_key(const ModuleSpec &spec, const std::string &param) {
  return spec.name + "." + param;
}

void register_builtin_module_plugins(Context &ctx) {
  register_preprocessor(ctx, "preprocess.binder", 400, [](Context &c, ModuleInstance &inst) {
    const ModuleSpec &spec = *inst.spec;
    for (const auto &[key, value] : inst.provided) {
      const ParamSpec *p = spec.input(key);
      if (!p)
        throw HarvestError(key, "module '" + spec.name + "' has no input '" + key + "'");
      try {
        inst.inputs[key] = convert(c, value, p->type);
      } catch (const ConversionError &e) {
        throw HarvestError(key, harvest_message(spec, *p, e.what()));
      }
      inst.resolved.insert(key);
    }
  });

  register_preprocessor(ctx, "preprocess.active-image", 300, [](Context &c, ModuleInstance &inst) {
    const ParamSpec *target = nullptr;
    for (const ParamSpec *p : inst.spec->inputs()) {
      if (!is_image_like(p->type))
        continue;
      if (target)
        return; // only a single image parameter is auto-filled
      target = p;
    }
    if (!target || inst.resolved.count(target->name))
      return;
    auto active = c.active_dataset();
    if (!active)
      return;
    inst.inputs[target->name] =
        target->type == SemanticType::Image ? Value(active->image()) : Value(active);
    inst.resolved.insert(target->name);
  });

  register_preprocessor(ctx, "preprocess.last-used", 200, [](Context &c, ModuleInstance &inst) {
    for (const ParamSpec *p : inst.spec->inputs()) {
      if (inst.resolved.count(p->name) || is_image_like(p->type))
        continue;
      if (auto stored = c.preference(last_used_key(*inst.spec, p->name))) {
        Value v = *stored;
        if (supports(c, v, p->type)) {
          inst.inputs[p->name] = convert(c, v, p->type);
          inst.resolved.insert(p->name);
          continue;
        }
      }
      if (p->default_value) {
        inst.inputs[p->name] = *p->default_value;
        inst.resolved.insert(p->name);
      }
    }
  });

  register_preprocessor(ctx, "preprocess.validator", 100, [](Context &, ModuleInstance &inst) {
    for (const ParamSpec *p : inst.spec->inputs())
      if (p->required && !inst.resolved.count(p->name))
        throw HarvestError(p->name,
                           harvest_message(*inst.spec, *p, "required input has no value"));
  });

  register_display(ctx, "display.text", -1000,
                   Display{[](const Value &) { return true; },
                           [](Context &c, const std::string &name, const Value &v) {
                             c.write_output(name + " = " + render(v));
                           }});

  register_postprocessor(ctx, "postprocess.display", 200, [](Context &c, ModuleInstance &inst) {
    const auto displays = c.resolve_plugins(PluginKind::Display);
    for (const ParamSpec *p : inst.spec->outputs()) {
      const Value &v = inst.outputs.at(p->name);
      bool shown = false;
      for (const auto &meta : displays) {
        const auto *d = std::any_cast<std::shared_ptr<const Display>>(&meta.provider);
        if (d && *d && (*d)->accepts(v)) {
          (*d)->show(c, p->name, v);
          shown = true;
          break;
        }
      }
      if (!shown)
        c.write_output(p->name + " = " + render(v));
    }
  });

  register_postprocessor(ctx, "postprocess.last-used", 100, [](Context &c, ModuleInstance &inst) {
    for (const ParamSpec *p : inst.spec->inputs()) {
      auto it = inst.inputs.find(p->name);
      if (it == inst.inputs.end() || is_image_like(p->type))
        continue;
      c.set_preference(last_used_key(*inst.spec, p->name), render(it->second));
    }
  });

  ModuleSpec eval_cmd;
  eval_cmd.name = "ops.eval";
  eval_cmd.params = {
      ParamSpec{"expr", Direction::Input, SemanticType::String, true, std::nullopt},
      ParamSpec{"result", Direction::Output, SemanticType::None, true, std::nullopt},
  };
  eval_cmd.body = [](Context &c, const ValueMap &in) {
    return ValueMap{{"result", ops::eval(c, std::get<std::string>(in.at("expr")))}};
  };
  register_command(ctx, std::move(eval_cmd));
}

} // namespace ndforge::modules
