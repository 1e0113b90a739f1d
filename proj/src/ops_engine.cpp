#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/ops.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

namespace ndforge::ops {

std::string_view to_string(OpKind kind) {
  switch (kind) {
  case OpKind::Computer:
    return "computer";
  case OpKind::Function:
    return "function";
  case OpKind::Inplace:
    return "inplace";
  case OpKind::HybridCF:
    return "hybrid-cf";
  case OpKind::HybridCI:
    return "hybrid-ci";
  case OpKind::HybridCFI:
    return "hybrid-cfi";
  }
  return "?";
}

bool has_compute(OpKind kind) {
  return kind == OpKind::Computer || kind == OpKind::HybridCF ||
         kind == OpKind::HybridCI || kind == OpKind::HybridCFI;
}

bool has_calculate(OpKind kind) {
  return kind == OpKind::Function || kind == OpKind::HybridCF ||
         kind == OpKind::HybridCFI;
}

bool has_mutate(OpKind kind) {
  return kind == OpKind::Inplace || kind == OpKind::HybridCI ||
         kind == OpKind::HybridCFI;
}

std::string ParamType::text() const {
  std::string s = type == SemanticType::None ? "any" : std::string(ndforge::to_string(type));
  std::vector<std::string> tags;
  if (backing)
    tags.emplace_back(ndforge::to_string(*backing));
  if (!constraint_label.empty())
    tags.push_back(constraint_label);
  if (!tags.empty()) {
    s += '[';
    for (std::size_t i = 0; i < tags.size(); ++i)
      s += (i ? "," : "") + tags[i];
    s += ']';
  }
  return s;
}

std::string OpSignature::text() const {
  std::string s = "(";
  for (std::size_t i = 0; i < params.size(); ++i)
    s += (i ? ", " : "") + params[i].text();
  s += ") -> ";
  s += output == SemanticType::None ? "any" : std::string(ndforge::to_string(output));
  return s;
}

bool valid_op_name(std::string_view name) {
  static const std::regex re(R"([a-z][a-zA-Z0-9]*(\.[a-z][a-zA-Z0-9]*)+)");
  return std::regex_match(name.begin(), name.end(), re);
}

void register_op(Context &ctx, OpCandidate op) {
  if (!valid_op_name(op.signature.name))
    throw OpError("invalid op name '" + op.signature.name + "'");
  if (op.arity < 0 || op.arity > 2 ||
      static_cast<std::size_t>(op.arity) > op.signature.params.size())
    throw OpError("op '" + op.id + "' has unsupported arity " +
                  std::to_string(op.arity));
  const auto &b = op.body;
  if (has_calculate(op.kind) && !b.calculate)
    throw OpError("op '" + op.id + "' lacks a calculate entry point");
  if (has_compute(op.kind) && (!b.compute || !b.allocate))
    throw OpError("op '" + op.id + "' lacks compute/allocate entry points");
  if (has_mutate(op.kind) &&
      (!b.mutate || b.mutable_index >= op.signature.params.size()))
    throw OpError("op '" + op.id + "' lacks a mutate entry point");
  PluginMetadata meta;
  meta.id = op.id;
  meta.kind = PluginKind::Op;
  meta.name = op.signature.name;
  meta.priority = op.priority;
  meta.provider = OpPtr(std::make_shared<const OpCandidate>(std::move(op)));
  ctx.register_plugin(std::move(meta));
}

bool MatchScore::better_than(const MatchScore &o) const {
  if (conversions != o.conversions)
    return conversions < o.conversions;
  if (distance != o.distance)
    return distance < o.distance;
  if (priority != o.priority)
    return priority > o.priority;
  return registration_seq < o.registration_seq;
}

bool MatchScore::ties_with(const MatchScore &o) const {
  return conversions == o.conversions && distance == o.distance &&
         priority == o.priority;
}

namespace {

bool name_matches(std::string_view op_name, std::string_view requested) {
  if (op_name == requested)
    return true;
  return op_name.size() > requested.size() &&
         op_name.substr(op_name.size() - requested.size()) == requested &&
         op_name[op_name.size() - requested.size() - 1] == '.';
}

bool provides(OpKind kind, OpKind requested) {
  switch (requested) {
  case OpKind::Function:
    return has_calculate(kind);
  case OpKind::Computer:
    return has_compute(kind);
  case OpKind::Inplace:
    return has_mutate(kind);
  default:
    return kind == requested;
  }
}

struct ParamFit {
  Value value;
  unsigned conversions = 0;
  unsigned distance = 0;
};

/// nullopt with `why` filled when the argument is not acceptable.
std::optional<ParamFit> fit(const Context &ctx, const ParamType &p,
                            const Value &arg, std::string &why) {
  ParamFit f{arg, 0, 0};
  const auto given = type_of(arg);
  if (p.type == SemanticType::None) {
    f.distance = 1;
  } else if (given != p.type) {
    auto conv = find_converter(ctx, arg, p.type);
    if (!conv) {
      why = std::string(ndforge::to_string(given)) + " is not " + p.text();
      return std::nullopt;
    }
    f.value = conv->apply(arg);
    if (conv->widening)
      ++f.distance;
    else
      ++f.conversions;
  }
  if (p.type == SemanticType::Image) {
    const auto &img = std::get<ImagePtr>(f.value);
    if (!img) {
      why = "null image";
      return std::nullopt;
    }
    if (p.backing) {
      if (img->backing() != *p.backing) {
        why = std::string(ndforge::to_string(img->backing())) + " image is not " + p.text();
        return std::nullopt;
      }
    } else {
      ++f.distance;
    }
  }
  if (p.constraint && !p.constraint(f.value)) {
    why = "argument fails constraint " + p.text();
    return std::nullopt;
  }
  return f;
}

std::string describe_args(const std::vector<Value> &args) {
  std::string s = "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    s += i ? ", " : "";
    s += ndforge::to_string(type_of(args[i]));
    if (auto img = std::get_if<ImagePtr>(&args[i]); img && *img)
      s += "[" + std::string(ndforge::to_string((*img)->backing())) + "," +
           std::string((*img)->pixel_type().name()) + "]";
  }
  return s + ")";
}

std::vector<const NDImage *> images_in(Args args) {
  std::vector<const NDImage *> out;
  for (const auto &a : args)
    if (auto img = as_image(a); img &&
        std::find(out.begin(), out.end(), img.get()) == out.end())
      out.push_back(img.get());
  return out;
}

} // namespace

Match match(const Context &ctx, const OpRequest &request) {
  std::vector<Match> fits;
  std::vector<std::string> near_misses;
  for (const auto &meta : ctx.resolve_plugins(PluginKind::Op)) {
    const auto *ptr = std::any_cast<OpPtr>(&meta.provider);
    if (ptr == nullptr || !*ptr)
      continue;
    const OpPtr &op = *ptr;
    if (!name_matches(op->signature.name, request.name))
      continue;
    const std::string label = op->id + " " + op->signature.text();
    if (request.kind && !provides(op->kind, *request.kind)) {
      near_misses.push_back(label + ": kind " + std::string(to_string(op->kind)) +
                            " has no " + std::string(to_string(*request.kind)) +
                            " entry point");
      continue;
    }
    if (op->signature.params.size() != request.args.size()) {
      near_misses.push_back(label + ": expects " +
                            std::to_string(op->signature.params.size()) +
                            " arguments");
      continue;
    }
    Match m{op, {}, {0, 0, meta.priority, meta.registration_seq}};
    bool ok = true;
    for (std::size_t i = 0; i < request.args.size() && ok; ++i) {
      std::string why;
      auto f = fit(ctx, op->signature.params[i], request.args[i], why);
      if (!f) {
        near_misses.push_back(label + ": argument " + std::to_string(i + 1) +
                              ": " + why);
        ok = false;
        break;
      }
      m.args.push_back(std::move(f->value));
      m.score.conversions += f->conversions;
      m.score.distance += f->distance;
    }
    if (ok)
      fits.push_back(std::move(m));
  }
  if (fits.empty()) {
    std::string msg = "no op matches " + request.name + describe_args(request.args);
    for (const auto &n : near_misses)
      msg += "\n  near miss: " + n;
    throw NoMatchError(msg);
  }
  std::sort(fits.begin(), fits.end(),
            [](const Match &a, const Match &b) { return a.score.better_than(b.score); });
  if (request.strict && fits.size() > 1 && fits[0].score.ties_with(fits[1].score)) {
    std::string msg = "ambiguous match for " + request.name + describe_args(request.args);
    for (const auto &m : fits)
      if (m.score.ties_with(fits[0].score))
        msg += "\n  tied: " + m.op->id + " " + m.op->signature.text();
    throw AmbiguousMatchError(msg);
  }
  return std::move(fits.front());
}

Value execute(Context &ctx, const Match &m, std::optional<OpKind> entry,
              std::optional<Value> output) {
  const OpCandidate &op = *m.op;
  OpKind use = entry.value_or(op.kind);
  if (use != OpKind::Function && use != OpKind::Computer && use != OpKind::Inplace) {
    if (has_calculate(use))
      use = OpKind::Function;
    else
      use = OpKind::Computer;
  } else if (!provides(op.kind, use)) {
    throw OpError("op '" + op.id + "' has no " + std::string(to_string(use)) +
                  " entry point");
  }
  if (!entry && output && has_compute(op.kind))
    use = OpKind::Computer;

  Args args(m.args);
  const bool checked = ctx.checked_mode();
  std::vector<std::pair<const NDImage *, std::uint64_t>> before;
  const NDImage *designated = nullptr;
  if (use == OpKind::Inplace)
    designated = as_image(m.args[op.body.mutable_index]).get();
  if (checked)
    for (const auto *img : images_in(args))
      if (img != designated)
        before.emplace_back(img, content_hash(*img));

  Value result;
  switch (use) {
  case OpKind::Function:
    result = op.body.calculate(ctx, args);
    break;
  case OpKind::Computer: {
    Value out = output ? *output : op.body.allocate(ctx, args);
    if (auto out_img = as_image(out))
      for (const auto *img : images_in(args))
        if (img == out_img.get())
          throw ContractError("op '" + op.id +
                              "': computer output aliases an input");
    op.body.compute(ctx, args, out);
    result = std::move(out);
    break;
  }
  default:
    op.body.mutate(ctx, args);
    result = m.args[op.body.mutable_index];
    break;
  }

  if (checked)
    for (const auto &[img, hash] : before)
      if (content_hash(*img) != hash)
        throw ContractError("op '" + op.id + "' (" +
                            std::string(to_string(op.kind)) +
                            ") modified an input it must not mutate");
  return result;
}

Value run(Context &ctx, const OpRequest &request) {
  auto m = match(ctx, request);
  return execute(ctx, m, request.kind, request.output);
}

Value run(Context &ctx, std::string name, std::vector<Value> args) {
  OpRequest req;
  req.name = std::move(name);
  req.args = std::move(args);
  return run(ctx, req);
}

OpPtr find_op(const Context &ctx, std::string_view id) {
  auto meta = ctx.find_plugin(id);
  if (!meta || meta->kind != PluginKind::Op)
    return nullptr;
  return std::any_cast<OpPtr>(meta->provider);
}

std::vector<std::pair<OpPtr, PluginMetadata>> list_ops(const Context &ctx) {
  std::vector<std::pair<OpPtr, PluginMetadata>> out;
  for (auto &meta : ctx.resolve_plugins(PluginKind::Op))
    if (const auto *p = std::any_cast<OpPtr>(&meta.provider); p && *p)
      out.emplace_back(*p, meta);
  std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    if (a.first->signature.name != b.first->signature.name)
      return a.first->signature.name < b.first->signature.name;
    return a.second.registration_seq < b.second.registration_seq;
  });
  return out;
}

std::vector<std::string> list_lines(const Context &ctx) {
  std::vector<std::string> lines;
  for (const auto &[op, meta] : list_ops(ctx))
    lines.push_back(op->signature.name + "\t" + std::string(to_string(op->kind)) +
                    "\t" + std::to_string(op->arity) + "\t" +
                    op->signature.text() + "\t" + std::to_string(meta.priority));
  return lines;
}

} // namespace ndforge::ops
