#pragma once

#include "ndforge/container.hpp"
#include "ndforge/value.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ndforge::ops {

/// Special-op kinds and the entry points each exposes:
///   computer   compute(in..., out)
///   function   calculate(in...) -> out
///   inplace    mutate(arg)
///   hybrids    the union of their parts
enum class OpKind { Computer, Function, Inplace, HybridCF, HybridCI, HybridCFI };

std::string_view to_string(OpKind kind);
bool has_compute(OpKind kind);
bool has_calculate(OpKind kind);
bool has_mutate(OpKind kind);

/// Declared parameter type. Image parameters may pin a backing; `constraint`
/// adds value-level acceptance (e.g. byte-aligned pixel types only).
struct ParamType {
  SemanticType type = SemanticType::None;
  std::optional<Backing> backing;
  std::function<bool(const Value &)> constraint;
  std::string constraint_label;

  static ParamType of(SemanticType t) { return ParamType{t, std::nullopt, {}, {}}; }
  static ParamType image(std::optional<Backing> backing = std::nullopt) {
    return ParamType{SemanticType::Image, backing, {}, {}};
  }
  std::string text() const;
};

struct OpSignature {
  std::string name;
  std::vector<ParamType> params;
  SemanticType output = SemanticType::None; // None renders as "any"

  std::string text() const;
};

/// True when `name` is a dotted lower-camel namespace path like "math.add".
bool valid_op_name(std::string_view name);

using Args = std::span<const Value>;

struct OpBody {
  std::function<Value(Context &, Args)> calculate;
  std::function<void(Context &, Args, const Value &out)> compute;
  /// Mutates args[mutable_index] in place.
  std::function<void(Context &, Args)> mutate;
  /// Output allocation for engine-driven compute calls.
  std::function<Value(Context &, Args)> allocate;
  std::size_t mutable_index = 0;
  /// Optional fast path for scalar ops: kernel(arg0, arg1-or-0).
  std::function<double(double, double)> scalar_kernel;
};

struct OpCandidate {
  std::string id;
  OpSignature signature;
  OpKind kind = OpKind::Function;
  int arity = 0; // primary inputs; remaining params are secondary
  std::int32_t priority = 0;
  OpBody body;
};

using OpPtr = std::shared_ptr<const OpCandidate>;

/// Validates name, arity and that `body` provides the entry points of `kind`.
void register_op(Context &ctx, OpCandidate op);

struct OpRequest {
  std::string name;
  std::vector<Value> args;
  /// Required entry point family; unset accepts any kind.
  std::optional<OpKind> kind;
  /// Supplied output for compute calls.
  std::optional<Value> output;
  /// Ties on (conversions, distance, priority) raise AmbiguousMatchError
  /// instead of falling back to registration order.
  bool strict = false;
};

struct MatchScore {
  unsigned conversions = 0;
  unsigned distance = 0;
  std::int32_t priority = 0;
  std::uint64_t registration_seq = 0;

  /// Lexicographic (conversions, distance, -priority, registration_seq).
  bool better_than(const MatchScore &o) const;
  bool ties_with(const MatchScore &o) const;
};

struct Match {
  OpPtr op;
  std::vector<Value> args; // converted to the declared parameter types
  MatchScore score;
};

/// Selects the best candidate. Throws NoMatchError (listing near misses) or,
/// for strict requests, AmbiguousMatchError.
Match match(const Context &ctx, const OpRequest &request);

/// Runs a matched op through the entry point implied by `entry` (or the
/// kind's default: calculate, else compute into an allocated output, else
/// mutate). In checked mode verifies the kind's purity contract.
Value execute(Context &ctx, const Match &m, std::optional<OpKind> entry = std::nullopt,
              std::optional<Value> output = std::nullopt);

Value run(Context &ctx, const OpRequest &request);
Value run(Context &ctx, std::string name, std::vector<Value> args);

OpPtr find_op(const Context &ctx, std::string_view id);

/// Every registered op, sorted by name then registration order.
std::vector<std::pair<OpPtr, PluginMetadata>> list_ops(const Context &ctx);
/// `name<TAB>kind<TAB>arity<TAB>signature<TAB>priority` per op.
std::vector<std::string> list_lines(const Context &ctx);

// Built-in op implementations callable directly.

/// Separable Gaussian over spatial axes (X, Y, Z): radius ceil(3 sigma),
/// mirror boundary, float64 accumulation, output has the input's type.
ImagePtr gauss(const NDImage &img, std::span<const double> sigmas);
ImagePtr gauss(const NDImage &img, double sigma);
/// Normalized kernel weights w(-r..r).
std::vector<double> gauss_kernel(double sigma);

double sum(const NDImage &img, const Region *region = nullptr);
double size(const NDImage &img, const Region *region = nullptr);
/// Composed: math.div(stats.sum, stats.size) through the matcher.
double mean(Context &ctx, const ImagePtr &img, const Region *region = nullptr);

struct MapOptions {
  unsigned threads = 1;
  std::optional<Region> region;
};

/// Applies the scalar op `op_name(sample, extra...)` element-wise. With a
/// region, samples outside it are copied through unchanged.
ImagePtr map(Context &ctx, const ImagePtr &img, const std::string &op_name,
             std::vector<Value> extra = {}, const MapOptions &options = {});

/// Variants of math.add(image, constant) used by the benchmark.
namespace add_variants {
/// Per-sample accessor loop into `out`.
void generic(const NDImage &in, double c, NDImage &out);
/// Typed loop over each plane of a PLANAR image into `out`.
void planar(const NDImage &in, double c, NDImage &out);
/// In place over an ARRAY image's buffer.
void array_inplace(NDImage &img, double c);
void array_inplace_mt(NDImage &img, double c, unsigned threads);
} // namespace add_variants

void register_builtin_ops(Context &ctx);

} // namespace ndforge::ops
