#pragma once

#include "ndforge/container.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ndforge {

/// Context with every built-in converter, op, format, translator, module
/// plugin, transport and console argument registered.
std::unique_ptr<Context> create_default_context();

} // namespace ndforge

namespace ndforge::cli {

enum ExitCode : int { Success = 0, RuntimeError = 1, Usage = 2, UpdateConflicts = 3 };

struct Streams {
  std::ostream &out;
  std::ostream &err;
};

struct Action {
  std::string name;
  std::function<int(Context &, Streams &)> run;
};

/// Provider of PluginKind::ConsoleArgument plugins. `consume` returns how many
/// leading arguments it took (at least one).
struct ConsoleArgument {
  std::function<bool(std::span<const std::string> args)> matches;
  std::function<std::size_t(Context &, std::span<const std::string> args,
                            std::vector<Action> &actions)>
      consume;
};

void register_console_argument(Context &ctx, std::string id, std::int32_t priority,
                               ConsoleArgument argument);

/// Offers the remaining arguments to console-argument plugins in priority
/// order until all are consumed. Throws UsageError on an unclaimed argument.
std::vector<Action> parse_args(Context &ctx, std::span<const std::string> args);

std::string usage_text();
std::size_t levenshtein(std::string_view a, std::string_view b);
/// Closest subcommand within edit distance 2, or empty.
std::string suggest_subcommand(std::string_view word);

int cmd_run(Context &ctx, const std::string &target, std::span<const std::string> pairs,
            Streams &io);

struct UpdateOptions {
  std::filesystem::path root = ".";
  std::vector<std::filesystem::path> sites;
  bool apply = false;
  bool overwrite_modified = false;
};
int cmd_update(Context &ctx, const UpdateOptions &options, Streams &io);

struct BenchOptions {
  std::int64_t width = 4096;
  std::int64_t height = 4096;
  int rounds = 20;
  std::optional<std::filesystem::path> csv;
  unsigned threads = 0; // 0: hardware concurrency
  std::uint64_t seed = 1;
};

struct BenchResult {
  std::vector<std::string> variants;    // raw, generic, planar, array-inplace, array-mt
  std::vector<std::vector<double>> millis; // [variant][round]
  bool outputs_identical = false;

  double median(std::size_t variant) const;
  /// Generic median divided by the variant's median.
  double fold_vs_generic(std::size_t variant) const;
  std::size_t index(std::string_view variant) const;
};

/// Runs the equivalence precheck and then the timed rounds. Throws OpError if
/// the variants disagree.
BenchResult run_bench(const BenchOptions &options);
int cmd_bench(Context &ctx, const BenchOptions &options, Streams &io);

/// `raw_tokens` non-empty selects raw import (dims=WxH type=... offset=...).
int cmd_info(Context &ctx, const std::string &location,
             std::span<const std::string> raw_tokens, Streams &io);

void register_builtin_console_arguments(Context &ctx);

/// Full entry point: builds a default context, loads preferences from
/// NDFORGE_PREFS (or ~/.ndforge/prefs), parses, runs and saves preferences.
int main_entry(std::span<const std::string> args, Streams &io);
/// Same, on a caller-supplied context.
int main_entry(Context &ctx, std::span<const std::string> args, Streams &io);

std::filesystem::path preferences_path();

} // namespace ndforge::cli
