#include "ndforge/cli.hpp"

#include "ndforge/convert.hpp"
#include "ndforge/error.hpp"
#include "ndforge/eval.hpp"
#include "ndforge/io.hpp"
#include "ndforge/modules.hpp"
#include "ndforge/ndimage.hpp"
#include "ndforge/ops.hpp"
#include "ndforge/updater.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <new>
#include <random>
#include <sstream>
#include <thread>

namespace ndforge {

std::unique_ptr<Context> create_default_context() {
  auto ctx = std::make_unique<Context>();
  register_builtin_converters(*ctx);
  ops::register_builtin_ops(*ctx);
  ops::register_eval_op(*ctx);
  io::register_builtin_io(*ctx);
  modules::register_builtin_module_plugins(*ctx);
  updater::register_builtin_updater(*ctx);
  cli::register_builtin_console_arguments(*ctx);
  return ctx;
}

} // namespace ndforge

namespace ndforge::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSubcommands = {"run", "update", "bench", "info", "ops",
                                               "formats", "help"};

std::string read_text(const fs::path &file) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<std::int64_t, std::int64_t> parse_size(const std::string &text) {
  const auto x = text.find('x');
  std::int64_t w = 0, h = 0;
  if (x != std::string::npos) {
    auto r1 = std::from_chars(text.data(), text.data() + x, w);
    auto r2 = std::from_chars(text.data() + x + 1, text.data() + text.size(), h);
    if (r1.ec == std::errc{} && r1.ptr == text.data() + x && r2.ec == std::errc{} &&
        r2.ptr == text.data() + text.size() && w > 0 && h > 0)
      return {w, h};
  }
  throw UsageError("--size expects WxH, got '" + text + "'");
}

/// Takes the value following a flag.
const std::string &flag_value(std::span<const std::string> args, std::size_t &i) {
  if (i + 1 >= args.size())
    throw UsageError(args[i] + " expects a value");
  return args[++i];
}

std::vector<std::byte> image_bytes(const NDImage &img) {
  std::vector<std::byte> out;
  if (img.backing() == Backing::Array) {
    auto b = img.array_bytes();
    out.assign(b.begin(), b.end());
  } else {
    for (std::size_t p = 0; p < img.plane_count(); ++p) {
      auto b = img.plane_bytes(p);
      out.insert(out.end(), b.begin(), b.end());
    }
  }
  return out;
}

void copy_into(const NDImage &src, NDImage &dst) {
  auto s = src.array_bytes();
  auto d = dst.array_bytes();
  std::memcpy(d.data(), s.data(), s.size());
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

} // namespace

// ---- argument parsing ------------------------------------------------------

void register_console_argument(Context &ctx, std::string id, std::int32_t priority,
                               ConsoleArgument argument) {
  PluginMetadata meta;
  meta.id = std::move(id);
  meta.kind = PluginKind::ConsoleArgument;
  meta.name = meta.id;
  meta.priority = priority;
  meta.provider = std::move(argument);
  ctx.register_plugin(std::move(meta));
}

std::vector<Action> parse_args(Context &ctx, std::span<const std::string> args) {
  if (args.empty())
    throw UsageError("no command given");
  const auto plugins = ctx.resolve_plugins(PluginKind::ConsoleArgument);
  std::vector<Action> actions;
  std::size_t i = 0;
  while (i < args.size()) {
    const auto rest = args.subspan(i);
    bool taken = false;
    for (const auto &meta : plugins) {
      const auto *arg = std::any_cast<ConsoleArgument>(&meta.provider);
      if (!arg || !arg->matches(rest))
        continue;
      const std::size_t n = arg->consume(ctx, rest, actions);
      if (n == 0 || n > rest.size())
        throw UsageError("console argument '" + meta.id + "' consumed " + std::to_string(n) +
                         " arguments");
      i += n;
      taken = true;
      break;
    }
    if (!taken) {
      std::string msg = "unknown argument '" + args[i] + "'";
      if (auto s = suggest_subcommand(args[i]); !s.empty())
        msg += "; did you mean '" + s + "'?";
      throw UsageError(msg);
    }
  }
  return actions;
}

std::string usage_text() {
  return "usage: ndforge [--checked] <command> [args]\n"
         "  run <script.sjm|command> [key=value ...]\n"
         "  update --root DIR --site DIR [--site DIR ...] [--apply] [--overwrite-modified]\n"
         "  bench [--size WxH] [--rounds N] [--csv PATH] [--threads N]\n"
         "  info <file> [--raw dims=WxH type=T [offset=N]]\n"
         "  ops list\n"
         "  formats list\n";
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j)
    row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string suggest_subcommand(std::string_view word) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto &c : kSubcommands) {
    const auto d = levenshtein(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

void register_builtin_console_arguments(Context &ctx) {
  auto head_is = [](std::string word) {
    return [word](std::span<const std::string> a) { return !a.empty() && a[0] == word; };
  };

  register_console_argument(
      ctx, "console.checked", 100,
      {head_is("--checked"), [](Context &c, std::span<const std::string>, std::vector<Action> &) {
         c.set_checked_mode(true);
         return std::size_t{1};
       }});

  register_console_argument(
      ctx, "console.help", 50,
      {[](std::span<const std::string> a) {
         return !a.empty() && (a[0] == "help" || a[0] == "--help" || a[0] == "-h");
       },
       [](Context &, std::span<const std::string>, std::vector<Action> &out) {
         out.push_back({"help", [](Context &, Streams &io) {
                          io.out << usage_text();
                          return int(Success);
                        }});
         return std::size_t{1};
       }});

  register_console_argument(
      ctx, "console.run", 0,
      {head_is("run"), [](Context &, std::span<const std::string> a, std::vector<Action> &out) {
         if (a.size() < 2)
           throw UsageError("run expects a script or command name");
         std::string target = a[1];
         std::vector<std::string> pairs(a.begin() + 2, a.end());
         for (const auto &p : pairs)
           if (p.find('=') == std::string::npos)
             throw UsageError("run expects key=value arguments, got '" + p + "'");
         out.push_back({"run", [target, pairs](Context &c, Streams &io) {
                          return cmd_run(c, target, pairs, io);
                        }});
         return a.size();
       }});

  register_console_argument(
      ctx, "console.update", 0,
      {head_is("update"), [](Context &, std::span<const std::string> a, std::vector<Action> &out) {
         UpdateOptions opt;
         for (std::size_t i = 1; i < a.size(); ++i) {
           if (a[i] == "--root")
             opt.root = flag_value(a, i);
           else if (a[i] == "--site")
             opt.sites.emplace_back(flag_value(a, i));
           else if (a[i] == "--apply")
             opt.apply = true;
           else if (a[i] == "--overwrite-modified")
             opt.overwrite_modified = true;
           else
             throw UsageError("update: unknown option '" + a[i] + "'");
         }
         if (opt.sites.empty())
           throw UsageError("update needs at least one --site");
         out.push_back(
             {"update", [opt](Context &c, Streams &io) { return cmd_update(c, opt, io); }});
         return a.size();
       }});

  register_console_argument(
      ctx, "console.bench", 0,
      {head_is("bench"), [](Context &, std::span<const std::string> a, std::vector<Action> &out) {
         BenchOptions opt;
         for (std::size_t i = 1; i < a.size(); ++i) {
           if (a[i] == "--size") {
             std::tie(opt.width, opt.height) = parse_size(flag_value(a, i));
           } else if (a[i] == "--rounds") {
             const auto n = parse_int64(flag_value(a, i));
             if (!n || *n < 1 || *n > 100000)
               throw UsageError("--rounds expects a positive integer");
             opt.rounds = static_cast<int>(*n);
           } else if (a[i] == "--threads") {
             const auto n = parse_int64(flag_value(a, i));
             if (!n || *n < 1 || *n > 1024)
               throw UsageError("--threads expects a positive integer");
             opt.threads = static_cast<unsigned>(*n);
           } else if (a[i] == "--csv") {
             opt.csv = flag_value(a, i);
           } else {
             throw UsageError("bench: unknown option '" + a[i] + "'");
           }
         }
         out.push_back(
             {"bench", [opt](Context &c, Streams &io) { return cmd_bench(c, opt, io); }});
         return a.size();
       }});

  register_console_argument(
      ctx, "console.info", 0,
      {head_is("info"), [](Context &, std::span<const std::string> a, std::vector<Action> &out) {
         std::string location;
         std::vector<std::string> raw;
         bool in_raw = false;
         for (std::size_t i = 1; i < a.size(); ++i) {
           if (a[i] == "--raw")
             in_raw = true;
           else if (in_raw && a[i].find('=') != std::string::npos)
             raw.push_back(a[i]);
           else if (location.empty())
             location = a[i];
           else
             throw UsageError("info: unexpected argument '" + a[i] + "'");
         }
         if (location.empty())
           throw UsageError("info expects a file");
         if (in_raw && raw.empty())
           throw UsageError("--raw expects dims=WxH and type=T");
         out.push_back({"info", [location, raw](Context &c, Streams &io) {
                          return cmd_info(c, location, raw, io);
                        }});
         return a.size();
       }});

  auto lister = [](std::string word, std::function<void(Context &, Streams &)> body) {
    return ConsoleArgument{
        [word](std::span<const std::string> a) { return !a.empty() && a[0] == word; },
        [word, body](Context &, std::span<const std::string> a, std::vector<Action> &out) {
          if (a.size() < 2 || a[1] != "list")
            throw UsageError(word + " expects 'list'");
          out.push_back({word + " list", [body](Context &c, Streams &io) {
                           body(c, io);
                           return int(Success);
                         }});
          return std::size_t{2};
        }};
  };
  register_console_argument(ctx, "console.ops", 0, lister("ops", [](Context &c, Streams &io) {
                              for (const auto &line : ops::list_lines(c))
                                io.out << line << '\n';
                            }));
  register_console_argument(
      ctx, "console.formats", 0, lister("formats", [](Context &c, Streams &io) {
        for (const auto &f : io::list_formats(c)) {
          const auto caps = f->caps();
          io.out << f->id() << '\t';
          const auto suffixes = f->suffixes();
          for (std::size_t i = 0; i < suffixes.size(); ++i)
            io.out << (i ? "," : "") << suffixes[i];
          io.out << '\t' << (caps.read ? "r" : "-") << (caps.write ? "w" : "-")
                 << (caps.block_read ? "b" : "-") << '\n';
        }
      }));
}

// ---- run -------------------------------------------------------------------

int cmd_run(Context &ctx, const std::string &target, std::span<const std::string> pairs,
            Streams &io) {
  try {
    modules::ModuleSpec local;
    const modules::ModuleSpec *spec = nullptr;
    std::shared_ptr<const modules::ModuleSpec> command;
    const fs::path path(target);
    if (path.extension() == ".sjm" || fs::is_regular_file(path)) {
      local = modules::parse_param_headers(read_text(path), path.stem().string());
      spec = &local;
    } else if ((command = modules::find_command(ctx, target))) {
      spec = command.get();
    } else {
      io.err << "error: no script or command named '" << target << "'\n";
      return RuntimeError;
    }
    const ValueMap inputs = modules::harvest_from_pairs(ctx, *spec, pairs);
    modules::run_module(ctx, *spec, inputs);
    return Success;
  } catch (const HarvestError &e) {
    io.err << "error: parameter '" << e.param() << "': " << e.what() << '\n';
  } catch (const std::exception &e) {
    io.err << "error: " << e.what() << '\n';
  }
  return RuntimeError;
}

// ---- update ----------------------------------------------------------------

int cmd_update(Context &ctx, const UpdateOptions &options, Streams &io) {
  std::vector<updater::SiteManifest> sites;
  std::map<std::string, fs::path> dirs;
  for (const auto &dir : options.sites) {
    try {
      sites.push_back(updater::load_manifest_file(dir / updater::kManifestName));
    } catch (const std::exception &e) {
      io.err << "error: unreadable site manifest: " << e.what() << '\n';
      return RuntimeError;
    }
    if (!dirs.emplace(sites.back().site_name, dir).second) {
      io.err << "error: site name '" << sites.back().site_name << "' used twice\n";
      return RuntimeError;
    }
  }

  const auto states = updater::classify(options.root, sites);
  const auto plan = updater::plan(states, sites, {options.overwrite_modified});

  if (!options.apply) {
    for (const auto &s : states)
      if (s.state != updater::FileState::UpToDate)
        io.out << updater::to_string(s.state) << '\t' << s.path << '\t'
               << s.owning_site.value_or("-") << '\n';
    return plan.conflicts.empty() ? Success : UpdateConflicts;
  }

  auto transport = updater::make_transport(ctx, "local", dirs);
  const auto report = updater::apply(plan, *transport, options.root);
  if (report.installed)
    io.out << "installed " << report.installed << '\n';
  if (report.upgraded)
    io.out << "upgraded " << report.upgraded << '\n';
  if (report.deleted)
    io.out << "deleted " << report.deleted << '\n';
  for (const auto &[path, why] : report.failed)
    io.err << "failed\t" << path << '\t' << why << '\n';
  for (const auto &[path, why] : plan.conflicts)
    io.err << "conflict\t" << path << '\t' << why << '\n';
  if (!report.failed.empty())
    return RuntimeError;
  return plan.conflicts.empty() ? Success : UpdateConflicts;
}

// ---- bench -----------------------------------------------------------------

double BenchResult::median(std::size_t variant) const {
  auto v = millis.at(variant);
  std::sort(v.begin(), v.end());
  if (v.empty())
    return 0.0;
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double BenchResult::fold_vs_generic(std::size_t variant) const {
  const double m = median(variant);
  return m > 0 ? median(index("generic")) / m : 0.0;
}

std::size_t BenchResult::index(std::string_view variant) const {
  for (std::size_t i = 0; i < variants.size(); ++i)
    if (variants[i] == variant)
      return i;
  throw Error("no bench variant '" + std::string(variant) + "'");
}

BenchResult run_bench(const BenchOptions &options) {
  constexpr double kConstant = 7.0;
  const unsigned threads =
      options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  const PixelType u8(PixelTypeCode::UInt8);
  const auto axes = make_axes({options.width, options.height});

  auto input = NDImage::create(u8, axes);
  auto generic_out = input->create_like();
  auto planar_in = NDImage::create(u8, axes, Backing::Planar);
  auto planar_out = planar_in->create_like();
  auto work = NDImage::create(u8, axes);
  std::vector<std::uint8_t> raw_in(input->size()), raw_out(input->size());

  std::mt19937_64 rng(options.seed);
  auto fill = [&] {
    auto bytes = input->array_bytes();
    for (std::size_t i = 0; i < bytes.size(); i += 8) {
      const std::uint64_t r = rng();
      std::memcpy(bytes.data() + i, &r, std::min<std::size_t>(8, bytes.size() - i));
    }
    std::memcpy(raw_in.data(), bytes.data(), bytes.size());
    auto plane = planar_in->plane_bytes(0);
    std::memcpy(plane.data(), bytes.data(), bytes.size());
  };

  using Variant = std::function<void()>;
  const std::vector<std::pair<std::string, Variant>> variants = {
      {"raw",
       [&] {
         const int c = static_cast<int>(kConstant);
         for (std::size_t i = 0; i < raw_in.size(); ++i)
           raw_out[i] = static_cast<std::uint8_t>(std::min(255, raw_in[i] + c));
       }},
      {"generic", [&] { ops::add_variants::generic(*input, kConstant, *generic_out); }},
      {"planar", [&] { ops::add_variants::planar(*planar_in, kConstant, *planar_out); }},
      {"array-inplace", [&] { ops::add_variants::array_inplace(*work, kConstant); }},
      {"array-mt", [&] { ops::add_variants::array_inplace_mt(*work, kConstant, threads); }},
  };
  auto prepare = [&](const std::string &name) {
    if (name == "array-inplace" || name == "array-mt")
      copy_into(*input, *work);
  };
  auto result_bytes = [&](const std::string &name) -> std::vector<std::byte> {
    if (name == "raw") {
      std::vector<std::byte> b(raw_out.size());
      std::memcpy(b.data(), raw_out.data(), raw_out.size());
      return b;
    }
    if (name == "generic")
      return image_bytes(*generic_out);
    if (name == "planar")
      return image_bytes(*planar_out);
    return image_bytes(*work);
  };

  BenchResult result;
  for (const auto &v : variants)
    result.variants.push_back(v.first);
  result.millis.assign(variants.size(), {});

  fill();
  std::vector<std::byte> reference;
  result.outputs_identical = true;
  for (const auto &[name, fn] : variants) {
    prepare(name);
    fn();
    auto bytes = result_bytes(name);
    if (reference.empty())
      reference = std::move(bytes);
    else if (bytes != reference)
      result.outputs_identical = false;
  }
  if (!result.outputs_identical)
    throw OpError("bench precheck: math.add variants disagree");

  for (int round = 0; round < options.rounds; ++round) {
    fill();
    for (std::size_t k = 0; k < variants.size(); ++k) {
      prepare(variants[k].first);
      const auto t0 = std::chrono::steady_clock::now();
      variants[k].second();
      result.millis[k].push_back(elapsed_ms(t0));
    }
  }
  return result;
}

int cmd_bench(Context &, const BenchOptions &options, Streams &io) {
  BenchResult r;
  try {
    r = run_bench(options);
  } catch (const std::bad_alloc &) {
    io.err << "error: cannot allocate " << options.width << 'x' << options.height
           << " images; try a smaller --size\n";
    return RuntimeError;
  } catch (const ImageError &e) {
    io.err << "error: " << e.what() << "; try a smaller --size\n";
    return RuntimeError;
  } catch (const std::exception &e) {
    io.err << "error: " << e.what() << '\n';
    return RuntimeError;
  }

  std::ofstream file;
  if (options.csv) {
    file.open(*options.csv, std::ios::trunc);
    if (!file) {
      io.err << "error: cannot write " << options.csv->string() << '\n';
      return RuntimeError;
    }
  }
  std::ostream &csv = options.csv ? static_cast<std::ostream &>(file) : io.out;
  csv << "variant,round,millis\n";
  for (std::size_t k = 0; k < r.variants.size(); ++k)
    for (std::size_t round = 0; round < r.millis[k].size(); ++round)
      csv << r.variants[k] << ',' << round << ',' << std::fixed << std::setprecision(3)
          << r.millis[k][round] << '\n';
  csv.flush();

  std::ostream &summary = options.csv ? io.out : io.err;
  summary << "# precheck: all variants identical\n";
  for (std::size_t k = 0; k < r.variants.size(); ++k)
    summary << "# " << r.variants[k] << " median_ms=" << std::fixed << std::setprecision(3)
            << r.median(k) << " fold_vs_generic=" << std::setprecision(2)
            << r.fold_vs_generic(k) << '\n';
  return Success;
}

// ---- info ------------------------------------------------------------------

int cmd_info(Context &ctx, const std::string &location, std::span<const std::string> raw_tokens,
             Streams &io) {
  try {
    const Location loc = Location::file(location);
    if (!fs::exists(loc.path))
      throw IoError("no such file: " + location);
    std::string format_id;
    io::ImageMetadata meta;
    if (!raw_tokens.empty()) {
      const auto params = io::parse_raw_params(raw_tokens);
      const auto ds = io::read_raw(ctx, loc, params);
      meta = io::metadata_of(*ds);
      format_id = "raw";
    } else {
      const auto format = io::detect_format(ctx, loc);
      auto handle = io::resolve_handle(ctx, loc);
      meta = format->read_metadata(*handle);
      format_id = format->id();
    }
    std::string dims, axes;
    for (std::size_t i = 0; i < meta.axes.size(); ++i) {
      dims += (i ? "x" : "") + std::to_string(meta.axes[i].length);
      axes += (i ? "," : "") + meta.axes[i].label.name();
    }
    io.out << "format=" << format_id << " dims=" << dims << " type=" << meta.type.name()
           << '\n';
    io.out << "axes=" << axes << '\n';
    for (const auto &[k, v] : meta.pairs)
      io.out << k << '=' << v << '\n';
    return Success;
  } catch (const std::exception &e) {
    io.err << "error: " << e.what() << '\n';
    return RuntimeError;
  }
}

// ---- entry -----------------------------------------------------------------

fs::path preferences_path() {
  if (const char *env = std::getenv("NDFORGE_PREFS"); env && *env)
    return env;
  if (const char *home = std::getenv("HOME"); home && *home)
    return fs::path(home) / ".ndforge" / "prefs";
  return ".ndforge-prefs";
}

int main_entry(Context &ctx, std::span<const std::string> args, Streams &io) {
  ctx.set_output_sink([&io](std::string_view line) { io.out << line << '\n'; });
  ctx.set_log_sink([&io](LogLevel level, std::string_view msg) {
    if (level >= LogLevel::Warn)
      io.err << msg << '\n';
  });

  std::vector<Action> actions;
  try {
    actions = parse_args(ctx, args);
  } catch (const UsageError &e) {
    io.err << "error: " << e.what() << '\n' << usage_text();
    return Usage;
  } catch (const std::exception &e) {
    io.err << "error: " << e.what() << '\n';
    return RuntimeError;
  }
  if (actions.empty()) {
    io.err << usage_text();
    return Usage;
  }

  const fs::path prefs = preferences_path();
  try {
    if (fs::exists(prefs))
      ctx.load_preferences(prefs);
  } catch (const std::exception &e) {
    io.err << "warning: ignoring preferences " << prefs.string() << ": " << e.what() << '\n';
  }

  int code = Success;
  for (const auto &action : actions) {
    try {
      code = action.run(ctx, io);
    } catch (const UsageError &e) {
      io.err << "error: " << e.what() << '\n';
      code = Usage;
    } catch (const std::exception &e) {
      io.err << "error: " << e.what() << '\n';
      code = RuntimeError;
    }
    if (code != Success)
      break;
  }

  if (code == Success) {
    try {
      if (prefs.has_parent_path())
        fs::create_directories(prefs.parent_path());
      ctx.save_preferences(prefs);
    } catch (const std::exception &e) {
      io.err << "warning: cannot save preferences " << prefs.string() << ": " << e.what()
             << '\n';
    }
  }
  io.out.flush();
  return code;
}

int main_entry(std::span<const std::string> args, Streams &io) {
  auto ctx = create_default_context();
  return main_entry(*ctx, args, io);
}

} // namespace ndforge::cli
