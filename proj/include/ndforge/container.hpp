#pragma once

#include <any>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace ndforge {

class Dataset;
class Context;

enum class PluginKind {
  Service,
  Op,
  Converter,
  Format,
  IO,
  Preprocessor,
  Postprocessor,
  ConsoleArgument,
  Uploader,
  Display,
  Translator,
  Command,
};

std::string_view to_string(PluginKind kind);
std::optional<PluginKind> parse_plugin_kind(std::string_view text);

/// Registration record for one plugin. `provider` is the factory or the
/// implementation object itself; its concrete type depends on `kind`.
struct PluginMetadata {
  std::string id;
  PluginKind kind = PluginKind::Service;
  std::string name;
  std::int32_t priority = 0;
  std::any provider;
  std::uint64_t registration_seq = 0; // assigned by the context
};

/// Factory stored as the provider of a PluginKind::Service plugin.
using ServiceFactory = std::function<std::shared_ptr<void>(Context &)>;

struct Event {
  std::vector<std::string> type_path; // most general first
  std::any payload;
  std::uint64_t timestamp_ns = 0;
};

/// Builds an event stamped with the monotonic clock.
Event make_event(std::vector<std::string> type_path, std::any payload = {});

enum class LogLevel { Debug, Info, Warn, Error };

/// Isolated application container: plugin index, lazily created services,
/// event bus, preferences and the active dataset. Contexts share nothing.
class Context {
public:
  using EventHandler = std::function<void(const Event &)>;
  using LogSink = std::function<void(LogLevel, std::string_view)>;
  using OutputSink = std::function<void(std::string_view)>;

  /// Throws DuplicateIdError naming both entries if two plugins share an id.
  explicit Context(std::vector<PluginMetadata> plugins = {});
  ~Context();

  Context(const Context &) = delete;
  Context &operator=(const Context &) = delete;

  void register_plugin(PluginMetadata meta);

  /// Snapshot ordered by priority descending, then registration order.
  std::vector<PluginMetadata> resolve_plugins(PluginKind kind) const;
  std::optional<PluginMetadata> find_plugin(std::string_view id) const;
  std::size_t plugin_count() const;

  /// Context-scoped singleton for `service_kind`, instantiated on first use
  /// from the highest-priority service plugin whose name matches.
  std::shared_ptr<void> get_service(const std::string &service_kind);

  template <class T> std::shared_ptr<T> service(const std::string &kind) {
    return std::static_pointer_cast<T>(get_service(kind));
  }

  std::uint64_t subscribe(std::string type, EventHandler handler);
  void unsubscribe(std::uint64_t subscription);
  /// Synchronous delivery to every subscriber whose type occurs in the
  /// event's type path. Handler exceptions are logged and swallowed.
  std::size_t publish(const Event &event);

  std::shared_ptr<Dataset> active_dataset() const;
  void set_active_dataset(std::shared_ptr<Dataset> dataset);

  std::optional<std::string> preference(const std::string &key) const;
  void set_preference(const std::string &key, std::string value);
  std::map<std::string, std::string> preferences() const;
  void load_preferences(const std::filesystem::path &file);
  /// Write-temp-then-rename.
  void save_preferences(const std::filesystem::path &file) const;

  void set_log_sink(LogSink sink);
  void log(LogLevel level, std::string_view message) const;

  void set_output_sink(OutputSink sink);
  void write_output(std::string_view line) const;

  bool checked_mode() const { return checked_mode_.load(); }
  void set_checked_mode(bool on) { checked_mode_.store(on); }

private:
  struct Subscription {
    std::uint64_t id;
    std::string type;
    std::shared_ptr<EventHandler> handler;
  };

  void insert_locked(PluginMetadata meta);

  mutable std::shared_mutex registry_mutex_;
  std::map<PluginKind, std::vector<PluginMetadata>> index_;
  std::map<std::string, PluginKind, std::less<>> ids_;
  std::uint64_t next_seq_ = 1;

  std::recursive_mutex service_mutex_;
  std::map<std::string, std::shared_ptr<void>> services_;

  mutable std::mutex event_mutex_;
  std::vector<Subscription> subscriptions_;
  std::uint64_t next_subscription_ = 1;

  mutable std::mutex state_mutex_;
  std::shared_ptr<Dataset> active_dataset_;
  std::map<std::string, std::string> preferences_;
  LogSink log_sink_;
  OutputSink output_sink_;

  std::atomic<bool> checked_mode_{false};
};

/// Reads `kind<TAB>id<TAB>name<TAB>priority` lines; `#` lines are comments.
/// The returned metadata carries no provider.
std::vector<PluginMetadata> read_plugin_manifest(std::string_view text);

} // namespace ndforge
