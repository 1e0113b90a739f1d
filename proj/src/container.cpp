#include "ndforge/container.hpp"

#include "ndforge/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ndforge {

namespace {

constexpr std::array<std::pair<PluginKind, std::string_view>, 12> kKindNames{{
    {PluginKind::Service, "service"},
    {PluginKind::Op, "op"},
    {PluginKind::Converter, "converter"},
    {PluginKind::Format, "format"},
    {PluginKind::IO, "io"},
    {PluginKind::Preprocessor, "preprocessor"},
    {PluginKind::Postprocessor, "postprocessor"},
    {PluginKind::ConsoleArgument, "console-argument"},
    {PluginKind::Uploader, "uploader"},
    {PluginKind::Display, "display"},
    {PluginKind::Translator, "translator"},
    {PluginKind::Command, "command"},
}};

std::string describe(const PluginMetadata &m) {
  return std::string(to_string(m.kind)) + " '" + m.name + "'";
}

std::string escape_pref(std::string_view v) {
  std::string out;
  for (char c : v) {
    if (c == '\\')
      out += "\\\\";
    else if (c == '\n')
      out += "\\n";
    else
      out += c;
  }
  return out;
}

std::string unescape_pref(std::string_view v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '\\' && i + 1 < v.size()) {
      ++i;
      out += v[i] == 'n' ? '\n' : v[i];
    } else {
      out += v[i];
    }
  }
  return out;
}

} // namespace

std::string_view to_string(PluginKind kind) {
  for (const auto &[k, name] : kKindNames)
    if (k == kind)
      return name;
  return "unknown";
}

std::optional<PluginKind> parse_plugin_kind(std::string_view text) {
  for (const auto &[k, name] : kKindNames)
    if (name == text)
      return k;
  return std::nullopt;
}

Event make_event(std::vector<std::string> type_path, std::any payload) {
  auto now = std::chrono::steady_clock::now().time_since_epoch();
  return Event{std::move(type_path), std::move(payload),
               static_cast<std::uint64_t>(
                   std::chrono::duration_cast<std::chrono::nanoseconds>(now)
                       .count())};
}

Context::Context(std::vector<PluginMetadata> plugins) {
  std::map<std::string, const PluginMetadata *> seen;
  for (const auto &p : plugins) {
    auto [it, fresh] = seen.emplace(p.id, &p);
    if (!fresh)
      throw DuplicateIdError("duplicate plugin id '" + p.id + "': " +
                             describe(*it->second) + " and " + describe(p));
  }
  for (auto &p : plugins)
    insert_locked(std::move(p));
}

Context::~Context() = default;

void Context::insert_locked(PluginMetadata meta) {
  meta.registration_seq = next_seq_++;
  ids_.emplace(meta.id, meta.kind);
  index_[meta.kind].push_back(std::move(meta));
}

void Context::register_plugin(PluginMetadata meta) {
  std::unique_lock lock(registry_mutex_);
  if (auto it = ids_.find(meta.id); it != ids_.end())
    throw DuplicateIdError("duplicate plugin id '" + meta.id +
                           "': already registered as " +
                           std::string(to_string(it->second)));
  insert_locked(std::move(meta));
}

std::vector<PluginMetadata> Context::resolve_plugins(PluginKind kind) const {
  std::vector<PluginMetadata> out;
  {
    std::shared_lock lock(registry_mutex_);
    auto it = index_.find(kind);
    if (it == index_.end())
      return out;
    out = it->second;
  }
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    if (a.priority != b.priority)
      return a.priority > b.priority;
    return a.registration_seq < b.registration_seq;
  });
  return out;
}

std::optional<PluginMetadata> Context::find_plugin(std::string_view id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = ids_.find(id);
  if (it == ids_.end())
    return std::nullopt;
  for (const auto &m : index_.at(it->second))
    if (m.id == id)
      return m;
  return std::nullopt;
}

std::size_t Context::plugin_count() const {
  std::shared_lock lock(registry_mutex_);
  return ids_.size();
}

std::shared_ptr<void> Context::get_service(const std::string &service_kind) {
  std::lock_guard lock(service_mutex_);
  if (auto it = services_.find(service_kind); it != services_.end())
    return it->second;
  for (const auto &meta : resolve_plugins(PluginKind::Service)) {
    if (meta.name != service_kind)
      continue;
    const auto *factory = std::any_cast<ServiceFactory>(&meta.provider);
    if (factory == nullptr || !*factory)
      continue;
    auto instance = (*factory)(*this);
    services_.emplace(service_kind, instance);
    return instance;
  }
  throw MissingServiceError("no provider registered for service '" +
                            service_kind + "'");
}

std::uint64_t Context::subscribe(std::string type, EventHandler handler) {
  std::lock_guard lock(event_mutex_);
  auto id = next_subscription_++;
  subscriptions_.push_back(
      {id, std::move(type),
       std::make_shared<EventHandler>(std::move(handler))});
  return id;
}

void Context::unsubscribe(std::uint64_t subscription) {
  std::lock_guard lock(event_mutex_);
  std::erase_if(subscriptions_,
                [&](const auto &s) { return s.id == subscription; });
}

std::size_t Context::publish(const Event &event) {
  std::vector<Subscription> targets;
  {
    std::lock_guard lock(event_mutex_);
    for (const auto &s : subscriptions_)
      if (std::find(event.type_path.begin(), event.type_path.end(), s.type) !=
          event.type_path.end())
        targets.push_back(s);
  }
  // Delivered outside the lock so handlers may publish or subscribe.
  for (const auto &s : targets) {
    try {
      (*s.handler)(event);
    } catch (const std::exception &e) {
      log(LogLevel::Error, "event handler for '" + s.type +
                               "' failed: " + e.what());
    } catch (...) {
      log(LogLevel::Error,
          "event handler for '" + s.type + "' failed with unknown exception");
    }
  }
  return targets.size();
}

std::shared_ptr<Dataset> Context::active_dataset() const {
  std::lock_guard lock(state_mutex_);
  return active_dataset_;
}

void Context::set_active_dataset(std::shared_ptr<Dataset> dataset) {
  std::lock_guard lock(state_mutex_);
  active_dataset_ = std::move(dataset);
}

std::optional<std::string>
Context::preference(const std::string &key) const {
  std::lock_guard lock(state_mutex_);
  if (auto it = preferences_.find(key); it != preferences_.end())
    return it->second;
  return std::nullopt;
}

void Context::set_preference(const std::string &key, std::string value) {
  std::lock_guard lock(state_mutex_);
  preferences_[key] = std::move(value);
}

std::map<std::string, std::string> Context::preferences() const {
  std::lock_guard lock(state_mutex_);
  return preferences_;
}

void Context::load_preferences(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in)
    return;
  std::map<std::string, std::string> loaded;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (line.empty() || eq == std::string::npos)
      continue;
    loaded[unescape_pref(line.substr(0, eq))] =
        unescape_pref(line.substr(eq + 1));
  }
  std::lock_guard lock(state_mutex_);
  for (auto &[k, v] : loaded)
    preferences_[k] = std::move(v);
}

void Context::save_preferences(const std::filesystem::path &file) const {
  auto prefs = preferences();
  if (file.has_parent_path())
    std::filesystem::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write preferences to " + tmp.string());
    for (const auto &[k, v] : prefs)
      out << escape_pref(k) << '=' << escape_pref(v) << '\n';
    if (!out.flush())
      throw IoError("cannot write preferences to " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

void Context::set_log_sink(LogSink sink) {
  std::lock_guard lock(state_mutex_);
  log_sink_ = std::move(sink);
}

void Context::log(LogLevel level, std::string_view message) const {
  LogSink sink;
  {
    std::lock_guard lock(state_mutex_);
    sink = log_sink_;
  }
  if (sink) {
    sink(level, message);
    return;
  }
  static constexpr std::array<std::string_view, 4> names{"debug", "info",
                                                         "warn", "error"};
  if (level == LogLevel::Debug)
    return;
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << message
            << '\n';
}

void Context::set_output_sink(OutputSink sink) {
  std::lock_guard lock(state_mutex_);
  output_sink_ = std::move(sink);
}

void Context::write_output(std::string_view line) const {
  OutputSink sink;
  {
    std::lock_guard lock(state_mutex_);
    sink = output_sink_;
  }
  if (sink)
    sink(line);
  else
    std::cout << line << '\n';
}

std::vector<PluginMetadata> read_plugin_manifest(std::string_view text) {
  std::vector<PluginMetadata> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos)
        break;
      start = tab + 1;
    }
    if (fields.size() != 4)
      throw ParseError("plugin manifest line " + std::to_string(line_no) +
                           ": expected 4 tab-separated fields",
                       line_no);
    auto kind = parse_plugin_kind(fields[0]);
    if (!kind)
      throw ParseError("plugin manifest line " + std::to_string(line_no) +
                           ": unknown kind '" + fields[0] + "'",
                       line_no);
    std::int32_t priority = 0;
    const auto &p = fields[3];
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), priority);
    if (ec != std::errc{} || ptr != p.data() + p.size())
      throw ParseError("plugin manifest line " + std::to_string(line_no) +
                           ": bad priority '" + p + "'",
                       line_no);
    out.push_back(PluginMetadata{fields[1], *kind, fields[2], priority, {}, 0});
  }
  return out;
}

} // namespace ndforge
