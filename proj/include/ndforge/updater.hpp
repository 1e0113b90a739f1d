#pragma once

#include "ndforge/container.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ndforge::updater {

/// Lowercase hex SHA-256.
std::string checksum(std::span<const std::byte> bytes);
std::string checksum_file(const std::filesystem::path &file);

struct FileVersionRecord {
  std::string checksum;
  std::int64_t timestamp = 0;
  std::uint64_t size = 0;
  friend bool operator==(const FileVersionRecord &, const FileVersionRecord &) = default;
};

struct FileEntry {
  FileVersionRecord current;
  std::vector<FileVersionRecord> previous; // newest first
  std::vector<std::string> dependencies;
  friend bool operator==(const FileEntry &, const FileEntry &) = default;
};

struct SiteManifest {
  std::string site_name;
  std::map<std::string, FileEntry> files;
  friend bool operator==(const SiteManifest &, const SiteManifest &) = default;
};

inline constexpr const char *kManifestName = "db.xml.gz";

/// Canonical XML text: fixed attribute order, two-space indentation, files
/// sorted by path.
std::string manifest_xml(const SiteManifest &manifest);
/// Throws ParseError ("line L, column C: ...") on malformed or unexpected XML.
SiteManifest parse_manifest_xml(std::string_view xml);

std::vector<std::byte> gzip(std::span<const std::byte> data);
/// Throws FormatError on corrupt or truncated input.
std::vector<std::byte> gunzip(std::span<const std::byte> data);

std::vector<std::byte> write_manifest(const SiteManifest &manifest);
SiteManifest load_manifest(std::span<const std::byte> gz);
SiteManifest load_manifest_file(const std::filesystem::path &file);

enum class FileState { UpToDate, OldVersion, LocallyModified, Untracked, Missing };

/// "UP_TO_DATE", "OLD_VERSION", "LOCALLY_MODIFIED", "UNTRACKED", "MISSING".
std::string_view to_string(FileState state);

struct LocalFileState {
  std::string path; // relative, '/' separated
  FileState state = FileState::Untracked;
  std::optional<std::string> owning_site;
  std::string error; // set when the local file could not be read
};

/// One state per tracked or local file, sorted by path. Earlier sites own
/// paths shared with later ones.
std::vector<LocalFileState> classify(const std::filesystem::path &local_root,
                                     const std::vector<SiteManifest> &sites);

struct PlanAction {
  std::string path;
  std::string site;
  FileVersionRecord target;
};

struct UpdatePlan {
  std::vector<PlanAction> installs;
  std::vector<PlanAction> upgrades;
  std::vector<PlanAction> deletions;
  std::vector<std::pair<std::string, std::string>> conflicts; // path, reason

  bool empty() const {
    return installs.empty() && upgrades.empty() && deletions.empty() && conflicts.empty();
  }
};

struct Policy {
  bool overwrite_modified = false;
};

UpdatePlan plan(const std::vector<LocalFileState> &states,
                const std::vector<SiteManifest> &sites, const Policy &policy = {});

/// Fetches and stores update-site payloads. Provider of PluginKind::Uploader
/// plugins (as a TransportFactory).
class Transport {
public:
  virtual ~Transport() = default;
  virtual std::vector<std::byte> fetch(const std::string &site, const std::string &path,
                                       const std::string &checksum) = 0;
  virtual void store(const std::string &site, const std::string &path,
                     std::span<const std::byte> bytes) = 0;
  virtual void store_manifest(const std::string &site, std::span<const std::byte> gz) = 0;
};

/// Each site is a directory holding db.xml.gz and the current payloads.
class LocalDirectoryTransport : public Transport {
public:
  explicit LocalDirectoryTransport(std::map<std::string, std::filesystem::path> sites);

  std::vector<std::byte> fetch(const std::string &site, const std::string &path,
                               const std::string &checksum) override;
  void store(const std::string &site, const std::string &path,
             std::span<const std::byte> bytes) override;
  void store_manifest(const std::string &site, std::span<const std::byte> gz) override;

private:
  const std::filesystem::path &dir(const std::string &site) const;
  std::map<std::string, std::filesystem::path> sites_;
};

using TransportFactory = std::function<std::shared_ptr<Transport>(
    const std::map<std::string, std::filesystem::path> &sites)>;

struct ApplyReport {
  std::vector<std::string> succeeded;
  std::vector<std::pair<std::string, std::string>> failed; // path, reason
  std::size_t installed = 0;
  std::size_t upgraded = 0;
  std::size_t deleted = 0;
};

/// Verifies every payload's checksum before an atomic temp+rename install.
/// A failing action leaves its file untouched and does not stop the others.
ApplyReport apply(const UpdatePlan &plan, Transport &transport,
                  const std::filesystem::path &local_root);

/// Records changed `files` (relative to `local_root`) as new current versions,
/// uploads them and the manifest. Unchanged files leave the manifest as is.
SiteManifest publish(const std::filesystem::path &local_root,
                     const std::vector<std::string> &files, SiteManifest site,
                     Transport &transport, std::int64_t timestamp);

/// Registers the local-directory transport as an uploader plugin.
void register_builtin_updater(Context &ctx);
std::shared_ptr<Transport> make_transport(const Context &ctx, const std::string &id,
                                          const std::map<std::string, std::filesystem::path> &sites);

} // namespace ndforge::updater
