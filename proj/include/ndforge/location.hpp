#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace ndforge {

enum class Scheme { File, Memory, Url };

/// Describes where data lives, similar to a URI.
struct Location {
  Scheme scheme = Scheme::File;
  std::filesystem::path path;                        // File
  std::shared_ptr<std::vector<std::byte>> buffer;    // Memory
  std::string url;                                   // Url (not resolvable)
  std::string display_name;

  /// Absolute FILE location.
  static Location file(const std::filesystem::path &p);
  static Location memory(std::shared_ptr<std::vector<std::byte>> bytes,
                         std::string name = "memory");
  static Location memory(std::vector<std::byte> bytes,
                         std::string name = "memory");

  /// File name (FILE) or display name, used for suffix detection.
  std::string name() const;
};

} // namespace ndforge
