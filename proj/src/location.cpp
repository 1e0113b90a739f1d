#include "ndforge/location.hpp"

namespace ndforge {

Location Location::file(const std::filesystem::path &p) {
  Location loc;
  loc.scheme = Scheme::File;
  loc.path = std::filesystem::absolute(p).lexically_normal();
  loc.display_name = loc.path.string();
  return loc;
}

Location Location::memory(std::shared_ptr<std::vector<std::byte>> bytes,
                          std::string name) {
  Location loc;
  loc.scheme = Scheme::Memory;
  loc.buffer = std::move(bytes);
  loc.display_name = std::move(name);
  return loc;
}

Location Location::memory(std::vector<std::byte> bytes, std::string name) {
  return memory(std::make_shared<std::vector<std::byte>>(std::move(bytes)),
                std::move(name));
}

std::string Location::name() const {
  if (scheme == Scheme::File)
    return path.filename().string();
  return display_name;
}

} // namespace ndforge
