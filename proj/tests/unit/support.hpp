#pragma once

#include "ndforge/cli.hpp"
#include "ndforge/ndimage.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ndforge::test {

/// Private directory under the system temp path, removed on destruction.
class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

/// Runs the CLI entry point in-process with NDFORGE_PREFS pointing at `prefs`
/// (a fresh temp file when empty).
CliResult run_cli(const std::vector<std::string> &args, std::filesystem::path prefs = {});
/// Runs the built executable through the shell.
CliResult run_binary(const std::vector<std::string> &args,
                     const std::filesystem::path &prefs);

std::filesystem::path fixture(const std::string &name);

void write_file(const std::filesystem::path &file, const std::string &text);
void write_file(const std::filesystem::path &file, const std::vector<std::byte> &bytes);
std::vector<std::byte> read_file(const std::filesystem::path &file);
std::string read_text(const std::filesystem::path &file);

/// Uniform random samples over the type's full range (integers) or [-1000, 1000].
ImagePtr random_image(PixelType type, std::vector<std::int64_t> dims, std::uint64_t seed,
                      Backing backing = Backing::Array, CellParams params = {});
ImagePtr constant_image(PixelType type, std::vector<std::int64_t> dims, double value,
                        Backing backing = Backing::Array);

/// Max |a-b| over all samples; images must have equal dims.
double max_abs_diff(const NDImage &a, const NDImage &b);

} // namespace ndforge::test
