#include "support.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace ndforge::test {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "ndforge-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data()))
    throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CliResult run_cli(const std::vector<std::string> &args, fs::path prefs) {
  std::optional<TempDir> scratch;
  if (prefs.empty()) {
    scratch.emplace();
    prefs = scratch->path() / "prefs";
  }
  setenv("NDFORGE_PREFS", prefs.c_str(), 1);
  std::ostringstream out, err;
  cli::Streams io{out, err};
  CliResult r;
  r.code = cli::main_entry(args, io);
  r.out = out.str();
  r.err = err.str();
  return r;
}

namespace {

std::string shell_quote(const std::string &s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  return q + "'";
}

} // namespace

CliResult run_binary(const std::vector<std::string> &args, const fs::path &prefs) {
  TempDir scratch;
  const fs::path err_file = scratch / "stderr";
  std::string cmd = "NDFORGE_PREFS=" + shell_quote(prefs.string()) + " " +
                    shell_quote(NDFORGE_CLI);
  for (const auto &a : args)
    cmd += " " + shell_quote(a);
  cmd += " 2>" + shell_quote(err_file.string());
  CliResult r;
  FILE *pipe = popen(cmd.c_str(), "r");
  if (!pipe)
    throw std::runtime_error("popen failed");
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text(err_file);
  return r;
}

fs::path fixture(const std::string &name) { return fs::path(NDFORGE_FIXTURES) / name; }

void write_file(const fs::path &file, const std::string &text) {
  if (file.has_parent_path())
    fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
}

void write_file(const fs::path &file, const std::vector<std::byte> &bytes) {
  write_file(file, std::string(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
}

std::string read_text(const fs::path &file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::byte> read_file(const fs::path &file) {
  const std::string s = read_text(file);
  std::vector<std::byte> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out[i] = static_cast<std::byte>(s[i]);
  return out;
}

ImagePtr random_image(PixelType type, std::vector<std::int64_t> dims, std::uint64_t seed,
                      Backing backing, CellParams params) {
  auto img = NDImage::create(type, make_axes(dims), backing, std::move(params));
  std::mt19937_64 rng(seed);
  if (type.is_float()) {
    std::uniform_real_distribution<double> d(-1000.0, 1000.0);
    for (std::uint64_t i = 0; i < img->size(); ++i)
      img->set_at(i, d(rng));
  } else {
    std::uniform_int_distribution<std::int64_t> d(static_cast<std::int64_t>(type.min_value()),
                                                  static_cast<std::int64_t>(type.max_value()));
    for (std::uint64_t i = 0; i < img->size(); ++i)
      img->set_at(i, static_cast<double>(d(rng)));
  }
  return img;
}

ImagePtr constant_image(PixelType type, std::vector<std::int64_t> dims, double value,
                        Backing backing) {
  auto img = NDImage::create(type, make_axes(dims), backing);
  for (std::uint64_t i = 0; i < img->size(); ++i)
    img->set_at(i, value);
  return img;
}

double max_abs_diff(const NDImage &a, const NDImage &b) {
  if (a.dims() != b.dims())
    throw std::runtime_error("dims differ");
  double m = 0;
  for (std::uint64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.get_at(i) - b.get_at(i)));
  return m;
}

} // namespace ndforge::test
