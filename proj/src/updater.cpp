#include "ndforge/updater.hpp"

#include "ndforge/error.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>

namespace ndforge::updater {

namespace fs = std::filesystem;

namespace {

std::vector<std::byte> read_file(const fs::path &file) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + file.string());
  std::vector<char> chars((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(chars.size());
  std::memcpy(out.data(), chars.data(), chars.size());
  return out;
}

void write_atomic(const fs::path &file, std::span<const std::byte> bytes) {
  if (file.has_parent_path())
    fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("cannot write " + tmp.string());
    }
  }
  fs::rename(tmp, file);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&':
      out += "&amp;";
      break;
    case '<':
      out += "&lt;";
      break;
    case '>':
      out += "&gt;";
      break;
    case '"':
      out += "&quot;";
      break;
    default:
      out += c;
    }
  }
  return out;
}

std::string record_xml(std::string_view tag, const FileVersionRecord &r) {
  return "    <" + std::string(tag) + " checksum=\"" + escape(r.checksum) + "\" timestamp=\"" +
         std::to_string(r.timestamp) + "\" size=\"" + std::to_string(r.size) + "\"/>\n";
}

} // namespace

std::string checksum(std::span<const std::byte> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha-256 digest failed");
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string checksum_file(const fs::path &file) { return checksum(read_file(file)); }

// ---- XML -------------------------------------------------------------------

std::string manifest_xml(const SiteManifest &m) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<updatesite name=\"" + escape(m.site_name) + "\">\n";
  for (const auto &[path, entry] : m.files) {
    s += "  <file path=\"" + escape(path) + "\" >\n";
    s += record_xml("current", entry.current);
    for (const auto &p : entry.previous)
      s += record_xml("previous", p);
    for (const auto &d : entry.dependencies)
      s += "    <dependency path=\"" + escape(d) + "\"/>\n";
    s += "  </file>\n";
  }
  s += "</updatesite>\n";
  return s;
}

namespace {

struct Element {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<Element> children;
  std::size_t line = 0, col = 0;

  const std::string *attr(std::string_view name) const {
    for (const auto &[k, v] : attrs)
      if (k == name)
        return &v;
    return nullptr;
  }
};

class XmlParser {
public:
  explicit XmlParser(std::string_view text) : t_(text) {}

  Element document() {
    skip_misc();
    if (starts("<?xml")) {
      auto end = t_.find("?>", i_);
      if (end == std::string_view::npos)
        fail("unterminated XML declaration");
      advance_to(end + 2);
    }
    skip_misc();
    Element root = element();
    skip_misc();
    if (i_ < t_.size())
      fail("content after the root element");
    return root;
  }

  [[noreturn]] void fail(const std::string &what) const { fail_at(what, line_, col_, i_); }

  [[noreturn]] static void fail_at(const std::string &what, std::size_t line, std::size_t col,
                                   std::size_t offset) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                         ": " + what,
                     offset);
  }

private:
  bool starts(std::string_view s) const { return t_.substr(i_, s.size()) == s; }

  void bump() {
    if (t_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void advance_to(std::size_t pos) {
    while (i_ < pos && i_ < t_.size())
      bump();
  }

  void skip_space() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_])))
      bump();
  }

  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts("<!--")) {
        auto end = t_.find("-->", i_);
        if (end == std::string_view::npos)
          fail("unterminated comment");
        advance_to(end + 3);
        continue;
      }
      return;
    }
  }

  std::string name() {
    const std::size_t start = i_;
    while (i_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[i_])) ||
                              t_[i_] == '_' || t_[i_] == '-' || t_[i_] == ':' || t_[i_] == '.'))
      bump();
    if (i_ == start)
      fail("expected a name");
    return std::string(t_.substr(start, i_ - start));
  }

  std::string unescape(std::string_view raw) {
    std::string out;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k] != '&') {
        out += raw[k];
        continue;
      }
      auto semi = raw.find(';', k);
      if (semi == std::string_view::npos)
        fail("unterminated entity");
      auto ent = raw.substr(k + 1, semi - k - 1);
      if (ent == "amp")
        out += '&';
      else if (ent == "lt")
        out += '<';
      else if (ent == "gt")
        out += '>';
      else if (ent == "quot")
        out += '"';
      else if (ent == "apos")
        out += '\'';
      else
        fail("unknown entity '&" + std::string(ent) + ";'");
      k = semi;
    }
    return out;
  }

  Element element() {
    if (i_ >= t_.size() || t_[i_] != '<')
      fail("expected '<'");
    Element e;
    e.line = line_;
    e.col = col_;
    bump();
    e.tag = name();
    for (;;) {
      skip_space();
      if (i_ >= t_.size())
        fail("unterminated tag <" + e.tag + ">");
      if (starts("/>")) {
        bump();
        bump();
        return e;
      }
      if (t_[i_] == '>') {
        bump();
        break;
      }
      std::string key = name();
      skip_space();
      if (i_ >= t_.size() || t_[i_] != '=')
        fail("expected '=' after attribute " + key);
      bump();
      skip_space();
      if (i_ >= t_.size() || (t_[i_] != '"' && t_[i_] != '\''))
        fail("expected quoted value for attribute " + key);
      const char q = t_[i_];
      bump();
      const std::size_t start = i_;
      while (i_ < t_.size() && t_[i_] != q) {
        if (t_[i_] == '<')
          fail("'<' in attribute value");
        bump();
      }
      if (i_ >= t_.size())
        fail("unterminated attribute value");
      std::string value = unescape(t_.substr(start, i_ - start));
      bump();
      for (const auto &a : e.attrs)
        if (a.first == key)
          fail("duplicate attribute " + key);
      e.attrs.emplace_back(std::move(key), std::move(value));
    }
    for (;;) {
      skip_misc();
      if (i_ >= t_.size())
        fail("missing </" + e.tag + ">");
      if (starts("</")) {
        bump();
        bump();
        const std::string close = name();
        if (close != e.tag)
          fail("mismatched </" + close + ">, expected </" + e.tag + ">");
        skip_space();
        if (i_ >= t_.size() || t_[i_] != '>')
          fail("expected '>'");
        bump();
        return e;
      }
      if (t_[i_] != '<')
        fail("unexpected text content");
      e.children.push_back(element());
    }
  }

  std::string_view t_;
  std::size_t i_ = 0;
  std::size_t line_ = 1, col_ = 1;
};

[[noreturn]] void bad(const Element &e, const std::string &what) {
  XmlParser::fail_at(what, e.line, e.col, 0);
}

const std::string &required(const Element &e, std::string_view name) {
  const std::string *v = e.attr(name);
  if (!v)
    bad(e, "<" + e.tag + "> lacks attribute '" + std::string(name) + "'");
  return *v;
}

template <class T> T number(const Element &e, std::string_view attr) {
  const std::string &s = required(e, attr);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    bad(e, "attribute '" + std::string(attr) + "' is not a number: '" + s + "'");
  return v;
}

FileVersionRecord record(const Element &e) {
  FileVersionRecord r;
  r.checksum = required(e, "checksum");
  r.timestamp = number<std::int64_t>(e, "timestamp");
  r.size = number<std::uint64_t>(e, "size");
  return r;
}

} // namespace

SiteManifest parse_manifest_xml(std::string_view xml) {
  XmlParser p(xml);
  const Element root = p.document();
  if (root.tag != "updatesite")
    bad(root, "root element must be <updatesite>");
  SiteManifest m;
  m.site_name = required(root, "name");
  for (const auto &f : root.children) {
    if (f.tag != "file")
      bad(f, "unexpected <" + f.tag + "> in <updatesite>");
    const std::string path = required(f, "path");
    if (m.files.count(path))
      bad(f, "duplicate file '" + path + "'");
    FileEntry entry;
    bool have_current = false;
    for (const auto &c : f.children) {
      if (c.tag == "current") {
        if (have_current)
          bad(c, "second <current> for '" + path + "'");
        entry.current = record(c);
        have_current = true;
      } else if (c.tag == "previous") {
        entry.previous.push_back(record(c));
      } else if (c.tag == "dependency") {
        entry.dependencies.push_back(required(c, "path"));
      } else {
        bad(c, "unexpected <" + c.tag + "> in <file>");
      }
    }
    if (!have_current)
      bad(f, "<file path=\"" + path + "\"> has no <current>");
    m.files.emplace(path, std::move(entry));
  }
  return m;
}

// ---- gzip ------------------------------------------------------------------

std::vector<std::byte> gzip(std::span<const std::byte> data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, 15 + 16, 9, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("deflateInit2 failed");
  std::vector<std::byte> out(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef *>(const_cast<std::byte *>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef *>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw Error("gzip compression failed");
  return out;
}

std::vector<std::byte> gunzip(std::span<const std::byte> data) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw Error("inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef *>(const_cast<std::byte *>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::vector<std::byte> out;
  std::byte buf[16384];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef *>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    if (rc == Z_BUF_ERROR && zs.avail_in == 0)
      break;
  }
  const auto consumed = zs.total_in;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw FormatError(rc == Z_BUF_ERROR || rc == Z_OK ? "gzip: truncated stream"
                                                      : "gzip: corrupt stream",
                      consumed);
  return out;
}

std::vector<std::byte> write_manifest(const SiteManifest &manifest) {
  const std::string xml = manifest_xml(manifest);
  return gzip(std::as_bytes(std::span(xml.data(), xml.size())));
}

SiteManifest load_manifest(std::span<const std::byte> gz) {
  const auto xml = gunzip(gz);
  return parse_manifest_xml(
      std::string_view(reinterpret_cast<const char *>(xml.data()), xml.size()));
}

SiteManifest load_manifest_file(const fs::path &file) {
  try {
    return load_manifest(read_file(file));
  } catch (const Error &e) {
    throw UpdateError(file.string() + ": " + e.what());
  }
}

// ---- classify / plan -------------------------------------------------------

std::string_view to_string(FileState state) {
  switch (state) {
  case FileState::UpToDate:
    return "UP_TO_DATE";
  case FileState::OldVersion:
    return "OLD_VERSION";
  case FileState::LocallyModified:
    return "LOCALLY_MODIFIED";
  case FileState::Untracked:
    return "UNTRACKED";
  case FileState::Missing:
    return "MISSING";
  }
  return "?";
}

std::vector<LocalFileState> classify(const fs::path &local_root,
                                     const std::vector<SiteManifest> &sites) {
  std::map<std::string, std::pair<const SiteManifest *, const FileEntry *>> owner;
  for (const auto &site : sites)
    for (const auto &[path, entry] : site.files)
      owner.emplace(path, std::make_pair(&site, &entry));

  std::map<std::string, LocalFileState> out;
  for (const auto &[path, own] : owner) {
    LocalFileState s;
    s.path = path;
    s.owning_site = own.first->site_name;
    const fs::path local = local_root / path;
    if (!fs::exists(local)) {
      s.state = FileState::Missing;
    } else {
      try {
        const std::string sum = checksum_file(local);
        const FileEntry &e = *own.second;
        if (sum == e.current.checksum)
          s.state = FileState::UpToDate;
        else if (std::any_of(e.previous.begin(), e.previous.end(),
                             [&](const FileVersionRecord &r) { return r.checksum == sum; }))
          s.state = FileState::OldVersion;
        else
          s.state = FileState::LocallyModified;
      } catch (const std::exception &ex) {
        s.state = FileState::LocallyModified;
        s.error = ex.what();
      }
    }
    out.emplace(path, std::move(s));
  }

  std::error_code ec;
  if (fs::is_directory(local_root, ec)) {
    for (auto it = fs::recursive_directory_iterator(local_root, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
      if (ec)
        break;
      if (!it->is_regular_file())
        continue;
      const std::string rel = fs::relative(it->path(), local_root).generic_string();
      if (!out.count(rel))
        out.emplace(rel, LocalFileState{rel, FileState::Untracked, std::nullopt, {}});
    }
  }

  std::vector<LocalFileState> result;
  for (auto &[path, s] : out)
    result.push_back(std::move(s));
  return result;
}

UpdatePlan plan(const std::vector<LocalFileState> &states,
                const std::vector<SiteManifest> &sites, const Policy &policy) {
  auto lookup = [&](const std::string &path)
      -> std::optional<std::pair<const SiteManifest *, const FileEntry *>> {
    for (const auto &site : sites)
      if (auto it = site.files.find(path); it != site.files.end())
        return std::make_pair(&site, &it->second);
    return std::nullopt;
  };
  std::map<std::string, const LocalFileState *> by_path;
  for (const auto &s : states)
    by_path[s.path] = &s;

  UpdatePlan p;
  std::set<std::string> planned;
  std::vector<std::string> pending;

  auto add = [&](std::vector<PlanAction> &list, const std::string &path) {
    auto own = lookup(path);
    if (!own || !planned.insert(path).second)
      return;
    list.push_back({path, own->first->site_name, own->second->current});
    pending.push_back(path);
  };

  for (const auto &s : states) {
    switch (s.state) {
    case FileState::OldVersion:
      add(p.upgrades, s.path);
      break;
    case FileState::Missing:
      add(p.installs, s.path);
      break;
    case FileState::LocallyModified:
      if (policy.overwrite_modified)
        add(p.upgrades, s.path);
      else if (planned.insert(s.path).second)
        p.conflicts.emplace_back(s.path, s.error.empty() ? "locally modified"
                                                         : "unreadable: " + s.error);
      break;
    default:
      break;
    }
  }

  while (!pending.empty()) {
    const std::string path = pending.back();
    pending.pop_back();
    for (const auto &dep : lookup(path)->second->dependencies) {
      if (planned.count(dep))
        continue;
      auto it = by_path.find(dep);
      const FileState st = it == by_path.end() ? FileState::Missing : it->second->state;
      if (st != FileState::Missing && st != FileState::OldVersion)
        continue;
      if (!lookup(dep)) {
        planned.insert(dep);
        p.conflicts.emplace_back(dep, "dependency of " + path + " is on no site");
        continue;
      }
      add(st == FileState::Missing ? p.installs : p.upgrades, dep);
    }
  }
  return p;
}

// ---- transport / apply / publish ------------------------------------------

LocalDirectoryTransport::LocalDirectoryTransport(std::map<std::string, fs::path> sites)
    : sites_(std::move(sites)) {}

const fs::path &LocalDirectoryTransport::dir(const std::string &site) const {
  auto it = sites_.find(site);
  if (it == sites_.end())
    throw UpdateError("unknown update site '" + site + "'");
  return it->second;
}

std::vector<std::byte> LocalDirectoryTransport::fetch(const std::string &site,
                                                      const std::string &path,
                                                      const std::string &) {
  return read_file(dir(site) / path);
}

void LocalDirectoryTransport::store(const std::string &site, const std::string &path,
                                    std::span<const std::byte> bytes) {
  write_atomic(dir(site) / path, bytes);
}

void LocalDirectoryTransport::store_manifest(const std::string &site,
                                             std::span<const std::byte> gz) {
  write_atomic(dir(site) / kManifestName, gz);
}

ApplyReport apply(const UpdatePlan &plan, Transport &transport, const fs::path &local_root) {
  ApplyReport report;
  auto install = [&](const PlanAction &a, std::size_t &counter) {
    try {
      const auto bytes = transport.fetch(a.site, a.path, a.target.checksum);
      const std::string sum = checksum(bytes);
      if (sum != a.target.checksum)
        throw UpdateError("checksum mismatch (expected " + a.target.checksum + ", got " +
                          sum + ")");
      write_atomic(local_root / a.path, bytes);
      report.succeeded.push_back(a.path);
      ++counter;
    } catch (const std::exception &e) {
      report.failed.emplace_back(a.path, e.what());
    }
  };
  for (const auto &a : plan.installs)
    install(a, report.installed);
  for (const auto &a : plan.upgrades)
    install(a, report.upgraded);
  for (const auto &a : plan.deletions) {
    std::error_code ec;
    if (fs::remove(local_root / a.path, ec) || !ec) {
      report.succeeded.push_back(a.path);
      ++report.deleted;
    } else {
      report.failed.emplace_back(a.path, ec.message());
    }
  }
  return report;
}

SiteManifest publish(const fs::path &local_root, const std::vector<std::string> &files,
                     SiteManifest site, Transport &transport, std::int64_t timestamp) {
  bool changed = false;
  for (const auto &path : files) {
    const auto bytes = read_file(local_root / path);
    FileVersionRecord rec{checksum(bytes), timestamp, bytes.size()};
    auto it = site.files.find(path);
    if (it != site.files.end() && it->second.current.checksum == rec.checksum)
      continue;
    if (it == site.files.end()) {
      site.files[path].current = rec;
    } else {
      FileEntry &e = it->second;
      e.previous.insert(e.previous.begin(), e.current);
      std::set<std::string> seen{rec.checksum};
      std::erase_if(e.previous, [&](const FileVersionRecord &r) {
        return !seen.insert(r.checksum).second;
      });
      e.current = rec;
    }
    transport.store(site.site_name, path, bytes);
    changed = true;
  }
  if (changed)
    transport.store_manifest(site.site_name, write_manifest(site));
  return site;
}

void register_builtin_updater(Context &ctx) {
  PluginMetadata meta;
  meta.id = "uploader.local-directory";
  meta.kind = PluginKind::Uploader;
  meta.name = "local";
  meta.provider = TransportFactory([](const std::map<std::string, fs::path> &sites) {
    return std::shared_ptr<Transport>(std::make_shared<LocalDirectoryTransport>(sites));
  });
  ctx.register_plugin(std::move(meta));
}

std::shared_ptr<Transport> make_transport(const Context &ctx, const std::string &id,
                                          const std::map<std::string, fs::path> &sites) {
  for (const auto &meta : ctx.resolve_plugins(PluginKind::Uploader))
    if (meta.name == id)
      if (const auto *f = std::any_cast<TransportFactory>(&meta.provider))
        return (*f)(sites);
  throw UpdateError("no transport named '" + id + "'");
}

} // namespace ndforge::updater
