#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ndforge {

/// Base of every exception thrown by the framework.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DuplicateIdError : public Error {
public:
  using Error::Error;
};

class MissingServiceError : public Error {
public:
  using Error::Error;
};

/// An input could not be resolved or parsed while harvesting module inputs.
class HarvestError : public Error {
public:
  HarvestError(std::string param, const std::string &what)
      : Error(what), param_(std::move(param)) {}
  const std::string &param() const { return param_; }

private:
  std::string param_;
};

class ConversionError : public Error {
public:
  using Error::Error;
};

class ModuleError : public Error {
public:
  using Error::Error;
};

/// Header or expression text that does not follow its grammar. `position` is a
/// 0-based byte offset (or line number for header parsing; see the thrower).
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

class BoundsError : public Error {
public:
  using Error::Error;
};

class ImageError : public Error {
public:
  using Error::Error;
};

class NoMatchError : public Error {
public:
  using Error::Error;
};

class AmbiguousMatchError : public Error {
public:
  using Error::Error;
};

class ContractError : public Error {
public:
  using Error::Error;
};

class OpError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Payload that does not decode; carries the byte offset of the failure.
class FormatError : public Error {
public:
  FormatError(const std::string &what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string &what) : Error(what) {}
  std::uint64_t offset() const { return offset_; }

private:
  std::uint64_t offset_ = 0;
};

class UpdateError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

} // namespace ndforge
