#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace dsvpar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dialect, schema or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The requested tagging mode cannot represent the input.
class ModeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input rejected under the strict policy.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::optional<std::uint64_t> byte_offset = std::nullopt,
            std::optional<std::uint64_t> record = std::nullopt)
      : Error(what), byte_offset_(byte_offset), record_(record) {}

  std::optional<std::uint64_t> byte_offset() const { return byte_offset_; }
  std::optional<std::uint64_t> record() const { return record_; }

 private:
  std::optional<std::uint64_t> byte_offset_;
  std::optional<std::uint64_t> record_;
};

class ConversionError : public DataError {
 public:
  ConversionError(std::uint64_t record, std::size_t column, std::string excerpt)
      : DataError("cannot convert field (record " + std::to_string(record) + ", column " +
                      std::to_string(column) + "): '" + excerpt + "'",
                  std::nullopt, record),
        column_(column),
        excerpt_(std::move(excerpt)) {}

  std::size_t column() const { return column_; }
  const std::string& excerpt() const { return excerpt_; }

 private:
  std::size_t column_;
  std::string excerpt_;
};

}  // namespace dsvpar
