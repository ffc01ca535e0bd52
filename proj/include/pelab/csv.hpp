#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "pelab/errors.hpp"

namespace pelab {

// Shortest decimal form that round-trips the exact double. Keeps every
// exported file byte-identical across runs and decimal-exact on re-read.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

// Minimal line-oriented CSV writer. Callers compose full rows; the writer
// owns the stream and flushes on destruction.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path.string());
    path_ = path.string();
  }

  void line(const std::string& row) {
    out_ << row << '\n';
    if (!out_) throw IoError("write failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace pelab
