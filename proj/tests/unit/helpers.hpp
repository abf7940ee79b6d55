#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "srgnet/error.hpp"

namespace testing {

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("srgnet_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

template <class F>
srgnet::ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const srgnet::Error& e) {
    return e.code();
  }
  FAIL("expected an srgnet::Error");
  return srgnet::ErrorCode::InvalidConfig;
}

}  // namespace testing
