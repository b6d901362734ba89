#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "cg/error.hpp"

// Asserts that `stmt` throws cg::Error carrying `expected_code`.
#define EXPECT_CG_ERROR(stmt, expected_code)                                        \
  do {                                                                              \
    try {                                                                           \
      stmt;                                                                         \
      ADD_FAILURE() << "expected cg::Error " << #expected_code << ", none thrown";  \
    } catch (const cg::Error& e) {                                                  \
      EXPECT_EQ(e.code(), cg::ErrorCode::expected_code) << e.what();                \
    }                                                                               \
  } while (0)

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cg_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CG_FIXTURE_DIR) / name;
}

}  // namespace testutil
