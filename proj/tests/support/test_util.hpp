#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "nvar/errors.hpp"

template <typename Fn>
void expect_code(nvar::ErrorCode code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << nvar::to_string(code);
  } catch (const nvar::Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

/// Fresh per-test scratch directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nvar_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
