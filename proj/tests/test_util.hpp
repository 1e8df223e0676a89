// SPDX-License-Identifier: Apache-2.0
// Temporary directories and small file helpers shared by the test binaries.
#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace newsattn::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("newsattn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

  std::filesystem::path write(const std::string& name, const std::string& body) const {
    std::ofstream out(path_ / name, std::ios::binary);
    out << body;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_dir() { return NEWSATTN_DATA_DIR; }
inline std::filesystem::path golden_dir() { return NEWSATTN_GOLDEN_DIR; }

}  // namespace newsattn::testing
