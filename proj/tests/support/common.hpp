#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "ncore/errors.hpp"
#include "ncore/repository.hpp"

namespace ncore::test {

// Self-cleaning scratch directory for repositories under test.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() /
                        "ncore-test-XXXXXX")
                           .string();
    char* made = ::mkdtemp(tmpl.data());
    if (!made) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string sub(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

// Batch fsync keeps bulk tests fast; correctness tests that need crash
// semantics pass their own options.
inline RepositoryOptions fast_options(const std::string& data_dir) {
  RepositoryOptions opt;
  opt.data_dir = data_dir;
  opt.journal.fsync = JournalStore::FsyncPolicy::Batch;
  return opt;
}

inline std::unique_ptr<Repository> make_repo(const std::string& data_dir) {
  return Repository::open(fast_options(data_dir));
}

// Runs fn and returns the NcoreError code it threw, or nullopt if it
// returned normally. Keeps error-path assertions one line long.
inline std::optional<Err> err_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const NcoreError& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace ncore::test
