#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "wicas/common/bytes.hpp"
#include "wicas/toylm/model.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return WICAS_SOURCE_DIR; }

inline nlohmann::json golden() {
  std::ifstream in(source_dir() / "tests/data/golden.json");
  return nlohmann::json::parse(in);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wicas-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// A = E = W = 0, bias one-hot at `token`.
inline wicas::toylm::Model one_hot_model(std::uint32_t hidden_dim = 4, std::uint32_t max_context = 64,
                                         std::uint32_t token = 65) {
  auto m = wicas::toylm::zero_model(hidden_dim, max_context);
  m.bias[token] = 1.0;
  return m;
}

inline void install(const std::filesystem::path& cache, const std::string& id, const wicas::toylm::Model& m) {
  std::filesystem::create_directories(cache);
  wicas::write_file(cache / (id + ".wicm"), wicas::toylm::serialize_model(m));
}

inline std::string random_prompt(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string s(len(rng), '\0');
  for (auto& c : s) c = static_cast<char>(byte(rng));
  return s;
}

}  // namespace testing_support
