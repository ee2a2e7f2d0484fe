#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "geoval/common.hpp"
#include "geoval/data.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("geoval_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> normals(geoval::Rng& rng, std::size_t n, double sd = 1.0, double mu = 0.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = mu + sd * rng.normal();
  return v;
}

// Points uniform in a lat/lon window.
inline std::vector<geoval::LatLon> uniform_points(geoval::Rng& rng, std::size_t n, double lat0, double lat1,
                                                  double lon0, double lon1) {
  std::vector<geoval::LatLon> pts(n);
  for (auto& p : pts) p = {rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)};
  return pts;
}

}  // namespace testutil
