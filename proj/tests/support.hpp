// Shared helpers for the test binaries. Everything in here is an independent
// re-computation of something the library also computes; the tests compare the
// two routes, so none of these helpers may call into the code under test.
#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/tensor.hpp"

namespace testsup {

// --- numeric comparison ---

inline double rel_err(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / scale;
}

// Central finite difference of a scalar function with respect to one slot.
// The function must recompute its value from scratch on every call because
// the slot is mutated in place between evaluations.
template <typename F>
double fd_slot(F&& value, double* slot, double h = 1e-4) {
  const double orig = *slot;
  *slot = orig + h;
  const double up = value();
  *slot = orig - h;
  const double down = value();
  *slot = orig;
  return (up - down) / (2.0 * h);
}

// --- AUROC oracle: all pairs, half credit on ties ---

inline double brute_auroc(std::span<const double> in,
                          std::span<const double> out) {
  double wins = 0.0;
  for (double a : in) {
    for (double b : out) {
      if (a > b) {
        wins += 1.0;
      } else if (a == b) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(in.size()) * static_cast<double>(out.size()));
}

// --- dense linear algebra oracle (no Eigen on purpose) ---

using Mat = std::vector<std::vector<double>>;

// Gauss-Jordan with partial pivoting. Throws on a singular pivot; the test
// matrices are small and well conditioned so this is not exercised.
inline Mat gj_inverse(Mat a) {
  const std::size_t n = a.size();
  Mat inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0.0) throw std::runtime_error("gj_inverse: singular");
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline double quad_form(const Mat& m, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) row += m[i][j] * v[j];
    acc += v[i] * row;
  }
  return acc;
}

// --- scratch directories ---

// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const int id = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("atdkit-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(id));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

// --- small deterministic datasets ---

inline atdkit::SampleBatch blob_batch(std::uint64_t seed, std::size_t n_per_class,
                                      std::vector<std::vector<double>> centers,
                                      double stdev = 0.3, bool labeled = true,
                                      atdkit::Role role = atdkit::Role::InTrain,
                                      const std::string& name = "blobs") {
  atdkit::DatasetSpec spec;
  spec.name = name;
  spec.role = role;
  spec.source = "blobs";
  spec.seed = seed;
  spec.params = {{"centers", centers},
                 {"std", stdev},
                 {"n", n_per_class},
                 {"labeled", labeled}};
  return atdkit::load_dataset(spec);
}

// Plain mt19937-based values for inputs where the library RNG must not be
// involved (keeps test data independent of the stream implementation).
inline atdkit::Tensor random_tensor(std::vector<std::size_t> shape,
                                    std::uint32_t seed, double lo = -1.0,
                                    double hi = 1.0) {
  atdkit::Tensor t(std::move(shape));
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(gen);
  return t;
}

}  // namespace testsup
