#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "bmix/grid.hpp"

namespace bmix {

using cx = std::complex<double>;

namespace detail {

// FFTW's planner is not thread-safe; creation is serialized globally.
// Plans are cached per thread and executed only on that thread's buffers.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct PlanKey {
  int d;
  int m;
  int sign;
  bool operator<(const PlanKey& o) const {
    if (d != o.d) return d < o.d;
    if (m != o.m) return m < o.m;
    return sign < o.sign;
  }
};

class PlanCache {
 public:
  fftw_plan get(const GridSpec& g, int sign) {
    const PlanKey key{g.d, g.m, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;

    std::vector<cx> scratch(g.sites());
    int dims[3] = {g.m, g.m, g.m};
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_plan p = fftw_plan_dft(
        g.d, dims, reinterpret_cast<fftw_complex*>(scratch.data()),
        reinterpret_cast<fftw_complex*>(scratch.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plans_.emplace(key, p);
    return p;
  }

  ~PlanCache() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::map<PlanKey, fftw_plan> plans_;
};

inline PlanCache& plan_cache() {
  thread_local PlanCache cache;
  return cache;
}

}  // namespace detail

/// In-place unnormalized forward DFT in the grid's d dimensions.
inline void fft_forward(const GridSpec& g, std::vector<cx>& v) {
  fftw_plan p = detail::plan_cache().get(g, FFTW_FORWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(v.data()),
                   reinterpret_cast<fftw_complex*>(v.data()));
}

/// In-place inverse DFT, normalized by 1/sites.
inline void fft_inverse(const GridSpec& g, std::vector<cx>& v) {
  fftw_plan p = detail::plan_cache().get(g, FFTW_BACKWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(v.data()),
                   reinterpret_cast<fftw_complex*>(v.data()));
  const double scale = 1.0 / static_cast<double>(g.sites());
  for (auto& z : v) z *= scale;
}

}  // namespace bmix
