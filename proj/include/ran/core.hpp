#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ran {

using Index = Eigen::Index;

// Coordinates and per-voxel vectors are ordered (z, y, x) to match the
// storage layout: z slowest, x fastest.
using Vec3d = Eigen::Vector3d;
using Vec3i = Eigen::Matrix<Index, 3, 1>;

/// Input samples are unusable (non-finite values, malformed files).
class invalid_data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric has no defined value (e.g. surface distance of an empty mask).
class undefined_metric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Voxel counts (t slices, h rows, w columns).
struct Dims {
  Index t = 0, h = 0, w = 0;

  Index count() const { return t * h * w; }
  Index operator[](int axis) const { return axis == 0 ? t : (axis == 1 ? h : w); }
  bool operator==(const Dims&) const = default;

  Index offset(Index z, Index y, Index x) const { return (z * h + y) * w + x; }
};

inline void require_positive(const Dims& d, const char* what) {
  if (d.t < 1 || d.h < 1 || d.w < 1)
    throw std::invalid_argument(std::string(what) + ": dimensions must be >= 1");
}

namespace detail {
inline std::atomic<int>& thread_override() {
  static std::atomic<int> v{0};
  return v;
}
}  // namespace detail

inline int max_threads() {
  const int forced = detail::thread_override().load(std::memory_order_relaxed);
  if (forced > 0) return forced;
  if (const char* env = std::getenv("RAN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

/// Caps the worker count (0 restores RAN_THREADS / hardware default).
inline void set_max_threads(int n) { detail::thread_override().store(n, std::memory_order_relaxed); }

constexpr Index kParallelGrain = 2048;

// Chunk boundaries depend only on `grain`, never on the worker count, so any
// per-chunk arithmetic is reproducible across --threads settings.
template <class Fn>
void parallel_chunks(Index begin, Index end, Index grain, Fn&& fn) {
  const Index n = end - begin;
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  const Index nchunks = (n + grain - 1) / grain;
  const Index workers = std::min<Index>(max_threads(), nchunks);
  if (workers <= 1) {
    for (Index c = 0; c < nchunks; ++c) {
      const Index b = begin + c * grain;
      fn(b, std::min(end, b + grain));
    }
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto work = [&] {
    for (;;) {
      const Index c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks) return;
      const Index b = begin + c * grain;
      try {
        fn(b, std::min(end, b + grain));
      } catch (...) {
        std::scoped_lock lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers) - 1);
  for (Index i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

template <class Fn>
void parallel_for(Index begin, Index end, Fn&& fn) {
  parallel_chunks(begin, end, kParallelGrain, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) fn(i);
  });
}

/// Sum of fn(i) over [begin, end). Partial sums are formed per fixed-size
/// chunk and combined in chunk order, so the value is bit-stable regardless
/// of the worker count.
template <class Fn>
double ordered_sum(Index begin, Index end, Fn&& fn) {
  const Index n = end - begin;
  if (n <= 0) return 0.0;
  const Index grain = kParallelGrain;
  const Index nchunks = (n + grain - 1) / grain;
  std::vector<double> partial(size_t(nchunks), 0.0);
  parallel_chunks(begin, end, grain, [&](Index b, Index e) {
    double s = 0.0;
    for (Index i = b; i < e; ++i) s += fn(i);
    partial[size_t((b - begin) / grain)] = s;
  });
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

}  // namespace ran
