#ifndef HYPERNB_PARALLEL_HPP
#define HYPERNB_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hypernb {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

inline void set_num_threads(int n) { detail::thread_setting() = std::max(0, n); }

// 0 means unset: fall back to HYPERNB_THREADS, then hardware concurrency.
inline int num_threads() {
  int n = detail::thread_setting();
  if (n > 0) return n;
  if (const char* env = std::getenv("HYPERNB_THREADS")) {
    int e = std::atoi(env);
    if (e > 0) return e;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(chunk) for chunk in [0, chunks). Work split never depends on the
// thread count, so callers that reduce per-chunk results in chunk order get
// identical output for any number of threads.
template <class F>
void parallel_chunks(std::size_t chunks, F&& body) {
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(num_threads()), chunks);
  if (nt <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        body(c);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next = chunks;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t + 1 < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Element-wise loop over [0, n) in fixed blocks.
template <class F>
void parallel_for(std::size_t n, F&& body, std::size_t block = 4096) {
  if (n == 0) return;
  const std::size_t chunks = (n + block - 1) / block;
  parallel_chunks(chunks, [&](std::size_t c) {
    const std::size_t lo = c * block, hi = std::min(n, lo + block);
    for (std::size_t i = lo; i < hi; ++i) body(i);
  });
}

}  // namespace hypernb

#endif
