#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rwre {

struct ExecPolicy {
  unsigned workers = 1;
};

/// Replicas are cut into fixed-size chunks regardless of worker count;
/// each chunk is reduced sequentially and the chunk results come back in
/// chunk order. Folding them in that order makes every floating-point
/// aggregate identical for any number of workers.
inline constexpr std::uint64_t kReplicaChunk = 1024;

template <class ChunkFn>
auto map_chunks(std::uint64_t replicas, ExecPolicy policy, ChunkFn&& fn)
    -> std::vector<decltype(fn(std::uint64_t{}, std::uint64_t{}))> {
  using Result = decltype(fn(std::uint64_t{}, std::uint64_t{}));
  const std::uint64_t chunks = (replicas + kReplicaChunk - 1) / kReplicaChunk;
  std::vector<Result> out(chunks);
  if (chunks == 0) return out;

  const unsigned workers =
      static_cast<unsigned>(std::clamp<std::uint64_t>(policy.workers, 1, chunks));
  auto run_chunk = [&](std::uint64_t c) {
    const std::uint64_t begin = c * kReplicaChunk;
    const std::uint64_t end = std::min(replicas, begin + kReplicaChunk);
    out[c] = fn(begin, end);
  };

  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
    return out;
  }

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::uint64_t c = next.fetch_add(1);
        if (c >= chunks) return;
        try {
          run_chunk(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(chunks);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Per-replica map into a vector indexed by replica.
template <class T, class ReplicaFn>
std::vector<T> map_replicas(std::uint64_t replicas, ExecPolicy policy, ReplicaFn&& fn) {
  std::vector<T> out(replicas);
  map_chunks(replicas, policy, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t i = begin; i < end; ++i) out[i] = fn(i);
    return 0;
  });
  return out;
}

}  // namespace rwre
