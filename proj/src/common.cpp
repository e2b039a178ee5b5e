#include "opdef/common.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace opdef {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

int default_worker_count() {
  if (const char* env = std::getenv("OPDEF_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int g_workers = default_worker_count();

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return splitmix64(base ^ fnv1a(tag));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (index + 0x51f2bd1c0d9a7e35ULL));
}

int worker_count() { return g_workers; }

void set_worker_count(int n) { g_workers = n < 1 ? 1 : n; }

void parallel_chunks(std::size_t n, int n_chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (n == 0 || n_chunks < 1) return;
  const std::size_t chunks = static_cast<std::size_t>(n_chunks);
  auto chunk_range = [&](std::size_t c, std::size_t& b, std::size_t& e) {
    b = n * c / chunks;
    e = n * (c + 1) / chunks;
  };

  const int workers = std::min<int>(g_workers, n_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      std::size_t b, e;
      chunk_range(c, b, e);
      if (b < e) fn(static_cast<int>(c), b, e);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      std::size_t b, e;
      chunk_range(c, b, e);
      if (b < e) fn(static_cast<int>(c), b, e);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace opdef
