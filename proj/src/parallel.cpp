// SPDX-License-Identifier: Apache-2.0

#include "cpwl/parallel.hpp"

namespace cpwl {

namespace {
std::atomic<std::size_t> g_thread_cap{0};
}

void set_thread_cap(std::size_t threads) { g_thread_cap.store(threads); }

std::size_t thread_cap() {
  const std::size_t cap = g_thread_cap.load();
  if (cap != 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace cpwl
