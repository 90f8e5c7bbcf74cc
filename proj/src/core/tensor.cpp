#include "core/tensor.hpp"

#include <atomic>
#include <cstdlib>

namespace lsen {

namespace {

std::atomic<bool>& finite_flag() {
  static std::atomic<bool> enabled = [] {
    const char* env = std::getenv("LSEN_CHECK_FINITE");
    return env && env[0] && env[0] != '0';
  }();
  return enabled;
}

}  // namespace

bool finite_checks_enabled() { return finite_flag().load(std::memory_order_relaxed); }

void set_finite_checks(bool enabled) { finite_flag().store(enabled, std::memory_order_relaxed); }

}  // namespace lsen
