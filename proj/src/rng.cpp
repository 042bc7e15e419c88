#include "ftnoc/rng.hpp"

namespace ftnoc {

namespace {
thread_local std::int64_t g_perturb_at = -1;
thread_local std::int64_t g_draws = 0;
}  // namespace

void RngPerturbation::arm(std::int64_t draw_index) {
  g_perturb_at = draw_index;
  g_draws = 0;
}

void RngPerturbation::disarm() {
  g_perturb_at = -1;
  g_draws = 0;
}

std::uint64_t Rng::next() {
  std::uint64_t v = eng_();
  if (g_perturb_at >= 0 && g_draws++ == g_perturb_at) v ^= 0x5DEECE66Dull;
  return v;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

}  // namespace ftnoc
