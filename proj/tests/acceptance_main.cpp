// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include "pauc/selftest.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20240517ull;
  const auto results = pauc::selftest::run_all(seed);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%s criterion %d %s [%s] (%.2f s)\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str(), r.wall_ms / 1000.0);
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}
