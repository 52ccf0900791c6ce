#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace traffic {

/// Raised for malformed configuration (bad values, unknown keys, infeasible
/// scenarios). The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed 9-significant-digit float formatting shared by all CSV output.
std::string format_g9(double x);

std::string to_hex(std::uint64_t x);

/// FNV-1a over a whole file; used for golden-output regression pins.
std::uint64_t hash_file(const std::string& path);

/// Runs fn(0..n-1) across up to `jobs` threads (0 = hardware concurrency).
/// Work items must be independent; results keyed by index stay in input
/// order, so output bytes never depend on the thread count.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn);

int effective_jobs(int jobs);

}  // namespace traffic
