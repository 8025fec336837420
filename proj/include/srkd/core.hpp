// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace srkd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

inline constexpr std::string_view kVersion = "0.1.0";

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer; used to derive independent seeds from a master seed.
constexpr auto mix64(std::uint64_t x) noexcept -> std::uint64_t
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

constexpr auto derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept -> std::uint64_t
{
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// 17 significant digits, so the text parses back to the identical double.
auto format_real(double value) -> std::string;

// Quotes a CSV field when it holds the delimiter, a quote or a line break.
auto csv_field(std::string_view text, char delimiter = ',') -> std::string;

// Rows of `X` selected by `rows`, in order.
auto take_rows(Matrix const& X, std::vector<Index> const& rows) -> Matrix;
auto take_rows(Vector const& y, std::vector<Index> const& rows) -> Vector;

// Runs fn(0..n-1) on up to `jobs` threads. Exceptions are rethrown after all
// workers finish; the one from the lowest index wins so failures are reproducible.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn)
{
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::mutex mutex;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t i = 0;
            {
                std::lock_guard lock(mutex);
                if (next >= n) {
                    return;
                }
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        auto const count = std::min(jobs, n);
        pool.reserve(count);
        for (std::size_t t = 0; t < count; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace srkd
