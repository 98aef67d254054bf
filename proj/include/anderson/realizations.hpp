#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "anderson/model.hpp"

namespace anderson {

// splitmix64 finalizer applied to master + golden * (index + 1). For a fixed
// master the map index -> seed is a bijection of 64-bit words.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Seed of an auxiliary stream (calibration, oracles, inline tables). Tags are
// large constants so they never meet a realization index.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t tag);

namespace stream {
inline constexpr std::uint64_t dos = 0xD05ULL << 40;
inline constexpr std::uint64_t calibration = 0xCA1ULL << 40;
inline constexpr std::uint64_t oracle = 0x0AC1ULL << 40;
inline constexpr std::uint64_t second_calibration = 0xCA2ULL << 40;
}  // namespace stream

struct ModelParams {
    int dim = 1;
    int half_side = 1;
    DisorderSpec disorder;
    Boundary boundary = Boundary::periodic;

    LatticeBox box() const { return build_box(dim, half_side); }
    // Disorder draw and assembly for one realization seed.
    HamiltonianMatrix hamiltonian(std::uint64_t seed) const;
};

void to_json(nlohmann::json& j, const ModelParams& m);

struct RunOptions {
    std::size_t realizations = 1;
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
};

inline constexpr int kMaxRetries = 3;

struct RealizationRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;                   // seed whose result was kept
    std::vector<std::uint64_t> failed_seeds;  // in order of failure
};

void to_json(nlohmann::json& j, const RealizationRecord& r);

class WorkerFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Runs task(i) for i in [0, count) on a pool of `workers` threads. Every task
// runs even if some throw; afterwards the exception of the lowest failing
// index is rethrown.
void run_indexed(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

template <class Result>
struct RealizationResults {
    std::vector<Result> results;  // index order
    std::vector<RealizationRecord> records;
};

// Evaluates fn(index, seed) for every realization. A realization throwing
// std::runtime_error is resampled with seed derive_seed(seed_0, attempt), up
// to kMaxRetries times. Results come back in index order regardless of the
// schedule.
template <class Fn>
auto map_realizations(const RunOptions& run, Fn&& fn)
    -> RealizationResults<std::invoke_result_t<Fn&, std::size_t, std::uint64_t>> {
    using Result = std::invoke_result_t<Fn&, std::size_t, std::uint64_t>;
    RealizationResults<Result> out;
    out.results.resize(run.realizations);
    out.records.resize(run.realizations);
    run_indexed(run.realizations, run.workers, [&](std::size_t r) {
        RealizationRecord& rec = out.records[r];
        rec.index = r;
        const std::uint64_t base = derive_seed(run.master_seed, r);
        std::string last_error;
        for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
            const std::uint64_t seed = attempt == 0 ? base : derive_seed(base, std::uint64_t(attempt));
            try {
                out.results[r] = fn(r, seed);
                rec.seed = seed;
                return;
            } catch (const std::runtime_error& e) {
                rec.failed_seeds.push_back(seed);
                last_error = e.what();
            }
        }
        throw WorkerFailure("realization " + std::to_string(r) + " failed after " +
                            std::to_string(kMaxRetries) + " retries: " + last_error);
    });
    return out;
}

}  // namespace anderson
