#include "anderson/realizations.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace anderson {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t tag) {
    return derive_seed(derive_seed(master, tag), 0);
}

HamiltonianMatrix ModelParams::hamiltonian(std::uint64_t seed) const {
    const auto b = box();
    return assemble_hamiltonian(b, sample_disorder(disorder, b, seed), boundary);
}

void to_json(nlohmann::json& j, const ModelParams& m) {
    j = nlohmann::json{{"dim", m.dim},
                       {"half_side", m.half_side},
                       {"disorder", m.disorder},
                       {"boundary", to_string(m.boundary)}};
}

void to_json(nlohmann::json& j, const RealizationRecord& r) {
    j = nlohmann::json{{"index", r.index}, {"seed", r.seed}};
    if (!r.failed_seeds.empty()) j["failed_seeds"] = r.failed_seeds;
}

void run_indexed(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
    if (workers == 0) throw std::invalid_argument("worker count must be positive");
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(workers, count);
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace anderson
