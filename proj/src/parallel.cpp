#include "sievekit/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sievekit {

std::size_t default_lanes() {
    if (const char* env = std::getenv("SIEVEKIT_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t lanes, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;
    lanes = std::clamp<std::size_t>(lanes, 1, n);
    if (lanes == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(lanes);
    const std::size_t block = (n + lanes - 1) / lanes;
    for (std::size_t lane = 0; lane < lanes; ++lane) {
        const std::size_t begin = lane * block;
        const std::size_t end = std::min(n, begin + block);
        if (begin >= end) break;
        workers.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace sievekit
