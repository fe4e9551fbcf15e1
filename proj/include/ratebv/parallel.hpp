#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ratebv
{

/// Number of worker threads to use: `requested` if positive, otherwise the
/// hardware concurrency (at least 1).
inline int resolve_threads(int requested)
{
    if (requested > 0)
    {
        return requested;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers with a static
/// round-robin split. The first exception in index order is rethrown after all
/// workers joined, so the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body)
{
    std::vector<std::exception_ptr> errors(count);
    const auto workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    auto run = [&](std::size_t worker) {
        for (std::size_t i = worker; i < count; i += workers)
        {
            try
            {
                body(i);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1)
    {
        run(0);
    }
    else
    {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
        {
            pool.emplace_back(run, w);
        }
        for (auto& t : pool)
        {
            t.join();
        }
    }
    for (auto& e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace ratebv
