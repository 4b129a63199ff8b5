#pragma once

// Backend dispatch: single queries, joined parallel batches, per-source
// in-flight limits and retry of transient failures. The only place that does
// concurrent backend I/O.

#include "rerank/source.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <latch>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace rerank {

struct RateLimit {
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds min_gap{0};
};

struct Batch {
    std::vector<SearchQuery> queries;
    std::string source_id;
    std::uint64_t batch_id = 0;
};

class Executor {
public:
    struct Options {
        std::size_t workers = 8;
        int max_retries = 3;
        std::chrono::milliseconds initial_backoff{1};
    };

    Executor() : Executor(Options{}) {}
    explicit Executor(Options options) : options_(options) {
        for (std::size_t i = 0; i < std::max<std::size_t>(1, options_.workers); ++i)
            workers_.emplace_back([this] { work(); });
    }

    ~Executor() {
        {
            std::lock_guard lock(queue_mutex_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    Executor(const Executor&) = delete;
    Executor& operator=(const Executor&) = delete;

    void register_source(std::shared_ptr<TopKSource> source, RateLimit limit = {}) {
        if (limit.max_in_flight < 1) throw Error(ErrorCode::config, "max_in_flight must be >= 1", "max_in_flight");
        std::string id = source->describe().source_id;
        std::lock_guard lock(registry_mutex_);
        auto slot = std::make_shared<Slot>();
        slot->source = std::move(source);
        slot->limit = limit;
        sources_[id] = std::move(slot);
    }

    bool has_source(const std::string& id) const {
        std::lock_guard lock(registry_mutex_);
        return sources_.count(id) > 0;
    }

    std::shared_ptr<TopKSource> source(const std::string& id) const { return slot(id)->source; }

    std::vector<std::string> source_ids() const {
        std::lock_guard lock(registry_mutex_);
        std::vector<std::string> ids;
        for (const auto& [id, _] : sources_) ids.push_back(id);
        return ids;
    }

    /// One sequential query. Retries count as a single logical query.
    TopKResponse submit(const std::string& source_id, const SearchQuery& q, QueryMeter& meter) {
        auto s = slot(source_id);
        auto start = std::chrono::steady_clock::now();
        meter.record_sequential();
        try {
            TopKResponse r = dispatch(*s, q);
            meter.add_time(std::chrono::steady_clock::now() - start);
            return r;
        } catch (...) {
            meter.add_time(std::chrono::steady_clock::now() - start);
            throw;
        }
    }

    /// Runs every query of the batch (bounded by the source's max_in_flight)
    /// and returns responses aligned with the request order. The first failing
    /// member, by position, fails the whole batch.
    std::vector<TopKResponse> submit_batch(const Batch& batch, QueryMeter& meter) {
        if (batch.queries.empty()) throw Error(ErrorCode::validation, "empty batch");
        auto s = slot(batch.source_id);
        auto start = std::chrono::steady_clock::now();
        const std::size_t n = batch.queries.size();
        meter.record_parallel(n);
        std::vector<TopKResponse> out(n);
        std::vector<std::exception_ptr> errors(n);
        if (n == 1) {
            try {
                out[0] = dispatch(*s, batch.queries[0]);
            } catch (...) {
                errors[0] = std::current_exception();
            }
        } else {
            std::latch done(static_cast<std::ptrdiff_t>(n));
            {
                std::lock_guard lock(queue_mutex_);
                for (std::size_t i = 0; i < n; ++i) {
                    queue_.push_back([&, i] {
                        try {
                            out[i] = dispatch(*s, batch.queries[i]);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                        done.count_down();
                    });
                }
            }
            queue_cv_.notify_all();
            done.wait();
        }
        meter.add_time(std::chrono::steady_clock::now() - start);
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        return out;
    }

private:
    struct Slot {
        std::shared_ptr<TopKSource> source;
        RateLimit limit;
        std::mutex mutex;
        std::condition_variable cv;
        std::size_t in_flight = 0;
        std::chrono::steady_clock::time_point last_dispatch{};
    };

    std::shared_ptr<Slot> slot(const std::string& id) const {
        std::lock_guard lock(registry_mutex_);
        auto it = sources_.find(id);
        if (it == sources_.end()) throw Error(ErrorCode::config, "source '" + id + "' is not registered", "source_id");
        return it->second;
    }

    TopKResponse dispatch(Slot& s, const SearchQuery& q) {
        std::chrono::steady_clock::time_point slot_time{};
        {
            std::unique_lock lock(s.mutex);
            s.cv.wait(lock, [&] { return s.in_flight < s.limit.max_in_flight; });
            if (s.limit.min_gap.count() > 0) {
                // Reserve the next dispatch time so concurrent callers queue up.
                slot_time = std::max(std::chrono::steady_clock::now(), s.last_dispatch + s.limit.min_gap);
                s.last_dispatch = slot_time;
            }
            ++s.in_flight;
        }
        if (slot_time != std::chrono::steady_clock::time_point{}) std::this_thread::sleep_until(slot_time);
        struct Release {
            Slot& s;
            ~Release() {
                {
                    std::lock_guard lock(s.mutex);
                    --s.in_flight;
                }
                s.cv.notify_one();
            }
        } release{s};

        auto backoff = options_.initial_backoff;
        for (int attempt = 0;; ++attempt) {
            try {
                return s.source->search(q);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::transient_source || attempt >= options_.max_retries) throw;
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }

    void work() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }

    Options options_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sources_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

} // namespace rerank
