#include "core/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "core/common.hpp"

namespace lsen {

namespace {

class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void resize(int n) {
    std::lock_guard<std::mutex> outer(api_mutex_);
    if (n < 1) n = 1;
    if (n == threads_wanted_) return;
    stop_workers();
    threads_wanted_ = n;
    start_workers();
  }

  int size() {
    std::lock_guard<std::mutex> outer(api_mutex_);
    return threads_wanted_;
  }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    if (inside_job) {  // nested calls degrade to serial execution
      body(0, n);
      return;
    }
    std::lock_guard<std::mutex> outer(api_mutex_);
    const int nt = threads_wanted_;
    if (nt == 1 || n == 1) {
      body(0, n);
      return;
    }
    const int parts = static_cast<int>(std::min<int64_t>(nt, n));
    const int64_t chunk = (n + parts - 1) / parts;
    {
      std::unique_lock<std::mutex> lk(mutex_);
      job_body_ = &body;
      job_n_ = n;
      job_chunk_ = chunk;
      job_parts_ = parts;
      pending_ = parts - 1;  // workers take parts 1..parts-1
      ++job_id_;
    }
    cv_.notify_all();
    inside_job = true;
    body(0, std::min<int64_t>(chunk, n));  // caller executes part 0
    inside_job = false;
    std::unique_lock<std::mutex> lk(mutex_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    job_body_ = nullptr;
  }

  static thread_local bool inside_job;

 private:
  Pool() {
    unsigned hw = std::thread::hardware_concurrency();
    threads_wanted_ = hw ? static_cast<int>(hw) : 1;
    start_workers();
  }

  ~Pool() { stop_workers(); }

  void start_workers() {
    stop_ = false;
    for (int t = 1; t < threads_wanted_; ++t) {
      workers_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
    workers_.clear();
  }

  void worker_loop(int part) {
    inside_job = true;  // workers never re-split
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* body = nullptr;
      int64_t begin = 0, end = 0;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        cv_.wait(lk, [&] { return stop_ || job_id_ != seen; });
        if (stop_) return;
        seen = job_id_;
        if (part < job_parts_) {
          begin = part * job_chunk_;
          end = std::min<int64_t>(begin + job_chunk_, job_n_);
          body = job_body_;
        }
      }
      if (body && begin < end) (*body)(begin, end);
      {
        std::lock_guard<std::mutex> lk(mutex_);
        if (part < job_parts_ && --pending_ == 0) done_cv_.notify_all();
        if (part >= job_parts_) {
          // not participating in this job; nothing to signal
        }
      }
    }
  }

  std::mutex api_mutex_;  // serializes parallel regions (no nesting)
  std::mutex mutex_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> workers_;
  int threads_wanted_ = 1;
  bool stop_ = false;
  uint64_t job_id_ = 0;
  const std::function<void(int64_t, int64_t)>* job_body_ = nullptr;
  int64_t job_n_ = 0, job_chunk_ = 0;
  int job_parts_ = 0;
  int pending_ = 0;
};

thread_local bool Pool::inside_job = false;

}  // namespace

void set_num_threads(int n) { Pool::instance().resize(n); }

int num_threads() { return Pool::instance().size(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
  Pool::instance().run(n, body);
}

void parallel_for_each(int64_t n, const std::function<void(int64_t)>& body) {
  parallel_for(n, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) body(i);
  });
}

}  // namespace lsen
