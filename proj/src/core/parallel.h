/* Copyright 2026 The attnseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ATTNSEG_CORE_PARALLEL_H_
#define ATTNSEG_CORE_PARALLEL_H_

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace attnseg {

// Fixed-size pool that runs index-parallel loops. The caller thread takes
// part in every loop, so a pool of size 1 spawns no threads at all.
//
// Work items must write only to state owned by their index; any reduction
// happens afterwards in index order, which keeps results independent of the
// number of threads.
class WorkerPool {
 public:
  // threads == 0 selects std::thread::hardware_concurrency().
  explicit WorkerPool(size_t threads = 1);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  size_t size() const { return workers_.size() + 1; }

  // Calls fn(i) for every i in [0, count). Blocks until all calls return.
  // If any call throws, the exception from the lowest failing index is
  // rethrown after the loop drains.
  void run(size_t count, const std::function<void(size_t)>& fn);

 private:
  void worker_loop();
  void drain();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(size_t)>* job_ = nullptr;
  size_t job_count_ = 0;
  size_t next_index_ = 0;
  size_t active_ = 0;
  uint64_t generation_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
  size_t error_index_ = 0;
};

}  // namespace attnseg

#endif  // ATTNSEG_CORE_PARALLEL_H_
