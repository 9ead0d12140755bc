// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vtlm {

// Error taxonomy. The CLI maps these onto distinct exit codes, so new
// failure modes should pick (or subclass) one of the classes below.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor/image dimensions.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Invalid user-supplied configuration (bad op table id, sizes not summing
// up, malformed manifest entries, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

// File system / serialization failures.
class IoError : public Error {
public:
  using Error::Error;
};

// Non-finite values, failed convergence, degenerate statistics.
class NumericError : public Error {
public:
  using Error::Error;
};

// Paired t-test on samples whose differences have zero variance.
class DegenerateVarianceError : public NumericError {
public:
  using NumericError::NumericError;
};

// Optional sink for human-readable progress lines from long-running loops
// (training epochs, evaluation rounds). The CLI points this at stderr;
// when unset, progress is silently dropped. Never used for machine-readable
// output, so it has no effect on reproducibility of files.
using ProgressFn = std::function<void(const std::string&)>;

inline ProgressFn& progress_sink() {
  static ProgressFn sink;
  return sink;
}

inline void emit_progress(const std::string& line) {
  if (const ProgressFn& sink = progress_sink()) sink(line);
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker, so every iteration executes exactly once regardless of `jobs`.
// Callers must only use this when iterations write disjoint state; all
// reductions in the library accumulate in index order afterwards, which keeps
// results bitwise identical for any job count.
inline void parallel_for(std::size_t n, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex guard;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vtlm
