#pragma once

#include <cstddef>
#include <vector>

#include "parallel.hpp"
#include "random.hpp"
#include "solver.hpp"

namespace strictbounds {

/// Runs fn(i, engine, solver) for replicates i in [0, n).
///
/// Replicate i draws from substream i / kReplicateBlock of `family`, in index
/// order inside its block, so the random numbers a replicate sees depend only
/// on (seed, i) and not on the thread count. Each worker owns one QpSolver.
template <class Fn>
void run_replicates(std::size_t n, const StreamFamily& family, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = default_thread_count();
  const std::size_t blocks = (n + kReplicateBlock - 1) / kReplicateBlock;
  std::vector<QpSolver> solvers(threads);
  for_each_block(blocks, threads, [&](std::size_t b, unsigned w) {
    Engine engine = family.stream(b);
    const std::size_t end = std::min(n, (b + 1) * kReplicateBlock);
    for (std::size_t i = b * kReplicateBlock; i < end; ++i) fn(i, engine, solvers[w]);
  });
}

}  // namespace strictbounds
