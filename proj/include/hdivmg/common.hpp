#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace hdivmg {

using Real = double;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;
using Index = std::int64_t;

inline Real sq(Real x) { return x * x; }

/// Worker cap for element loops and patch factorizations. HDIVMG_THREADS
/// overrides the hardware count; smoother sweeps stay sequential regardless.
inline int worker_count() {
  static const int n = [] {
    if (const char* env = std::getenv("HDIVMG_THREADS")) {
      int v = std::atoi(env);
      if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
  }();
  return n;
}

/// Chunked parallel loop over [0, n). Falls back to a plain loop when only
/// one worker is available or the range is small.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const int workers = worker_count();
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hdivmg
