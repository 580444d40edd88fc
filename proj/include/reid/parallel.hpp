#pragma once

#include <Eigen/Core>
#include <functional>

namespace reid {

/// Worker count used by row-parallel kernels. 0 restores the default
/// (hardware concurrency).
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Iterations must not share mutable state.
void parallel_for(Eigen::Index n, const std::function<void(Eigen::Index)>& body);

}  // namespace reid
