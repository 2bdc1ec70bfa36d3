// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace fstrisk {

/// Selects the OpenMP kernel or its serial reference. Both produce
/// bit-identical results; the serial path exists for testing and profiling.
enum class Execution { serial, parallel };

/// Worker threads the parallel kernels will use (1 without OpenMP).
int parallel_threads() noexcept;

}  // namespace fstrisk
