#pragma once

namespace drivesim {

/// Execution policy for data-parallel kernels. `serial` is the reference
/// path; `parallel` fans out with OpenMP and must produce identical output.
enum class Exec { serial, parallel };

}  // namespace drivesim
