#pragma once

namespace fecam {

/// Entry point of the `fecam` command. Returns 0 on success, 1 on runtime
/// errors and 2 on usage errors.
int cli_main(int argc, char** argv);

}  // namespace fecam
