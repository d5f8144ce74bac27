#pragma once

namespace palign {

/// Entry point shared by the palign binary and the in-process CLI tests.
int run_cli(int argc, const char* const* argv);

}  // namespace palign
