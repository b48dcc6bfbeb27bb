#pragma once

namespace echofight::evalkit {

// Subcommands: train, evaluate, compare, inspect-audio, replay.
// Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace echofight::evalkit
