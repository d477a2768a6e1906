#pragma once

namespace docstormer::cli {

/// Parses the command line, runs one subcommand and returns its exit code.
int run(int argc, char** argv);

}  // namespace docstormer::cli
