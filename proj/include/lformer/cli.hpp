#pragma once

// Command-line front end: gen-data, train, eval, bench, report.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

namespace lformer::cli {

int run(int argc, char** argv);

}  // namespace lformer::cli
