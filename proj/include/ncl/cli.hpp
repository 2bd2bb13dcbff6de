#pragma once

namespace ncl::cli {

// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input error.
int run(int argc, char** argv);

}  // namespace ncl::cli
