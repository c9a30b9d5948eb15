#pragma once

#include <string>
#include <vector>

namespace dictdis::cli {

// Entry point shared by the binary and in-process callers (tests, bindings).
// `args` excludes the program name. Errors print one line to stderr in the
// form "error:<category>: <message>"; the return code is 0 on success, 2 for
// usage errors, 1 otherwise.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);  // argv[0] is the program name

}  // namespace dictdis::cli
