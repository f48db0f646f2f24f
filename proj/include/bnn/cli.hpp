#ifndef BNN_CLI_HPP
#define BNN_CLI_HPP

#include <string>
#include <vector>

namespace bnn::cli {

// Exit codes: 0 ok, 2 spec error, 3 missing artifact, 4 numeric failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace bnn::cli

#endif  // BNN_CLI_HPP
