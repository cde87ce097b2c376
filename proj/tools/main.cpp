#include <string>
#include <vector>

#include "htsc/cli_runner.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return htsc::cli::run(args);
}
