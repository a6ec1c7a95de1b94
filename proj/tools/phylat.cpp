#include <string>
#include <vector>

#include "phylat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return phylat::cli_main(args);
}
