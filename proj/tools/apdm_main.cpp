#include <string>
#include <vector>

#include "apdm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return apdm::run_cli(args);
}
