#include <vector>

#include "dyfulm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dyfulm::run_cli(std::move(args));
}
