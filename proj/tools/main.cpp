#include <vector>

#include "mstarch/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mstarch::run_cli(args);
}
