#include <string>
#include <vector>

#include "faux/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return faux::run_cli(args);
}
