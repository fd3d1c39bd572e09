#include <string>
#include <vector>

#include "streetrisk/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return streetrisk::cli::run_cli(args);
}
