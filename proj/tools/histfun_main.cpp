#include <string>
#include <vector>

#include "histfun/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return histfun::cli::run(args);
}
