#include <string>
#include <vector>

#include "etsim/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return etsim::run_cli(args);
}
