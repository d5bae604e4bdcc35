#include <string>
#include <vector>

#include "nvar/cli.hpp"

int main(int argc, char** argv) {
  return nvar::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
