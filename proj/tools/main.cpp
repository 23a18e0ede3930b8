#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  vbl::cli::configure_logging();
  return vbl::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
