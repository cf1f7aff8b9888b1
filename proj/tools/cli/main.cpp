#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  return lidsn::cli::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
