#include <iostream>
#include <string>
#include <vector>

#include "subens/commands.hpp"

int main(int argc, char** argv) {
  return subens::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
