#include <iostream>
#include <string>
#include <vector>

#include "tmvr/cli.hpp"

int main(int argc, char** argv) {
  return tmvr::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
