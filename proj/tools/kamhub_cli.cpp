#include "kamhub/cli.hpp"

int main(int argc, char** argv) {
  return kamhub::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
