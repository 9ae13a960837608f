#include "setpred/cli.hpp"

int main(int argc, char** argv) {
  return setpred::run_cli({argv + 1, argv + argc});
}
