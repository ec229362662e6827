#include "pwflow/cli.hpp"

int main(int argc, char** argv) { return pwflow::cli::run(argc, argv); }
