#include "riskmpc/cli.hpp"

int main(int argc, char** argv) { return riskmpc::cli_main(argc, argv); }
