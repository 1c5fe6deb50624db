#include "streamem/cli.hpp"

int main(int argc, char** argv) { return streamem::run_cli(argc, argv); }
