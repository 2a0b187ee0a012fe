#include "dppo/lab/commands.hpp"

int main(int argc, char** argv) { return dppo::lab::run_cli(argc, argv); }
