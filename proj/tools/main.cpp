#include "mslu/cli.hpp"

int main(int argc, char** argv) { return mslu::run_cli(argc, argv); }
