#include "wigtomo/cli.hpp"

int main(int argc, char** argv) { return wigtomo::cli::run(argc, argv); }
