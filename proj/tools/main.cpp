#include "transsent/cli.hpp"

int main(int argc, char** argv) { return transsent::cli::run(argc, argv); }
