#include "graphsolver/cli.hpp"

int main(int argc, char** argv) { return graphsolver::cli::run(argc, argv); }
