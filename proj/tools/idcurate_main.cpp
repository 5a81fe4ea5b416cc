#include "idcurate/cli.hpp"

int main(int argc, char** argv) { return idcurate::cli::dispatch(argc, argv); }
